use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use super::lexicon::{lexical_covariates, Lexicon, LexicalCovariates};
use super::PrimingError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Soa {
    Short,
    Long,
}

impl Soa {
    pub fn millis(&self) -> u32 {
        match self {
            Soa::Short => 200,
            Soa::Long => 1200,
        }
    }

    pub fn from_millis(ms: u32) -> Option<Soa> {
        match ms {
            200 => Some(Soa::Short),
            1200 => Some(Soa::Long),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    LexicalDecision,
    Naming,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::LexicalDecision => "lexical_decision",
            Task::Naming => "naming",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "lexical_decision" => Some(Task::LexicalDecision),
            "naming" => Some(Task::Naming),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrimeCondition {
    Strong,
    Weak,
    Unrelated1,
    Unrelated2,
}

impl PrimeCondition {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrimeCondition::Strong => "strong",
            PrimeCondition::Weak => "weak",
            PrimeCondition::Unrelated1 => "unrelated1",
            PrimeCondition::Unrelated2 => "unrelated2",
        }
    }

    pub fn parse(s: &str) -> Option<PrimeCondition> {
        match s {
            "strong" => Some(PrimeCondition::Strong),
            "weak" => Some(PrimeCondition::Weak),
            "unrelated1" => Some(PrimeCondition::Unrelated1),
            "unrelated2" => Some(PrimeCondition::Unrelated2),
            _ => None,
        }
    }
}

impl fmt::Display for PrimeCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One subject's response to one prime–target presentation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPrimingTrial {
    pub subject: String,
    pub target: String,
    pub prime: String,
    pub condition: PrimeCondition,
    pub soa: Soa,
    pub task: Task,
    /// Milliseconds; meaningful only when `missing` is false.
    pub rt: f64,
    pub error: bool,
    pub missing: bool,
}

impl RawPrimingTrial {
    pub fn validate(&self) -> Result<(), PrimingError> {
        if !self.missing && !(self.rt > 0.0 && self.rt.is_finite()) {
            return Err(PrimingError::InvalidTrial(format!(
                "subject {} target {} prime {}: rt {} must be positive",
                self.subject, self.target, self.prime, self.rt
            )));
        }
        Ok(())
    }
}

/// Standard deviation used for per-cell standardization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdKind {
    Sample,
    Population,
}

/// Whether subject RTs are averaged before or after the log transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RtOrder {
    AverageThenLog,
    LogThenAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub sd: SdKind,
    pub order: RtOrder,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            sd: SdKind::Sample,
            order: RtOrder::AverageThenLog,
        }
    }
}

/// One averaged prime–target observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimingRow {
    pub target: String,
    pub prime: String,
    pub soa: Soa,
    pub task: Task,
    pub log_rt: f64,
    pub z_log_rt: f64,
    /// Covariates of the target word, once attached.
    pub covariates: Option<LexicalCovariates>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PreprocessStats {
    pub raw_trials: usize,
    pub dropped_targets: usize,
    pub dropped_trials: usize,
    pub averaged_rows: usize,
    pub dropped_oov: usize,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimingTable {
    pub rows: Vec<PrimingRow>,
    pub sd: SdKind,
    pub stats: PreprocessStats,
}

impl PrimingTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Prime and target words of every row.
    pub fn words(&self) -> BTreeSet<&str> {
        self.rows.iter().flat_map(|r| [r.target.as_str(), r.prime.as_str()]).collect()
    }
}

fn standardize(rows: &mut [PrimingRow], sd: SdKind) -> Result<(), PrimingError> {
    let mut cells: BTreeMap<(Soa, Task), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        cells.entry((r.soa, r.task)).or_default().push(i);
    }
    for ((soa, task), idx) in cells {
        let n = idx.len();
        if n < 3 {
            return Err(PrimingError::CannotStandardize {
                soa: soa.millis(),
                task: task.as_str(),
                n,
            });
        }
        let mean = idx.iter().map(|&i| rows[i].log_rt).sum::<f64>() / n as f64;
        let ss: f64 = idx.iter().map(|&i| (rows[i].log_rt - mean).powi(2)).sum();
        let denom = match sd {
            SdKind::Sample => (n - 1) as f64,
            SdKind::Population => n as f64,
        };
        let s = (ss / denom).sqrt();
        if s == 0.0 {
            return Err(PrimingError::ZeroVariance {
                soa: soa.millis(),
                task: task.as_str(),
            });
        }
        for &i in &idx {
            rows[i].z_log_rt = (rows[i].log_rt - mean) / s;
        }
    }
    Ok(())
}

/// Clean raw trials into one standardized log-RT row per
/// (prime, target, soa, task).
///
/// Order: lowercase words; drop targets without exactly four distinct
/// primes; drop error and missing trials; average over subjects; drop rows
/// whose prime or target is not in `vocab`; log; z-score within each
/// (soa, task) cell.
pub fn preprocess_spp(
    trials: &[RawPrimingTrial],
    vocab: &HashSet<String>,
    cfg: PreprocessConfig,
) -> Result<PrimingTable, PrimingError> {
    for t in trials {
        t.validate()?;
    }
    let mut stats = PreprocessStats {
        raw_trials: trials.len(),
        ..Default::default()
    };
    let lowered: Vec<(String, String, &RawPrimingTrial)> =
        trials.iter().map(|t| (t.target.to_lowercase(), t.prime.to_lowercase(), t)).collect();

    let mut primes: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (target, prime, _) in &lowered {
        primes.entry(target).or_default().insert(prime);
    }
    let bad_targets: HashSet<&str> = primes.iter().filter(|(_, p)| p.len() != 4).map(|(t, _)| *t).collect();
    stats.dropped_targets = bad_targets.len();

    let mut groups: BTreeMap<(Soa, Task, &str, &str), Vec<f64>> = BTreeMap::new();
    for (target, prime, t) in &lowered {
        if bad_targets.contains(target.as_str()) {
            continue;
        }
        if t.error || t.missing {
            stats.dropped_trials += 1;
            continue;
        }
        groups.entry((t.soa, t.task, target, prime)).or_default().push(t.rt);
    }
    stats.averaged_rows = groups.len();

    let mut rows = Vec::with_capacity(groups.len());
    for ((soa, task, target, prime), rts) in groups {
        if !vocab.contains(target) || !vocab.contains(prime) {
            stats.dropped_oov += 1;
            continue;
        }
        let n = rts.len() as f64;
        let log_rt = match cfg.order {
            RtOrder::AverageThenLog => (rts.iter().sum::<f64>() / n).ln(),
            RtOrder::LogThenAverage => rts.iter().map(|r| r.ln()).sum::<f64>() / n,
        };
        rows.push(PrimingRow {
            target: target.to_string(),
            prime: prime.to_string(),
            soa,
            task,
            log_rt,
            z_log_rt: 0.0,
            covariates: None,
        });
    }
    standardize(&mut rows, cfg.sd)?;
    stats.rows = rows.len();
    Ok(PrimingTable { rows, sd: cfg.sd, stats })
}

/// What to do with rows whose target is missing from the lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingPolicy {
    Error,
    /// Drop those rows and re-standardize the remaining cells.
    Drop,
}

/// Fill in each row's target covariates from `lexicon`.
pub fn attach_covariates(table: &mut PrimingTable, lexicon: &Lexicon, policy: MissingPolicy) -> Result<(), PrimingError> {
    let targets: BTreeSet<&str> = table.rows.iter().map(|r| r.target.as_str()).collect();
    let missing: Vec<String> = targets.iter().filter(|t| !lexicon.contains(t)).map(|t| t.to_string()).collect();
    if !missing.is_empty() {
        match policy {
            MissingPolicy::Error => return Err(PrimingError::MissingFromLexicon(missing)),
            MissingPolicy::Drop => {
                log::warn!("dropping rows for {} targets missing from the lexicon", missing.len());
                let missing: HashSet<String> = missing.into_iter().collect();
                table.rows.retain(|r| !missing.contains(&r.target));
                standardize(&mut table.rows, table.sd)?;
                table.stats.rows = table.rows.len();
            }
        }
    }
    let targets: Vec<String> = table.rows.iter().map(|r| r.target.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let covs = lexical_covariates(&targets, lexicon)?;
    let by_word: BTreeMap<&str, LexicalCovariates> = targets.iter().map(String::as_str).zip(covs).collect();
    for r in &mut table.rows {
        r.covariates = Some(by_word[r.target.as_str()]);
    }
    Ok(())
}
