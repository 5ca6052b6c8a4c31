use std::fmt::Write as _;
use std::path::Path;

use super::{numbered_lines, read_text, write_text, FormatError};
use crate::priming::{Lexicon, PrimeCondition, RawPrimingTrial, Soa, Task};
use crate::similarity::{PairKind, RatedPair, SimilarityDataset};

pub const SPP_HEADER: &str = "subject,target,prime,condition,soa,task,rt,error,missing";

/// Parse `word1<TAB>word2<TAB>rating` rows. An optional first line
/// `#kind=similarity|relatedness|NA` declares what the ratings measure.
pub fn parse_sim_dataset(text: &str, name: &str, source_name: &str) -> Result<SimilarityDataset, FormatError> {
    let mut kind = PairKind::Unspecified;
    let mut pairs = Vec::new();
    for (line, l) in numbered_lines(text) {
        if line == 1 {
            if let Some(k) = l.strip_prefix("#kind=") {
                kind = PairKind::parse(k.trim())
                    .ok_or_else(|| FormatError::parse(source_name, line, format!("unknown kind {k:?}")))?;
                continue;
            }
        }
        let fields: Vec<&str> = l.split('\t').collect();
        let [w1, w2, rating] = fields[..] else {
            return Err(FormatError::parse(source_name, line, format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        if w1.is_empty() || w2.is_empty() {
            return Err(FormatError::parse(source_name, line, "empty word"));
        }
        let rating = rating
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|r| r.is_finite())
            .ok_or_else(|| FormatError::parse(source_name, line, format!("rating {rating:?} is not a finite number")))?;
        pairs.push(RatedPair {
            w1: w1.to_string(),
            w2: w2.to_string(),
            rating,
        });
    }
    SimilarityDataset::new(name, kind, pairs).map_err(|e| FormatError::invalid(source_name, e))
}

/// Dataset named after the file stem.
pub fn load_sim_dataset(path: &Path) -> Result<SimilarityDataset, FormatError> {
    let name = path.file_stem().map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned());
    parse_sim_dataset(&read_text(path)?, &name, &path.display().to_string())
}

pub fn write_sim_dataset(dataset: &SimilarityDataset) -> String {
    let mut out = format!("#kind={}\n", dataset.kind.as_str());
    for p in dataset.pairs() {
        let _ = writeln!(out, "{}\t{}\t{}", p.w1, p.w2, p.rating);
    }
    out
}

pub fn save_sim_dataset(dataset: &SimilarityDataset, path: &Path) -> Result<(), FormatError> {
    write_text(path, &write_sim_dataset(dataset))
}

fn flag(s: &str) -> Option<bool> {
    match s {
        "0" => Some(false),
        "1" => Some(true),
        _ => None,
    }
}

/// Parse priming trials; the header row must be exactly [`SPP_HEADER`].
pub fn parse_spp(text: &str, source_name: &str) -> Result<Vec<RawPrimingTrial>, FormatError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| FormatError::parse(source_name, 1, e))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != SPP_HEADER {
        return Err(FormatError::parse(source_name, 1, format!("header must be {SPP_HEADER}")));
    }
    let mut trials = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            FormatError::parse(source_name, line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |field: &str, value: &str| FormatError::parse(source_name, line, format!("invalid {field} {value:?}"));
        let f = |i: usize| record.get(i).unwrap_or_default();
        let condition = PrimeCondition::parse(f(3)).ok_or_else(|| bad("condition", f(3)))?;
        let soa = f(4).parse().ok().and_then(Soa::from_millis).ok_or_else(|| bad("soa", f(4)))?;
        let task = Task::parse(f(5)).ok_or_else(|| bad("task", f(5)))?;
        let error = flag(f(7)).ok_or_else(|| bad("error", f(7)))?;
        let missing = flag(f(8)).ok_or_else(|| bad("missing", f(8)))?;
        let rt = match (f(6), missing) {
            ("" | "NA", true) => 0.0,
            (s, _) => s.parse::<f64>().map_err(|_| bad("rt", s))?,
        };
        if f(0).is_empty() || f(1).is_empty() || f(2).is_empty() {
            return Err(FormatError::parse(source_name, line, "empty subject, target or prime"));
        }
        let trial = RawPrimingTrial {
            subject: f(0).to_string(),
            target: f(1).to_string(),
            prime: f(2).to_string(),
            condition,
            soa,
            task,
            rt,
            error,
            missing,
        };
        trial.validate().map_err(|e| FormatError::parse(source_name, line, e))?;
        trials.push(trial);
    }
    Ok(trials)
}

pub fn load_spp(path: &Path) -> Result<Vec<RawPrimingTrial>, FormatError> {
    parse_spp(&read_text(path)?, &path.display().to_string())
}

pub fn write_spp(trials: &[RawPrimingTrial]) -> String {
    let mut out = format!("{SPP_HEADER}\n");
    for t in trials {
        let rt = if t.missing { "NA".to_string() } else { t.rt.to_string() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.subject,
            t.target,
            t.prime,
            t.condition,
            t.soa.millis(),
            t.task.as_str(),
            rt,
            u8::from(t.error),
            u8::from(t.missing)
        );
    }
    out
}

pub fn save_spp(trials: &[RawPrimingTrial], path: &Path) -> Result<(), FormatError> {
    write_text(path, &write_spp(trials))
}

/// Parse `word<TAB>frequency<TAB>documents` rows. An optional first line
/// `#documents=N` gives the corpus document count; otherwise the largest
/// document count is used.
pub fn parse_lexicon(text: &str, source_name: &str) -> Result<Lexicon, FormatError> {
    let mut total = None;
    let mut entries = Vec::new();
    for (line, l) in numbered_lines(text) {
        if line == 1 {
            if let Some(n) = l.strip_prefix("#documents=") {
                total = Some(
                    n.trim()
                        .parse::<u64>()
                        .map_err(|_| FormatError::parse(source_name, line, format!("bad document total {n:?}")))?,
                );
                continue;
            }
        }
        let fields: Vec<&str> = l.split('\t').collect();
        let [word, freq, docs] = fields[..] else {
            return Err(FormatError::parse(source_name, line, format!("expected 3 tab-separated fields, got {}", fields.len())));
        };
        let count = |s: &str| s.trim().parse::<u64>().map_err(|_| FormatError::parse(source_name, line, format!("bad count {s:?}")));
        if word.is_empty() {
            return Err(FormatError::parse(source_name, line, "empty word"));
        }
        entries.push((word.to_string(), count(freq)?, count(docs)?));
    }
    let total = total.unwrap_or_else(|| entries.iter().map(|e| e.2).max().unwrap_or(0));
    Lexicon::new(entries, total).map_err(|e| FormatError::invalid(source_name, e))
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, FormatError> {
    parse_lexicon(&read_text(path)?, &path.display().to_string())
}

pub fn write_lexicon(lexicon: &Lexicon) -> String {
    let mut out = format!("#documents={}\n", lexicon.total_documents);
    for (w, f, d) in lexicon.sorted_entries() {
        let _ = writeln!(out, "{w}\t{f}\t{d}");
    }
    out
}

pub fn save_lexicon(lexicon: &Lexicon, path: &Path) -> Result<(), FormatError> {
    write_text(path, &write_lexicon(lexicon))
}
