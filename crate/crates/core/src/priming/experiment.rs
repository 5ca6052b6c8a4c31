use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::design::{design_matrix, row_similarities, Formula};
use super::preprocess::PrimingTable;
use super::PrimingError;
use crate::embedding::EmbeddingTable;
use crate::stats::{loglik_ratio_test, ols_fit, RegressionResult};

/// Text-based controls to which the target's terms are added as a block.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub name: String,
    pub controls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimingPlan {
    /// Grounded table whose block is tested.
    pub target: String,
    /// Tables fitted one at a time on top of the baseline.
    pub models: Vec<String>,
    pub stacks: Vec<Stack>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AicRow {
    pub model: String,
    pub aic: f64,
    pub delta_target: f64,
    pub delta_baseline: f64,
    /// Similarity main effect and its interactions with task and SOA;
    /// `None` for the baseline.
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub beta_naming: Option<f64>,
    pub p_naming: Option<f64>,
    pub beta_long_soa: Option<f64>,
    pub p_long_soa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlrRow {
    pub stack: String,
    pub llr: f64,
    pub df: usize,
    pub p: f64,
    pub beta_target: f64,
    pub p_target: f64,
    pub beta_target_naming: f64,
    pub beta_target_long_soa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimingReport {
    pub target: String,
    pub n: usize,
    pub aic: Vec<AicRow>,
    pub llr: Vec<LlrRow>,
    /// Every fitted model by name.
    pub fits: BTreeMap<String, RegressionResult>,
}

fn check_name(name: &str) -> Result<(), PrimingError> {
    if name.is_empty() || name.contains(['+', ':']) || name.chars().any(char::is_whitespace) {
        return Err(PrimingError::BadFormula(format!("table name {name:?} cannot be a column name")));
    }
    Ok(())
}

fn fit(
    table: &PrimingTable,
    sims: &BTreeMap<String, Vec<f64>>,
    formula: &Formula,
) -> Result<RegressionResult, PrimingError> {
    let d = design_matrix(table, sims, formula)?;
    Ok(ols_fit(&d.x, &d.y, &d.terms)?)
}

/// Baseline, one model per table, and the stacked likelihood-ratio tests
/// of the target block.
pub fn run_priming_experiment(
    table: &PrimingTable,
    tables: &BTreeMap<String, EmbeddingTable>,
    plan: &PrimingPlan,
) -> Result<PrimingReport, PrimingError> {
    let mut models = plan.models.clone();
    if !models.contains(&plan.target) {
        models.insert(0, plan.target.clone());
    }
    let mut sims: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for name in models.iter().chain(plan.stacks.iter().flat_map(|s| &s.controls)) {
        if sims.contains_key(name) {
            continue;
        }
        check_name(name)?;
        let emb = tables.get(name).ok_or_else(|| PrimingError::UnknownTable(name.clone()))?;
        sims.insert(name.clone(), row_similarities(table, emb, name)?);
    }

    let mut fits = BTreeMap::new();
    let baseline = fit(table, &sims, &Formula::baseline())?;
    fits.insert("baseline".to_string(), baseline.clone());
    for m in &models {
        fits.insert(m.clone(), fit(table, &sims, &Formula::baseline().with_similarity(m))?);
    }
    let target_aic = fits[&plan.target].aic;
    let row = |name: &str, r: &RegressionResult, sim: Option<&str>| {
        let coef = |term: String| r.coefficient(&term);
        let (main, naming, soa) = match sim {
            Some(s) => (coef(s.to_string()), coef(format!("{s}:is_naming")), coef(format!("{s}:is_long_soa"))),
            None => (None, None, None),
        };
        AicRow {
            model: name.to_string(),
            aic: r.aic,
            delta_target: r.aic - target_aic,
            delta_baseline: r.aic - baseline.aic,
            beta: main.map(|c| c.0),
            p: main.map(|c| c.1),
            beta_naming: naming.map(|c| c.0),
            p_naming: naming.map(|c| c.1),
            beta_long_soa: soa.map(|c| c.0),
            p_long_soa: soa.map(|c| c.1),
        }
    };
    let mut aic = vec![row("baseline", &baseline, None)];
    for m in &models {
        aic.push(row(m, &fits[m], Some(m)));
    }

    let mut llr = Vec::new();
    for stack in &plan.stacks {
        let mut reduced_formula = Formula::baseline();
        for c in &stack.controls {
            reduced_formula = reduced_formula.with_similarity(c);
        }
        let full_formula = reduced_formula.clone().with_similarity(&plan.target);
        let reduced = fit(table, &sims, &reduced_formula)?;
        let full = fit(table, &sims, &full_formula)?;
        let test = loglik_ratio_test(&full, &reduced)?;
        let t = &plan.target;
        let (beta_target, p_target) = full.coefficient(t).expect("target term");
        llr.push(LlrRow {
            stack: stack.name.clone(),
            llr: test.llr,
            df: test.df,
            p: test.p,
            beta_target,
            p_target,
            beta_target_naming: full.coefficient(&format!("{t}:is_naming")).expect("term").0,
            beta_target_long_soa: full.coefficient(&format!("{t}:is_long_soa")).expect("term").0,
        });
        fits.insert(format!("{}+{}", stack.name, t), full);
        fits.insert(stack.name.clone(), reduced);
    }
    Ok(PrimingReport {
        target: plan.target.clone(),
        n: table.len(),
        aic,
        llr,
        fits,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

fn opt_p(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6e}"))
}

impl PrimingReport {
    /// Model, AIC, ΔAIC vs the target, ΔAIC vs the baseline, similarity β
    /// and p, followed by the interaction coefficients.
    pub fn aic_tsv(&self) -> String {
        let mut out = String::from("model\tAIC\tdelta_target\tdelta_baseline\tbeta\tp\tbeta_naming\tp_naming\tbeta_long_soa\tp_long_soa\n");
        for r in &self.aic {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.model,
                r.aic,
                r.delta_target,
                r.delta_baseline,
                opt(r.beta),
                opt_p(r.p),
                opt(r.beta_naming),
                opt_p(r.p_naming),
                opt(r.beta_long_soa),
                opt_p(r.p_long_soa)
            );
        }
        out
    }

    /// Stack, LLR, df, p and the target's coefficients in the full model.
    pub fn llr_tsv(&self) -> String {
        let mut out = String::from("model\tLLR\tdf\tp\tbeta_target\tp_target\tbeta_target_naming\tbeta_target_long_soa\n");
        for r in &self.llr {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{}\t{:.6e}\t{:.6}\t{:.6e}\t{:.6}\t{:.6}",
                r.stack, r.llr, r.df, r.p, r.beta_target, r.p_target, r.beta_target_naming, r.beta_target_long_soa
            );
        }
        out
    }
}
