//! Acceptance run: one PASS/FAIL line per criterion, then a single assertion
//! that every criterion passed. Lines go straight to stderr so they show even
//! when the harness captures output.

mod common;

use std::collections::HashSet;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::checks::{bh_mismatches, chi2_error, full_loss_grad_error, ols_error, partial_error, pearson_error, primitive_grad_error};
use common::desk::{desk_tables, model_r, vge_llr, vge_partial};
use vgembed::encoder::{recall_at_k, train, TrainConfig};
use vgembed::io::{load_captions, load_lexicon, load_spp, DEFAULT_TRAILING_PUNCTUATION};
use vgembed::priming::{preprocess_spp, PreprocessConfig};
use vgembed::world::{generate_world, WorldSpec};

struct Outcome {
    name: &'static str,
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn line(&self) -> String {
        let tag = match self.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        format!("{tag}\t{}\t{}", self.name, self.detail)
    }
}

fn within(t: Instant, limit: Duration) -> (bool, f64) {
    let secs = t.elapsed().as_secs_f64();
    (secs < limit.as_secs_f64(), secs)
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let err = primitive_grad_error().max(full_loss_grad_error());
    let (fast, secs) = within(t, Duration::from_secs(60));
    Outcome {
        name: "gradient correctness",
        pass: Some(err < 1e-4 && fast),
        detail: format!("max relative error {err:.2e} (< 1e-4), {secs:.1} s (< 60 s)"),
    }
}

fn statistics() -> Outcome {
    let t = Instant::now();
    let ols = ols_error(100, 7);
    let r = pearson_error(100, 11).max(partial_error(100, 5));
    let chi2 = chi2_error();
    let bh = bh_mismatches(1000, 13);
    let (fast, secs) = within(t, Duration::from_secs(120));
    Outcome {
        name: "statistics oracles",
        pass: Some(ols <= 1e-8 && r <= 1e-10 && chi2 <= 1e-8 && bh == 0 && fast),
        detail: format!(
            "ols {ols:.1e} (<= 1e-8), correlations {r:.1e} (<= 1e-10), chi2 {chi2:.1e} (<= 1e-8), bh mismatches {bh}/1000, {secs:.1} s (< 120 s)"
        ),
    }
}

fn training_sanity() -> Outcome {
    let t = Instant::now();
    let spec = WorldSpec {
        n_topics: 4,
        concepts_per_topic: 8,
        n_visual_clusters: 8,
        feature_dim: 2048,
        n_images: 50,
        n_dev_images: 10,
        seed: 1,
        ..WorldSpec::default()
    };
    let world = generate_world(&spec).unwrap();
    let cfg = TrainConfig {
        epochs: 10,
        seed: 1,
        ..TrainConfig::default()
    };
    let (params, log) = train(&world.train, None, &cfg).unwrap();
    let (first, last) = (log.epochs[0].mean_loss, log.epochs.last().unwrap().mean_loss);
    let recall = recall_at_k(&params, &world.train, 10).unwrap().caption_to_image;
    let chance = 10.0 / spec.n_images as f64;
    let (fast, secs) = within(t, Duration::from_secs(300));
    Outcome {
        name: "training sanity",
        pass: Some(last < first && recall >= 5.0 * chance && fast),
        detail: format!(
            "{} captions, {} types; loss {first:.2} -> {last:.2}; recall@10 {recall:.3} (>= {:.3}); {secs:.1} s (< 300 s)",
            world.train.captions.len(),
            world.train.vocab().len() - 2,
            5.0 * chance
        ),
    }
}

/// Ten seeds sharing one trained model between the alternative world and a
/// null world without the visual rating and RT components.
fn central_claims() -> [Outcome; 3] {
    let seeds = 10u64;
    let t = Instant::now();
    let (mut sim_alt, mut sim_null, mut prime_alt, mut prime_null, mut footnote) = (0, 0, 0, 0, 0);
    for seed in 0..seeds {
        let spec = WorldSpec {
            seed,
            ..WorldSpec::default()
        };
        let alt = generate_world(&spec).unwrap();
        let mut null_spec = spec.clone();
        null_spec.rating.visual = 0.0;
        null_spec.rt.visual = 0.0;
        let null = generate_world(&null_spec).unwrap();
        let tables = desk_tables(&alt, seed);

        let (a, n) = (vge_partial(&tables, &alt.similarity), vge_partial(&tables, &null.similarity));
        sim_alt += usize::from(a.significant && a.partial_r > 0.0);
        sim_null += usize::from(n.significant);

        let (a, n) = (vge_llr(&tables, &alt), vge_llr(&tables, &null));
        prime_alt += usize::from(a.p < 0.05 && a.beta_target < 0.0);
        prime_null += usize::from(n.p < 0.05);

        footnote += usize::from(model_r(&tables, &alt.similarity, "vge") > model_r(&tables, &alt.similarity, "input"));
    }
    let (fast, secs) = within(t, Duration::from_secs(30 * 60));
    [
        Outcome {
            name: "central claim, similarity",
            pass: Some(sim_alt >= 9 && sim_null <= 2 && fast),
            detail: format!(
                "alternative {sim_alt}/{seeds} significant and positive (>= 9), null {sim_null}/{seeds} (<= 2), {secs:.0} s for all seeds (< 1800 s)"
            ),
        },
        Outcome {
            name: "central claim, priming",
            pass: Some(prime_alt >= 9 && prime_null <= 2),
            detail: format!("alternative {prime_alt}/{seeds} with p < .05 and negative beta (>= 9), null {prime_null}/{seeds} (<= 2)"),
        },
        Outcome {
            name: "bottleneck beats input layer",
            pass: Some(footnote >= 8),
            detail: format!("VGE r above input-embedding r in {footnote}/{seeds} seeds (>= 8)"),
        },
    ]
}

fn env_path(var: &str) -> Option<PathBuf> {
    std::env::var_os(var).map(PathBuf::from).filter(|p| p.exists())
}

/// Count checks on the real captions and priming data when they are provided.
fn full_scale() -> Outcome {
    let name = "full-scale counts";
    let (Some(captions), Some(spp)) = (env_path("VGEMBED_MSCOCO"), env_path("VGEMBED_SPP")) else {
        return Outcome {
            name,
            pass: None,
            detail: "set VGEMBED_MSCOCO (captions TSV) and VGEMBED_SPP (priming CSV) to run".into(),
        };
    };
    let captions = load_captions(&captions, DEFAULT_TRAILING_PUNCTUATION).unwrap();
    let tokens: usize = captions.iter().map(|c| c.tokens.len()).sum();
    let types: HashSet<&str> = captions.iter().flat_map(|c| c.tokens.iter().map(String::as_str)).collect();
    let vocab: HashSet<String> = types.iter().map(|w| w.to_string()).collect();
    let table = preprocess_spp(&load_spp(&spp).unwrap(), &vocab, PreprocessConfig::default()).unwrap();
    let mut detail = format!("{} types (28415), {tokens} tokens (6184656), {} priming rows (18326)", types.len(), table.len());
    if let Some(lexicon) = env_path("VGEMBED_LEXICON") {
        let lexicon = load_lexicon(&lexicon).unwrap();
        let targets: HashSet<&str> = table.rows.iter().map(|r| r.target.as_str()).collect();
        let covered = targets.iter().filter(|w| lexicon.contains(w)).count();
        detail.push_str(&format!("; lexicon covers {covered}/{} targets", targets.len()));
    }
    Outcome {
        name,
        pass: Some(types.len() == 28_415 && tokens == 6_184_656 && table.len() == 18_326),
        detail,
    }
}

#[test]
fn acceptance() {
    let mut outcomes = vec![gradients(), statistics(), training_sanity()];
    outcomes.extend(central_claims());
    outcomes.push(full_scale());
    let mut err = std::io::stderr().lock();
    for o in &outcomes {
        writeln!(err, "{}", o.line()).unwrap();
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| o.pass == Some(false)).map(|o| o.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
