use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vgembed::embedding::{EmbeddingTable, TableMeta};
use vgembed::priming::{
    attach_covariates, design_matrix, lexical_covariates, preprocess_spp, row_similarities, run_priming_experiment,
    Formula, Lexicon, MissingPolicy, PreprocessConfig, PrimingError, PrimingPlan, PrimingTable, Soa, Stack, Task,
    BASE_COLUMNS,
};
use vgembed::world::{generate_world, World, WorldSpec};

/// Full dynamic-programming edit distance.
fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

#[test]
fn neighborhood_matches_brute_force_levenshtein() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // a small alphabet makes one-edit neighbors common
    let letters: Vec<char> = "abcde".chars().collect();
    let word = |rng: &mut ChaCha8Rng, len: usize| -> String { (0..len).map(|_| letters[rng.random_range(0..letters.len())]).collect() };
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    while entries.len() < 1000 {
        let len = rng.random_range(4..=8);
        let w = word(&mut rng, len);
        if seen.insert(w.clone()) {
            entries.push((w, 5, 1));
        }
    }
    let lexicon = Lexicon::new(entries.clone(), 10).unwrap();
    let mut nonzero = 0;
    for _ in 0..50 {
        let probe = word(&mut rng, 6);
        let want = entries.iter().filter(|(w, _, _)| levenshtein(&probe, w) == 1).count();
        assert_eq!(lexicon.neighborhood(&probe), want, "{probe}");
        nonzero += usize::from(want > 0);
    }
    assert!(nonzero > 10);
}

#[test]
fn covariates_follow_definitions() {
    let lex = Lexicon::new(
        ["cat", "bat", "cats", "at", "dog"].iter().map(|w| (w.to_string(), 20, 4)).collect(),
        10,
    )
    .unwrap();
    let cov = lexical_covariates(&["cat".to_string(), "dog".to_string()], &lex).unwrap();
    assert_eq!(cov[0].orth_neighborhood, 3.0);
    assert_eq!(cov[1].length, 3.0);
    assert_eq!(cov[1].log_frequency, 20f64.ln());
    assert_eq!(cov[1].contextual_diversity, 4.0);
}

fn world(visual: f64, seed: u64) -> World {
    let mut spec = WorldSpec {
        seed,
        ..WorldSpec::default()
    };
    spec.rt.visual = visual;
    generate_world(&spec).unwrap()
}

fn concept_words(w: &World) -> HashSet<String> {
    w.concepts.iter().map(|c| c.word.clone()).collect()
}

fn table(w: &World) -> PrimingTable {
    let mut t = preprocess_spp(&w.trials, &concept_words(w), PreprocessConfig::default()).unwrap();
    attach_covariates(&mut t, &w.lexicon, MissingPolicy::Error).unwrap();
    t
}

fn assert_standardized(t: &PrimingTable) {
    let mut cells: BTreeMap<(Soa, Task), Vec<f64>> = BTreeMap::new();
    for r in &t.rows {
        cells.entry((r.soa, r.task)).or_default().push(r.z_log_rt);
    }
    assert_eq!(cells.len(), 4);
    for z in cells.values() {
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10, "mean {mean} sd {sd}");
    }
}

#[test]
fn generated_table_is_standardized_per_cell() {
    let w = world(-0.04, 1);
    let t = table(&w);
    assert_standardized(&t);
    // the one malformed target loses all its rows
    assert_eq!(t.stats.dropped_targets, 1);
    assert_eq!(t.len(), (w.concepts.len() - 1) * 4 * 4);
}

#[test]
fn dropping_uncovered_targets_restandardizes() {
    let w = world(-0.04, 2);
    let mut t = preprocess_spp(&w.trials, &concept_words(&w), PreprocessConfig::default()).unwrap();
    let removed = &w.concepts[5].word;
    let kept: Vec<(String, u64, u64)> = w
        .lexicon
        .sorted_entries()
        .into_iter()
        .filter(|(word, _, _)| word != removed)
        .map(|(word, f, d)| (word.to_string(), f, d))
        .collect();
    let partial = Lexicon::new(kept, w.lexicon.total_documents).unwrap();
    let mut strict = t.clone();
    assert!(matches!(
        attach_covariates(&mut strict, &partial, MissingPolicy::Error),
        Err(PrimingError::MissingFromLexicon(ref ws)) if ws.contains(removed)
    ));
    let before = t.len();
    attach_covariates(&mut t, &partial, MissingPolicy::Drop).unwrap();
    assert!(t.len() < before && t.rows.iter().all(|r| &r.target != removed));
    assert_standardized(&t);
}

/// Vectors whose cosines are the generator's ground truth: one-hot topics
/// for the text component, visual prototypes for the visual component.
fn oracle_tables(w: &World) -> BTreeMap<String, EmbeddingTable> {
    let mut topic = EmbeddingTable::new(w.spec.n_topics, TableMeta::default()).unwrap();
    let mut visual = EmbeddingTable::new(w.spec.feature_dim, TableMeta::default()).unwrap();
    for c in &w.concepts {
        let mut one_hot = vec![0.0; w.spec.n_topics];
        one_hot[c.topic] = 1.0;
        topic.insert(&c.word, &one_hot).unwrap();
        visual.insert(&c.word, &c.prototype).unwrap();
    }
    BTreeMap::from([("topic".to_string(), topic), ("visual".to_string(), visual)])
}

#[test]
fn design_columns_and_interactions() {
    let w = world(-0.04, 3);
    let t = table(&w);
    let tables = oracle_tables(&w);
    let sims = BTreeMap::from([("visual".to_string(), row_similarities(&t, &tables["visual"], "visual").unwrap())]);
    let base = design_matrix(&t, &sims, &Formula::baseline()).unwrap();
    assert_eq!(base.x.cols, 7);
    assert_eq!(base.terms.len(), BASE_COLUMNS.len());
    let full = design_matrix(&t, &sims, &Formula::baseline().with_similarity("visual")).unwrap();
    assert_eq!(full.x.cols, 10);
    let col = |name: &str| full.x.column(full.terms.iter().position(|t| t == name).unwrap());
    let (s, naming, long) = (col("visual"), col("is_naming"), col("is_long_soa"));
    for (i, r) in t.rows.iter().enumerate() {
        assert_eq!(naming[i], f64::from(u8::from(r.task == Task::Naming)));
        assert_eq!(long[i], f64::from(u8::from(r.soa == Soa::Long)));
    }
    let product = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    assert_eq!(col("visual:is_naming"), product(&s, &naming));
    assert_eq!(col("visual:is_long_soa"), product(&s, &long));
    assert!(design_matrix(&t, &sims, &Formula::baseline().with_similarity("missing")).is_err());
}

#[test]
fn visual_similarity_predicts_faster_responses() {
    let w = world(-0.04, 4);
    let t = table(&w);
    let tables = oracle_tables(&w);
    let plan = PrimingPlan {
        target: "visual".into(),
        models: vec!["visual".into(), "topic".into()],
        stacks: vec![Stack {
            name: "topic".into(),
            controls: vec!["topic".into()],
        }],
    };
    let report = run_priming_experiment(&t, &tables, &plan).unwrap();
    let own = report.aic.iter().find(|r| r.model == "visual").unwrap();
    assert_eq!(own.delta_target, 0.0);
    assert!(own.beta.unwrap() < 0.0);
    let llr = &report.llr[0];
    assert_eq!(llr.df, 3);
    assert!(llr.beta_target < 0.0 && llr.p < 1e-3, "{llr:?}");
    let baseline = report.aic.iter().find(|r| r.model == "baseline").unwrap();
    assert!(own.aic < baseline.aic);
}

#[test]
fn collinear_stack_is_rejected() {
    let w = world(-0.04, 5);
    let t = table(&w);
    let mut tables = oracle_tables(&w);
    let copy = tables["visual"].clone();
    tables.insert("twin".into(), copy);
    let plan = PrimingPlan {
        target: "visual".into(),
        models: vec!["visual".into()],
        stacks: vec![Stack {
            name: "twin".into(),
            controls: vec!["twin".into()],
        }],
    };
    let err = run_priming_experiment(&t, &tables, &plan).unwrap_err();
    assert!(err.to_string().contains("collinear"), "{err}");
}
