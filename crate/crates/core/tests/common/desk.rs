//! Desk-scale pipeline shared by the world and acceptance tests: train the
//! grounded model and SGNS on a synthetic world, then run both evaluations.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use vgembed::baselines::{train_sgns, SgnsConfig};
use vgembed::embedding::EmbeddingTable;
use vgembed::encoder::{train, ModelDims, TrainConfig};
use vgembed::priming::{
    attach_covariates, preprocess_spp, run_priming_experiment, LlrRow, MissingPolicy, PreprocessConfig, PrimingPlan,
    Stack,
};
use vgembed::similarity::{run_similarity_experiment, ControlPlan, ControlSet, PartialStats, SimilarityDataset};
use vgembed::vge::{extract_input_embeddings, extract_vges};
use vgembed::world::World;

/// Reduced layer sizes that keep ten seeds within minutes.
pub const DESK_DIMS: ModelDims = ModelDims {
    embed: 32,
    hidden1: 64,
    hidden2: 32,
    attention: 16,
    feature: 64,
};

pub fn desk_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        dims: DESK_DIMS,
        epochs: 10,
        lr_max: 2e-3,
        seed,
        ..TrainConfig::default()
    }
}

pub fn desk_sgns_config(seed: u64) -> SgnsConfig {
    SgnsConfig {
        dim: 50,
        epochs: 20,
        subsample: 0.0,
        seed,
        ..SgnsConfig::default()
    }
}

/// Tables named `vge`, `input` and `sgns`.
pub fn desk_tables(world: &World, seed: u64) -> BTreeMap<String, EmbeddingTable> {
    assert_eq!(world.spec.feature_dim, DESK_DIMS.feature);
    let (params, _) = train(&world.train, None, &desk_train_config(seed)).unwrap();
    let vge = extract_vges(&params, &world.train, "synthetic").unwrap().table;
    let input = extract_input_embeddings(&params, "synthetic").unwrap();
    let sgns = train_sgns(&world.train.sentences(), &desk_sgns_config(seed)).unwrap();
    BTreeMap::from([("vge".into(), vge), ("input".into(), input), ("sgns".into(), sgns)])
}

/// VGE partial correlation with the ratings over the SGNS control.
pub fn vge_partial(tables: &BTreeMap<String, EmbeddingTable>, dataset: &SimilarityDataset) -> PartialStats {
    let plan = ControlPlan {
        target: "vge".into(),
        controls: vec![ControlSet {
            name: "sgns".into(),
            tables: vec!["sgns".into()],
        }],
        fdr: 0.05,
    };
    let report = run_similarity_experiment(tables, std::slice::from_ref(dataset), &plan).unwrap();
    report.partial(&dataset.name, "sgns").unwrap().outcome.clone().unwrap()
}

/// Plain Pearson r of a table with the ratings.
pub fn model_r(tables: &BTreeMap<String, EmbeddingTable>, dataset: &SimilarityDataset, model: &str) -> f64 {
    let plan = ControlPlan {
        target: "vge".into(),
        controls: vec![],
        fdr: 0.05,
    };
    let report = run_similarity_experiment(tables, std::slice::from_ref(dataset), &plan).unwrap();
    report.model(&dataset.name, model).unwrap().r
}

/// Likelihood-ratio test of the VGE block stacked on the SGNS model.
pub fn vge_llr(tables: &BTreeMap<String, EmbeddingTable>, world: &World) -> LlrRow {
    let covered: HashSet<String> = tables["vge"]
        .words()
        .iter()
        .filter(|w| tables["sgns"].contains(w))
        .cloned()
        .collect();
    let mut table = preprocess_spp(&world.trials, &covered, PreprocessConfig::default()).unwrap();
    attach_covariates(&mut table, &world.lexicon, MissingPolicy::Error).unwrap();
    let plan = PrimingPlan {
        target: "vge".into(),
        models: vec!["vge".into(), "sgns".into()],
        stacks: vec![Stack {
            name: "sgns".into(),
            controls: vec!["sgns".into()],
        }],
    };
    let report = run_priming_experiment(&table, tables, &plan).unwrap();
    report.llr.into_iter().next().unwrap()
}
