//! Line-based `key = value` run configuration with `[section]` headers.

use std::fmt::Write as _;

use vgembed::baselines::{FastTextConfig, GloveConfig, SgnsConfig};
use vgembed::encoder::TrainConfig;
use vgembed::io::DEFAULT_TRAILING_PUNCTUATION;
use vgembed::priming::{MissingPolicy, RtOrder, SdKind};
use vgembed::world::WorldSpec;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("config line {line}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOptions {
    /// Also write the trained input-layer embeddings.
    pub input_embeddings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub target: String,
    /// `auto` (every other table alone) or space-separated control sets,
    /// tables within a set joined by `+`.
    pub controls: String,
    pub fdr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimingOptions {
    pub target: String,
    /// `auto` (every other table alone) or space-separated stacks, tables
    /// within a stack joined by `+`.
    pub stacks: String,
    pub sd: SdKind,
    pub order: RtOrder,
    pub missing: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub punctuation: String,
    pub grounded: TrainConfig,
    pub sgns: SgnsConfig,
    pub fasttext: FastTextConfig,
    pub glove: GloveConfig,
    pub extract: ExtractOptions,
    pub eval: EvalOptions,
    pub priming: PrimingOptions,
    pub world: WorldSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            punctuation: DEFAULT_TRAILING_PUNCTUATION.to_string(),
            grounded: TrainConfig::default(),
            sgns: SgnsConfig::default(),
            fasttext: FastTextConfig::default(),
            glove: GloveConfig::default(),
            extract: ExtractOptions { input_embeddings: true },
            eval: EvalOptions {
                target: "vge".into(),
                controls: "auto".into(),
                fdr: 0.05,
            },
            priming: PrimingOptions {
                target: "vge".into(),
                stacks: "auto".into(),
                sd: SdKind::Sample,
                order: RtOrder::AverageThenLog,
                missing: MissingPolicy::Error,
            },
            world: WorldSpec::default(),
        }
    }
}

trait Value: Sized {
    fn show(&self) -> String;
    fn read(s: &str) -> Result<Self, String>;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn show(&self) -> String {
                self.to_string()
            }
            fn read(s: &str) -> Result<Self, String> {
                s.parse().map_err(|_| format!("invalid {} {s:?}", stringify!($t)))
            }
        }
    )*};
}
from_str_value!(usize, u64, u32, bool, String);

impl Value for f64 {
    fn show(&self) -> String {
        // shortest representation that parses back to the same bits
        format!("{self:?}")
    }
    fn read(s: &str) -> Result<Self, String> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid number {s:?}"))
    }
}

impl Value for Option<usize> {
    fn show(&self) -> String {
        self.map_or_else(|| "auto".into(), |v| v.to_string())
    }
    fn read(s: &str) -> Result<Self, String> {
        if s == "auto" {
            Ok(None)
        } else {
            usize::read(s).map(Some)
        }
    }
}

macro_rules! enum_value {
    ($t:ty { $($v:path => $s:literal),* }) => {
        impl Value for $t {
            fn show(&self) -> String {
                match self { $($v => $s.into()),* }
            }
            fn read(s: &str) -> Result<Self, String> {
                match s {
                    $($s => Ok($v),)*
                    _ => Err(format!("invalid value {s:?}, expected one of: {}", [$($s),*].join(", "))),
                }
            }
        }
    };
}
enum_value!(SdKind { SdKind::Sample => "sample", SdKind::Population => "population" });
enum_value!(RtOrder { RtOrder::AverageThenLog => "average_then_log", RtOrder::LogThenAverage => "log_then_average" });
enum_value!(MissingPolicy { MissingPolicy::Error => "error", MissingPolicy::Drop => "drop" });

macro_rules! config_fields {
    ($($section:literal $key:literal => $($field:ident).+;)*) => {
        const KEYS: &[(&str, &str)] = &[$(($section, $key)),*];

        impl RunConfig {
            fn get(&self, section: &str, key: &str) -> Option<String> {
                match (section, key) {
                    $(($section, $key) => Some(self.$($field).+.show()),)*
                    _ => None,
                }
            }

            fn set(&mut self, section: &str, key: &str, value: &str) -> Option<Result<(), String>> {
                match (section, key) {
                    $(($section, $key) => Some(Value::read(value).map(|v| self.$($field).+ = v)),)*
                    _ => None,
                }
            }
        }
    };
}

config_fields! {
    "run" "seed" => seed;
    "run" "punctuation" => punctuation;
    "grounded" "embed" => grounded.dims.embed;
    "grounded" "hidden1" => grounded.dims.hidden1;
    "grounded" "hidden2" => grounded.dims.hidden2;
    "grounded" "attention" => grounded.dims.attention;
    "grounded" "feature" => grounded.dims.feature;
    "grounded" "epochs" => grounded.epochs;
    "grounded" "batch_size" => grounded.batch_size;
    "grounded" "margin" => grounded.margin;
    "grounded" "lr_max" => grounded.lr_max;
    "grounded" "lr_min" => grounded.lr_min;
    "grounded" "cycle_steps" => grounded.cycle_steps;
    "grounded" "recall_k" => grounded.recall_k;
    "grounded" "adam_beta1" => grounded.adam.beta1;
    "grounded" "adam_beta2" => grounded.adam.beta2;
    "grounded" "adam_eps" => grounded.adam.eps;
    "sgns" "dim" => sgns.dim;
    "sgns" "window" => sgns.window;
    "sgns" "negatives" => sgns.negatives;
    "sgns" "epochs" => sgns.epochs;
    "sgns" "lr" => sgns.lr;
    "sgns" "subsample" => sgns.subsample;
    "sgns" "min_count" => sgns.min_count;
    "fasttext" "dim" => fasttext.sgns.dim;
    "fasttext" "window" => fasttext.sgns.window;
    "fasttext" "negatives" => fasttext.sgns.negatives;
    "fasttext" "epochs" => fasttext.sgns.epochs;
    "fasttext" "lr" => fasttext.sgns.lr;
    "fasttext" "subsample" => fasttext.sgns.subsample;
    "fasttext" "min_count" => fasttext.sgns.min_count;
    "fasttext" "min_n" => fasttext.min_n;
    "fasttext" "max_n" => fasttext.max_n;
    "fasttext" "buckets" => fasttext.buckets;
    "glove" "dim" => glove.dim;
    "glove" "window" => glove.window;
    "glove" "x_max" => glove.x_max;
    "glove" "alpha" => glove.alpha;
    "glove" "epochs" => glove.epochs;
    "glove" "lr" => glove.lr;
    "extract" "input_embeddings" => extract.input_embeddings;
    "eval" "target" => eval.target;
    "eval" "controls" => eval.controls;
    "eval" "fdr" => eval.fdr;
    "priming" "target" => priming.target;
    "priming" "stacks" => priming.stacks;
    "priming" "sd" => priming.sd;
    "priming" "order" => priming.order;
    "priming" "missing" => priming.missing;
    "world" "n_topics" => world.n_topics;
    "world" "concepts_per_topic" => world.concepts_per_topic;
    "world" "n_visual_clusters" => world.n_visual_clusters;
    "world" "feature_dim" => world.feature_dim;
    "world" "n_images" => world.n_images;
    "world" "n_dev_images" => world.n_dev_images;
    "world" "captions_per_image" => world.captions_per_image;
    "world" "min_concepts_per_image" => world.min_concepts_per_image;
    "world" "max_concepts_per_image" => world.max_concepts_per_image;
    "world" "mention_prob" => world.mention_prob;
    "world" "n_function_words" => world.n_function_words;
    "world" "min_function_words" => world.min_function_words;
    "world" "max_function_words" => world.max_function_words;
    "world" "cluster_spread" => world.cluster_spread;
    "world" "feature_noise" => world.feature_noise;
    "world" "rating_text" => world.rating.text;
    "world" "rating_visual" => world.rating.visual;
    "world" "rating_noise_sd" => world.rating.noise_sd;
    "world" "n_rating_pairs" => world.n_rating_pairs;
    "world" "rt_base" => world.rt.base;
    "world" "rt_text" => world.rt.text;
    "world" "rt_visual" => world.rt.visual;
    "world" "rt_long_soa" => world.rt.long_soa;
    "world" "rt_naming" => world.rt.naming;
    "world" "rt_length" => world.rt.length;
    "world" "rt_log_frequency" => world.rt.log_frequency;
    "world" "rt_subject_sd" => world.rt.subject_sd;
    "world" "rt_noise_sd" => world.rt.noise_sd;
    "world" "rt_error_rate" => world.rt.error_rate;
    "world" "rt_missing_rate" => world.rt.missing_rate;
    "world" "n_subjects" => world.n_subjects;
    "world" "n_lexicon_fillers" => world.n_lexicon_fillers;
    "world" "malformed_targets" => world.malformed_targets;
}

impl RunConfig {
    /// Defaults overridden by the entries of `text`. Blank lines and lines
    /// starting with `#` are ignored; unknown sections and keys, repeated
    /// keys and malformed values are errors.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| ConfigError { line, msg };
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some(sec) = section.as_deref() else {
                return Err(err("entry before any [section]".into()));
            };
            let (key, value) = l.split_once('=').ok_or_else(|| err(format!("expected key = value, got {l:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match cfg.set(sec, key, value) {
                None => return Err(err(format!("unknown key {sec}.{key}"))),
                Some(Err(m)) => return Err(err(format!("{sec}.{key}: {m}"))),
                Some(Ok(())) => {}
            }
            if !seen.insert((sec.to_string(), key.to_string())) {
                return Err(err(format!("repeated key {sec}.{key}")));
            }
        }
        Ok(cfg)
    }

    /// Every key, grouped by section, in a fixed order.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key) in KEYS {
            if *section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let value = self.get(section, key).expect("listed key");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Copy the run seed into every seeded module config.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.grounded.seed = seed;
        self.sgns.seed = seed;
        self.fasttext.sgns.seed = seed;
        self.glove.seed = seed;
        self.world.seed = seed;
    }
}
