//! Command-line pipeline: world generation, training, extraction and
//! evaluation, each writing its outputs and a manifest under `--out`.

pub mod config;
pub mod manifest;

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use vgembed::baselines::{build_cooccurrence, train_fasttext, train_glove, train_sgns};
use vgembed::corpus::{ImageFeatureStore, PairedCorpus};
use vgembed::embedding::EmbeddingTable;
use vgembed::encoder::{load_checkpoint, save_checkpoint, train};
use vgembed::io;
use vgembed::priming::{attach_covariates, preprocess_spp, run_priming_experiment, PreprocessConfig, PrimingPlan, Stack};
use vgembed::similarity::{run_similarity_experiment, ControlPlan, ControlSet, EvalReport};
use vgembed::vge::{extract_input_embeddings, extract_vges};
use vgembed::world::generate_world;

pub use config::RunConfig;
use manifest::{Manifest, CONFIG_FILE};

#[derive(Parser, Debug)]
#[command(name = "vgembed", about = "Visually grounded word embeddings pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stage; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic grounded world in the ingestion formats.
    GenWorld,
    /// Train the caption-to-image retrieval model.
    TrainGrounded {
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long, requires = "dev_features")]
        dev_captions: Option<PathBuf>,
        #[arg(long, requires = "dev_captions")]
        dev_features: Option<PathBuf>,
    },
    /// Train a text-only baseline on the caption text.
    TrainText {
        #[arg(value_enum)]
        method: TextMethod,
        #[arg(long)]
        captions: PathBuf,
    },
    /// Extract visually grounded embeddings from a trained model.
    ExtractVge {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        captions: PathBuf,
    },
    /// Word-similarity evaluation with partial correlations.
    EvalSim(SimInputs),
    /// Semantic-priming regressions.
    EvalPriming(PrimingInputs),
    /// Both evaluations plus a long-format CSV and a summary.
    Report {
        #[command(flatten)]
        sim: SimInputs,
        #[arg(long, requires = "lexicon")]
        spp: Option<PathBuf>,
        #[arg(long, requires = "spp")]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TextMethod {
    Sgns,
    Fasttext,
    Glove,
}

impl TextMethod {
    fn name(self) -> &'static str {
        match self {
            TextMethod::Sgns => "sgns",
            TextMethod::Fasttext => "fasttext",
            TextMethod::Glove => "glove",
        }
    }
}

#[derive(Args, Debug)]
struct SimInputs {
    /// Embedding table as NAME=PATH; repeatable.
    #[arg(long = "table", required = true, value_parser = parse_named)]
    tables: Vec<(String, PathBuf)>,
    /// Similarity dataset TSV; repeatable.
    #[arg(long = "dataset", required = true)]
    datasets: Vec<PathBuf>,
}

#[derive(Args, Debug)]
struct PrimingInputs {
    #[arg(long = "table", required = true, value_parser = parse_named)]
    tables: Vec<(String, PathBuf)>,
    #[arg(long)]
    spp: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

type Failure = Box<dyn std::error::Error>;

/// Run the command line `argv` (program name first) and return the process
/// exit code: 0 on success, 2 on usage errors, 1 on any other failure.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let name = command_name(&cli.command);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{name}\t{msg}");
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::GenWorld => "gen-world",
        Command::TrainGrounded { .. } => "train-grounded",
        Command::TrainText { .. } => "train-text",
        Command::ExtractVge { .. } => "extract-vge",
        Command::EvalSim(_) => "eval-sim",
        Command::EvalPriming(_) => "eval-priming",
        Command::Report { .. } => "report",
    }
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    manifest: Manifest,
}

impl Ctx {
    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.output(name);
        self.out.join(name)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))?;
        Ok(())
    }

    fn input(&mut self, path: &Path) -> PathBuf {
        self.manifest.input(path);
        path.to_path_buf()
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            RunConfig::parse(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => RunConfig::default(),
    };
    cfg.apply_seed(cli.common.seed.unwrap_or(cfg.seed));
    std::fs::create_dir_all(&cli.common.out).map_err(|e| format!("{}: {e}", cli.common.out.display()))?;
    let config_text = cfg.serialize();
    let manifest = Manifest::new(command_name(&cli.command), cfg.seed, &config_text);
    let mut ctx = Ctx {
        cfg,
        out: cli.common.out.clone(),
        manifest,
    };
    if let Some(p) = &cli.common.config {
        ctx.input(p);
    }
    std::fs::write(ctx.out.join(CONFIG_FILE), &config_text)?;

    match cli.command {
        Command::GenWorld => gen_world(&mut ctx)?,
        Command::TrainGrounded {
            captions,
            features,
            dev_captions,
            dev_features,
        } => {
            let dev = dev_captions.zip(dev_features);
            train_grounded(&mut ctx, &captions, &features, dev)?
        }
        Command::TrainText { method, captions } => train_text(&mut ctx, method, &captions)?,
        Command::ExtractVge { model, captions } => extract(&mut ctx, &model, &captions)?,
        Command::EvalSim(inputs) => {
            eval_sim(&mut ctx, &inputs)?;
        }
        Command::EvalPriming(inputs) => {
            eval_priming(&mut ctx, &inputs.tables, &inputs.spp, &inputs.lexicon)?;
        }
        Command::Report { sim, spp, lexicon } => {
            let report = eval_sim(&mut ctx, &sim)?;
            let mut summary = String::from("# Evaluation summary\n\n## Word similarity\n\n");
            summary.push_str(&similarity_summary(&report));
            if let (Some(spp), Some(lexicon)) = (spp, lexicon) {
                let llr = eval_priming(&mut ctx, &sim.tables, &spp, &lexicon)?;
                summary.push_str("\n## Semantic priming\n\n");
                summary.push_str(&llr);
            }
            ctx.write("report.md", &summary)?;
        }
    }
    ctx.manifest.write(&ctx.out)?;
    Ok(())
}

fn gen_world(ctx: &mut Ctx) -> Result<(), Failure> {
    let world = generate_world(&ctx.cfg.world)?;
    io::save_captions(&world.train.captions, &ctx.path("train.tsv"))?;
    io::save_image_features(&world.train.features, &ctx.path("train.features.tsv"))?;
    io::save_captions(&world.dev.captions, &ctx.path("dev.tsv"))?;
    io::save_image_features(&world.dev.features, &ctx.path("dev.features.tsv"))?;
    io::save_sim_dataset(&world.similarity, &ctx.path("synthetic.tsv"))?;
    io::save_spp(&world.trials, &ctx.path("spp.csv"))?;
    io::save_lexicon(&world.lexicon, &ctx.path("lexicon.tsv"))?;
    Ok(())
}

fn train_grounded(
    ctx: &mut Ctx,
    captions: &Path,
    features: &Path,
    dev: Option<(PathBuf, PathBuf)>,
) -> Result<(), Failure> {
    let punct = ctx.cfg.punctuation.clone();
    let corpus = io::load_corpus(&ctx.input(captions), &ctx.input(features), &punct)?;
    let dev = match dev {
        Some((c, f)) => Some(io::load_corpus(&ctx.input(&c), &ctx.input(&f), &punct)?),
        None => None,
    };
    let (params, log) = train(&corpus, dev.as_ref(), &ctx.cfg.grounded)?;
    save_checkpoint(&params, &ctx.path("model.ckpt"))?;
    let mut tsv = String::from("epoch\tmean_loss\trecall_caption_to_image\trecall_image_to_caption\n");
    for e in &log.epochs {
        let (c2i, i2c) = e
            .recall
            .as_ref()
            .map_or(("NA".into(), "NA".into()), |r| (r.caption_to_image.to_string(), r.image_to_caption.to_string()));
        let _ = writeln!(tsv, "{}\t{}\t{c2i}\t{i2c}", e.epoch, e.mean_loss);
    }
    ctx.write("train_log.tsv", &tsv)
}

fn train_text(ctx: &mut Ctx, method: TextMethod, captions: &Path) -> Result<(), Failure> {
    let punct = ctx.cfg.punctuation.clone();
    let sentences: Vec<Vec<String>> = io::load_captions(&ctx.input(captions), &punct)?
        .into_iter()
        .map(|c| c.tokens)
        .collect();
    let table = match method {
        TextMethod::Sgns => train_sgns(&sentences, &ctx.cfg.sgns)?,
        TextMethod::Fasttext => train_fasttext(&sentences, &ctx.cfg.fasttext)?,
        TextMethod::Glove => {
            let counts = build_cooccurrence(&sentences, ctx.cfg.glove.window)?;
            let run = train_glove(&counts, &ctx.cfg.glove)?;
            let loss: String = run.loss_history.iter().enumerate().map(|(i, l)| format!("{}\t{l}\n", i + 1)).collect();
            ctx.write("glove_loss.tsv", &format!("epoch\tloss\n{loss}"))?;
            run.table
        }
    };
    io::save_vectors(&table, &ctx.path(&format!("{}.vec", method.name())))?;
    Ok(())
}

fn extract(ctx: &mut Ctx, model: &Path, captions: &Path) -> Result<(), Failure> {
    let params = load_checkpoint(&ctx.input(model))?;
    let punct = ctx.cfg.punctuation.clone();
    let caps = io::load_captions(&ctx.input(captions), &punct)?;
    // extraction reads captions only
    let corpus = PairedCorpus::new(caps, ImageFeatureStore::new(params.dims.feature));
    let corpus_id = captions.display().to_string();
    let extraction = extract_vges(&params, &corpus, &corpus_id)?;
    io::save_vectors(&extraction.table, &ctx.path("vge.vec"))?;
    if !extraction.excluded.is_empty() {
        ctx.write("vge_excluded.txt", &(extraction.excluded.join("\n") + "\n"))?;
    }
    if ctx.cfg.extract.input_embeddings {
        let table = extract_input_embeddings(&params, &corpus_id)?;
        io::save_vectors(&table, &ctx.path("input.vec"))?;
    }
    Ok(())
}

fn load_tables(ctx: &mut Ctx, tables: &[(String, PathBuf)]) -> Result<BTreeMap<String, EmbeddingTable>, Failure> {
    let mut out = BTreeMap::new();
    for (name, path) in tables {
        let t = io::load_vectors(&ctx.input(path), None)?;
        if out.insert(name.clone(), t).is_some() {
            return Err(format!("table name {name:?} given twice").into());
        }
    }
    Ok(out)
}

/// `auto` pairs the target with each other table alone; otherwise
/// space-separated sets of `+`-joined table names.
fn control_sets(spec: &str, target: &str, tables: &BTreeMap<String, EmbeddingTable>) -> Vec<Vec<String>> {
    if spec == "auto" {
        tables.keys().filter(|k| *k != target).map(|k| vec![k.clone()]).collect()
    } else {
        spec.split_whitespace()
            .map(|s| s.split('+').map(String::from).collect())
            .collect()
    }
}

fn eval_sim(ctx: &mut Ctx, inputs: &SimInputs) -> Result<EvalReport, Failure> {
    let tables = load_tables(ctx, &inputs.tables)?;
    let mut datasets = Vec::new();
    for p in &inputs.datasets {
        datasets.push(io::load_sim_dataset(&ctx.input(p))?);
    }
    let e = &ctx.cfg.eval;
    let plan = ControlPlan {
        target: e.target.clone(),
        controls: control_sets(&e.controls, &e.target, &tables)
            .into_iter()
            .map(|tables| ControlSet {
                name: tables.join("+"),
                tables,
            })
            .collect(),
        fdr: e.fdr,
    };
    let report = run_similarity_experiment(&tables, &datasets, &plan)?;
    ctx.write("sim_models.tsv", &report.models_tsv())?;
    ctx.write("sim_partials.tsv", &report.partials_tsv())?;
    ctx.write("sim_long.csv", &report.long_csv())?;
    Ok(report)
}

fn eval_priming(ctx: &mut Ctx, table_args: &[(String, PathBuf)], spp: &Path, lexicon: &Path) -> Result<String, Failure> {
    let tables = load_tables(ctx, table_args)?;
    let trials = io::load_spp(&ctx.input(spp))?;
    let lex = io::load_lexicon(&ctx.input(lexicon))?;
    let mut covered: Option<HashSet<String>> = None;
    for t in tables.values() {
        let words: HashSet<String> = t.words().iter().cloned().collect();
        covered = Some(match covered {
            None => words,
            Some(c) => c.intersection(&words).cloned().collect(),
        });
    }
    let p = &ctx.cfg.priming;
    let pre = PreprocessConfig {
        sd: p.sd,
        order: p.order,
    };
    let mut table = preprocess_spp(&trials, &covered.unwrap_or_default(), pre)?;
    attach_covariates(&mut table, &lex, p.missing)?;
    let plan = PrimingPlan {
        target: p.target.clone(),
        models: tables.keys().cloned().collect(),
        stacks: control_sets(&p.stacks, &p.target, &tables)
            .into_iter()
            .map(|controls| Stack {
                name: controls.join("+"),
                controls,
            })
            .collect(),
    };
    let report = run_priming_experiment(&table, &tables, &plan)?;
    let s = &table.stats;
    let counts = format!(
        "raw_trials\t{}\ndropped_targets\t{}\ndropped_trials\t{}\naveraged_rows\t{}\ndropped_oov\t{}\nrows\t{}\n",
        s.raw_trials, s.dropped_targets, s.dropped_trials, s.averaged_rows, s.dropped_oov, s.rows
    );
    ctx.write("priming_counts.tsv", &counts)?;
    ctx.write("priming_aic.tsv", &report.aic_tsv())?;
    let llr = report.llr_tsv();
    ctx.write("priming_llr.tsv", &llr)?;
    Ok(format!("Rows: {}\n\n```\n{}```\n", table.len(), llr))
}

fn similarity_summary(report: &EvalReport) -> String {
    format!("```\n{}```\n\n```\n{}```\n", report.models_tsv(), report.partials_tsv())
}
