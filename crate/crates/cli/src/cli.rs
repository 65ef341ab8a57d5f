//! Command-line surface: argument definitions and subcommand bodies.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vr_rating::api::ApiError;
use vr_rating::colab::{load_labels, write_labels, DEFAULT_MIN_SUPPORT};
use vr_rating::ordinal::BaseLearner;
use vr_rating::{
    label_dataset, load_properties, split_dataset, train_ordinal, tune_thresholds, write_properties, FeatureSchema,
    GbtConfig, LogisticConfig, OrdinalModel, RatingClass, StayTable, SynthConfig,
};

use crate::batch;
use crate::server::{self, AppState};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] vr_rating::Error),
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "vrrate", version, about = "Explainable quality ratings for vacation rentals")]
pub struct Cli {
    /// Seed for generation, splitting and training.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Never changes any output.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    pub log_level: log::LevelFilter,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus: schema, properties, stays and true classes.
    Synth(SynthArgs),
    /// Transfer hotel stars to vacation rentals through guest co-stays.
    Label(LabelArgs),
    /// Train an ordinal model.
    Train(TrainArgs),
    /// Rate every property.
    Predict(BatchArgs),
    /// Explain every property's rating.
    Explain(ExplainArgs),
    /// Rank missing facilities for every property.
    Suggest(BatchArgs),
    /// Score predictions against known classes.
    Evaluate(EvaluateArgs),
    /// Serve rate/explain/suggest/what-if over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory receiving schema.json, properties.jsonl, stays.csv and truth.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub n_properties: usize,
    #[arg(long, default_value_t = 0.5)]
    pub hotel_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    pub underreport_rate: f64,
    #[arg(long, default_value_t = 5_000)]
    pub n_guests: usize,
    #[arg(long, default_value_t = 8)]
    pub stays_per_guest: usize,
    #[arg(long, default_value_t = 0.1)]
    pub guest_noise: f64,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub properties: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub stays: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum total co-stay weight for a label.
    #[arg(long, default_value_t = DEFAULT_MIN_SUPPORT)]
    pub min_support: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Base {
    Gbt,
    Logistic,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub properties: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Collaborative labels; without them the model trains on official stars.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Base::Gbt)]
    pub base: Base,
    /// Train the boosted trees without monotone constraints.
    #[arg(long)]
    pub no_monotone: bool,
    /// Hold out part of the labels and tune the four thresholds on it.
    #[arg(long)]
    pub tune_thresholds: bool,
    /// Share of labels used for fitting when tuning thresholds.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 100)]
    pub n_rounds: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub l2_lambda: f64,
    #[arg(long, default_value_t = 256)]
    pub n_bins: usize,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub properties: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub batch: BatchArgs,
    /// Keep every nonzero attribution instead of the top 5 positive and 3 negative.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub preds: PathBuf,
    /// Lines with "id" and "label" or "stars".
    #[arg(long)]
    pub truth: PathBuf,
    /// Where to write report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// The PORT environment variable overrides the port.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Serve(args) => serve(args),
        command => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.threads)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
            pool.install(|| run_batch(command, seed))
        }
    }
}

fn run_batch(command: Command, seed: u64) -> Result<(), CliError> {
    match command {
        Command::Synth(args) => synth(args, seed),
        Command::Label(args) => label(args),
        Command::Train(args) => train(args, seed),
        Command::Predict(args) => {
            let (model, ds) = model_and_properties(&args)?;
            batch::write_jsonl(&args.out, &batch::predict(&model, &ds)?)?;
            Ok(())
        }
        Command::Explain(args) => {
            let (model, ds) = model_and_properties(&args.batch)?;
            batch::write_jsonl(&args.batch.out, &batch::explain(&model, &ds, args.full)?)?;
            Ok(())
        }
        Command::Suggest(args) => {
            let (model, ds) = model_and_properties(&args)?;
            batch::write_jsonl(&args.out, &batch::suggest(&model, &ds)?)?;
            Ok(())
        }
        Command::Evaluate(args) => evaluate(args),
        Command::Serve(_) => unreachable!("handled by run"),
    }
}

fn model_and_properties(args: &BatchArgs) -> Result<(OrdinalModel, vr_rating::Dataset), CliError> {
    let model = OrdinalModel::load(&args.model)?;
    let ds = load_properties(&args.properties, &model.schema)?;
    Ok((model, ds))
}

fn synth(args: SynthArgs, seed: u64) -> Result<(), CliError> {
    let cfg = SynthConfig {
        n_properties: args.n_properties,
        hotel_fraction: args.hotel_fraction,
        underreport_rate: args.underreport_rate,
        n_guests: args.n_guests,
        stays_per_guest: args.stays_per_guest,
        guest_noise: args.guest_noise,
        seed,
        ..SynthConfig::default()
    };
    let out = vr_rating::generate_synthetic(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    out.dataset.schema.save(args.out_dir.join("schema.json"))?;
    write_properties(args.out_dir.join("properties.jsonl"), &out.dataset)?;
    out.stays.save(args.out_dir.join("stays.csv"))?;
    let truth: Vec<serde_json::Value> = out
        .dataset
        .records
        .iter()
        .zip(&out.ground_truth)
        .map(|(r, z)| serde_json::json!({ "id": r.id, "label": z }))
        .collect();
    batch::write_jsonl(args.out_dir.join("truth.jsonl"), &truth)?;
    println!("wrote {} properties and {} stays to {}", out.dataset.len(), out.stays.len(), args.out_dir.display());
    Ok(())
}

fn label(args: LabelArgs) -> Result<(), CliError> {
    let schema = FeatureSchema::load(&args.schema)?;
    let ds = load_properties(&args.properties, &schema)?;
    let stays = StayTable::load(&args.stays)?;
    let outcome = label_dataset(&ds, &stays, args.min_support)?;
    write_labels(&args.out, &outcome)?;
    println!("labeled {} vacation rentals, coverage {:.4}", outcome.labeled.len(), outcome.coverage);
    Ok(())
}

fn base_learner(args: &TrainArgs, seed: u64) -> Result<BaseLearner, CliError> {
    Ok(match args.base {
        Base::Gbt => {
            let cfg = GbtConfig {
                n_rounds: args.n_rounds,
                learning_rate: args.learning_rate,
                max_depth: args.max_depth,
                min_child_weight: args.min_child_weight,
                l2_lambda: args.l2_lambda,
                n_bins: args.n_bins,
                seed,
                monotone: !args.no_monotone,
            };
            cfg.validate()?;
            BaseLearner::Gbt(cfg)
        }
        Base::Logistic => BaseLearner::Logistic(LogisticConfig { seed, ..LogisticConfig::default() }),
    })
}

fn train(args: TrainArgs, seed: u64) -> Result<(), CliError> {
    let schema = FeatureSchema::load(&args.schema)?;
    let ds = load_properties(&args.properties, &schema)?;
    let labeled = match &args.labels {
        Some(path) => {
            let labels: HashMap<String, RatingClass> =
                load_labels(path)?.into_iter().map(|l| (l.id, l.label)).collect();
            ds.attach_labels(&labels)
        }
        None => ds.star_labeled(),
    };
    if labeled.is_empty() {
        return Err(CliError::Usage("no labeled properties to train on".into()));
    }
    let base = base_learner(&args, seed)?;
    let model = if args.tune_thresholds {
        let (fit, validation) = split_dataset(&labeled, args.train_fraction, seed)?;
        let model = train_ordinal(&fit, &base)?;
        tune_thresholds(&model, &validation)?
    } else {
        train_ordinal(&labeled, &base)?
    };
    model.save(&args.out)?;
    println!("trained on {} properties, thresholds {:?}", labeled.len(), model.thresholds);
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let preds = batch::read_predictions(&args.preds)?;
    let truth = batch::read_truth(&args.truth)?;
    let report = batch::evaluate(&preds, &truth)?;
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    print!("{}", report.render());
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value).map_err(vr_rating::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let bind = server::resolve_bind(args.bind, std::env::var("PORT").ok().as_deref()).map_err(CliError::Usage)?;
    let state = Arc::new(AppState::load(args.model)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(server::serve(state, bind))?;
    Ok(())
}
