//! `terrasonic` command-line driver. Every stage reads its inputs from disk
//! and writes its artifacts to its own directory under `--out`.

mod commands;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use terrasonic::pipeline::PipelineConfig;

#[derive(Parser)]
#[command(name = "terrasonic", version, about = "Self-supervised terrain classification from driving sounds")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// key=value configuration file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed (overrides the config file)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Replace existing outputs
    #[arg(long, global = true)]
    force: bool,
    /// Override one configuration key, e.g. --set encoder.epochs=10
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArg {
    /// Bundle root holding train/ (and eval/); defaults to --out
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a world and write the training and evaluation bundles
    Generate,
    /// Encoder inputs (pooled, scaled log spectrograms) for every clip
    Spectrogram(DataArg),
    /// Terrain patches under the path and their visual descriptors
    Features(DataArg),
    /// Sample training triplets from the patch descriptors
    Triplets(DataArg),
    /// Train the audio encoder on the triplets
    TrainEncoder,
    /// Embed every clip and cluster the embeddings
    Cluster,
    /// Label the clips of a (possibly different) bundle with the trained encoder
    Label(DataArg),
    /// Train the segmenter on views weakly labeled with clip clusters
    TrainSeg {
        #[command(flatten)]
        data: DataArg,
        /// Clip labels for --data (default: the cluster stage output)
        #[arg(long, value_name = "CSV")]
        labels: Option<PathBuf>,
        /// Additional bundle to train on (pairs with --extra-labels)
        #[arg(long, value_name = "DIR")]
        extra_data: Vec<PathBuf>,
        /// clip,cluster labels of the matching --extra-data bundle
        #[arg(long, value_name = "CSV")]
        extra_labels: Vec<PathBuf>,
    },
    /// Score clustering and segmentation against the evaluation bundle
    Evaluate(DataArg),
    /// Fuse segmenter predictions of every view into a semantic map
    Map {
        #[command(flatten)]
        data: DataArg,
        /// Side length of a map cell in meters
        #[arg(long, default_value_t = 0.5)]
        cell_m: f64,
    },
    /// Plan uniform-cost and terrain-aware routes over the semantic map
    Plan {
        /// Cost table, one `class_id=cost` per line (default: all 1)
        #[arg(long, value_name = "PATH")]
        costs: Option<PathBuf>,
        /// Start cell as row,col
        #[arg(long, value_parser = parse_cell)]
        start: (usize, usize),
        /// Goal cell as row,col
        #[arg(long, value_parser = parse_cell)]
        goal: (usize, usize),
    },
    /// Sweep one variable over its configured grid and seeds
    Experiment {
        name: Experiment,
        #[command(flatten)]
        data: DataArg,
    },
    /// Run spectrogram through evaluate in sequence
    Pipeline(DataArg),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Snr,
    #[value(alias = "triplet_count")]
    TripletCount,
    Sampling,
    #[value(alias = "correct_ratio")]
    CorrectRatio,
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(',').ok_or("expected row,col")?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((p(r)?, p(c)?))
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("stage {stage} failed")]
    Stage {
        stage: &'static str,
        #[source]
        source: terrasonic::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}

/// Wraps a library error: configuration problems are usage errors, anything
/// else is a failure of `stage`.
pub fn stage(name: &'static str) -> impl Fn(terrasonic::Error) -> CliError {
    move |e| match e {
        terrasonic::Error::Config(msg) => CliError::Usage(format!("{name}: {msg}")),
        source => CliError::Stage { stage: name, source },
    }
}

fn load_config(g: &Global) -> Result<PipelineConfig, CliError> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &g.config {
        if !path.is_file() {
            return Err(CliError::Usage(format!("config file {} not found", path.display())));
        }
        let kv = terrasonic::io::read_kv(path).map_err(|e| CliError::Usage(e.to_string()))?;
        config.apply(&kv).map_err(stage("config"))?;
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    let mut overrides = BTreeMap::new();
    for item in &g.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        overrides.insert(k.trim().to_string(), v.trim().to_string());
    }
    config.apply(&overrides).map_err(stage("config"))?;
    config.validate().map_err(stage("config"))?;
    Ok(config)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli.global)?;
    let ctx = commands::Context::new(cli.global, config);
    match cli.command {
        Command::Generate => ctx.generate(),
        Command::Spectrogram(d) => ctx.spectrogram(&ctx.data(&d)),
        Command::Features(d) => ctx.features(&ctx.data(&d)),
        Command::Triplets(d) => ctx.triplets(&ctx.data(&d)),
        Command::TrainEncoder => ctx.train_encoder(),
        Command::Cluster => ctx.cluster(),
        Command::Label(d) => ctx.label(&ctx.data(&d)),
        Command::TrainSeg {
            data,
            labels,
            extra_data,
            extra_labels,
        } => ctx.train_seg(&ctx.data(&data), labels, &extra_data, &extra_labels),
        Command::Evaluate(d) => ctx.evaluate(&ctx.data(&d)),
        Command::Map { data, cell_m } => ctx.map(&ctx.data(&data), cell_m),
        Command::Plan { costs, start, goal } => ctx.plan(costs.as_deref(), start, goal),
        Command::Experiment { name, data } => ctx.experiment(name, &ctx.data(&data)),
        Command::Pipeline(d) => ctx.pipeline(&ctx.data(&d)),
    }
}

/// `--set` values in command-line order. Clap keeps only one occurrence
/// group of a global flag when it appears on both sides of the subcommand.
fn raw_overrides(args: impl Iterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut args = args.skip(1);
    while let Some(a) = args.next() {
        if a == "--" {
            break;
        } else if a == "--set" {
            out.extend(args.next());
        } else if let Some(v) = a.strip_prefix("--set=") {
            out.push(v.to_string());
        }
    }
    out
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    cli.global.set = raw_overrides(std::env::args());
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code())
        }
    }
}
