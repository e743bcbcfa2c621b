//! `blockage` — end-to-end pipeline for estimating culvert hydraulic
//! blockage from images: synthesize data, extract deep features, train the
//! regressor, evaluate it, predict on single images, and profile latency.
//!
//! Exit codes: 0 success, 2 usage/config, 3 data/validation, 4 numeric,
//! 5 I/O. Logs go to standard error; results go to files and standard
//! output only.

mod commands;
mod config;

use std::path::PathBuf;

use blockage_core::mlp::TrainConfig;
use blockage_core::profiler::Aggregation;
use blockage_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

use commands::{ExtractorArgs, PresetChoice};
use config::{need, pick, PipelineConfig};

#[derive(Parser)]
#[command(name = "blockage", version, about = "Visual estimation of culvert hydraulic blockage")]
struct Cli {
    /// JSON config file supplying defaults for any flag; explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

/// Extractor flags shared by every command that touches images.
#[derive(Args)]
struct ExtractorFlags {
    /// Feature extractor: toy, mobilenet, resnet50, or efficientnetb3
    #[arg(long)]
    extractor: Option<String>,

    /// ONNX model file (required for real backbones, rejected for toy)
    #[arg(long, value_name = "FILE")]
    model_path: Option<PathBuf>,

    /// Toy extractor output width (toy only; default 3136)
    #[arg(long, value_name = "N")]
    toy_dim: Option<usize>,
}

impl ExtractorFlags {
    fn resolve(self, cfg: &PipelineConfig) -> Result<ExtractorArgs> {
        let kind = need("extractor", self.extractor, cfg.extractor.clone())?;
        Ok(ExtractorArgs {
            kind: kind.parse()?,
            model_path: self.model_path.or_else(|| cfg.model_path.clone()),
            toy_dim: self.toy_dim.or(cfg.toy_dim),
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic culvert dataset (images + CSV)
    Synth {
        /// Number of scenarios to render
        #[arg(long, value_name = "N")]
        scenarios: usize,

        /// Seed for occlusion levels, styles, and noise
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Gaussian pixel noise standard deviation
        #[arg(long, default_value_t = 0.0, value_name = "SD")]
        noise_sd: f64,

        /// Directory for images/ and dataset.csv
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },

    /// Extract deep features from every dataset image into an FVEC file
    Extract {
        /// Dataset CSV file
        #[arg(long, value_name = "FILE")]
        dataset: Option<PathBuf>,

        #[command(flatten)]
        extractor: ExtractorFlags,

        /// Output feature file (default <out-dir>/features.fvec)
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,

        /// Fallback directory for the feature file
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },

    /// Train an MLP regressor on extracted features
    Train {
        /// Feature file produced by `extract`
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,

        /// Network shape: ann1, ann2, ann3, or custom
        #[arg(long)]
        preset: Option<String>,

        /// Hidden layer widths for --preset custom, e.g. 32,16,16
        #[arg(long, value_delimiter = ',', value_name = "W,W,...")]
        hidden_sizes: Option<Vec<usize>>,

        /// Weight initialization seed
        #[arg(long, value_name = "SEED")]
        init_seed: Option<u64>,

        /// Training epochs
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,

        /// Adam learning rate
        #[arg(long, value_name = "LR")]
        learning_rate: Option<f64>,

        /// Mini-batch size
        #[arg(long, value_name = "N")]
        batch_size: Option<usize>,

        /// Epoch shuffling seed
        #[arg(long, value_name = "SEED")]
        shuffle_seed: Option<u64>,

        /// Train/val/test split seed
        #[arg(long, value_name = "SEED")]
        split_seed: Option<u64>,

        /// Directory for model.ckpt and history.csv
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },

    /// Evaluate a checkpoint on the held-out test split
    Eval {
        /// Feature file produced by `extract`
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,

        /// Checkpoint produced by `train` (default <out-dir>/model.ckpt)
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,

        /// Train/val/test split seed — must match the one used in `train`
        #[arg(long, value_name = "SEED")]
        split_seed: Option<u64>,

        /// Directory for report.json, scatter.csv, and track.csv
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },

    /// Predict blockage percentage for a single image
    Predict {
        /// Image to score
        #[arg(long, value_name = "FILE")]
        image: PathBuf,

        /// Checkpoint produced by `train` (default <out-dir>/model.ckpt)
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,

        #[command(flatten)]
        extractor: ExtractorFlags,
    },

    /// Time the six pipeline stages over repeated runs
    Profile {
        /// Image to run through the pipeline
        #[arg(long, value_name = "FILE")]
        image: PathBuf,

        /// Checkpoint produced by `train` (default <out-dir>/model.ckpt)
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,

        #[command(flatten)]
        extractor: ExtractorFlags,

        /// Measured passes (a warmup pass is added and discarded when >= 3)
        #[arg(long, default_value_t = 5, value_name = "N")]
        repeats: usize,

        /// Aggregation across passes: mean or median
        #[arg(long, default_value = "median")]
        aggregation: String,

        /// Free-text hardware description recorded in the report
        #[arg(long, default_value = "unspecified", value_name = "TEXT")]
        hardware_note: String,

        /// Directory for profile.json and profile.csv
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
}

/// `--features` if given, else `<out-dir>/features.fvec`.
fn features_path(
    flag: Option<PathBuf>,
    cfg: &PipelineConfig,
    out_dir_flag: Option<&PathBuf>,
) -> Result<PathBuf> {
    if let Some(path) = flag {
        return Ok(path);
    }
    let dir = out_dir_flag
        .cloned()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| Error::Usage("missing --features (or --out-dir to derive it)".into()))?;
    Ok(dir.join("features.fvec"))
}

/// `--checkpoint` if given, else `<out-dir>/model.ckpt`.
fn checkpoint_path(flag: Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    if let Some(path) = flag {
        return Ok(path);
    }
    let dir = cfg
        .out_dir
        .clone()
        .ok_or_else(|| Error::Usage("missing --checkpoint (or \"out_dir\" in the config file)".into()))?;
    Ok(dir.join("model.ckpt"))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Cmd::Synth {
            scenarios,
            seed,
            noise_sd,
            out_dir,
        } => {
            let out_dir = need("out-dir", out_dir, cfg.out_dir.clone())?;
            commands::cmd_synth(&out_dir, scenarios, seed, noise_sd)
        }
        Cmd::Extract {
            dataset,
            extractor,
            features,
            out_dir,
        } => {
            let dataset = need("dataset", dataset, cfg.dataset.clone())?;
            let features = features_path(features, &cfg, out_dir.as_ref())?;
            let extractor = extractor.resolve(&cfg)?;
            commands::cmd_extract(&dataset, &extractor, &features)
        }
        Cmd::Train {
            features,
            preset,
            hidden_sizes,
            init_seed,
            epochs,
            learning_rate,
            batch_size,
            shuffle_seed,
            split_seed,
            out_dir,
        } => {
            let features = features_path(features, &cfg, out_dir.as_ref())?;
            let preset = PresetChoice::parse(&need("preset", preset, cfg.preset.clone())?)?;
            let hidden_sizes = hidden_sizes.or_else(|| cfg.hidden_sizes.clone());
            let defaults = TrainConfig::default();
            let train_cfg = TrainConfig {
                epochs: pick(epochs, cfg.epochs, defaults.epochs),
                learning_rate: pick(learning_rate, cfg.learning_rate, defaults.learning_rate),
                batch_size: pick(batch_size, cfg.batch_size, defaults.batch_size),
                shuffle_seed: pick(shuffle_seed, cfg.shuffle_seed, defaults.shuffle_seed),
            };
            let init_seed = pick(init_seed, cfg.init_seed, 0);
            let split_seed = pick(split_seed, cfg.split_seed, 0);
            let out_dir = need("out-dir", out_dir, cfg.out_dir.clone())?;
            commands::cmd_train(
                &features,
                preset,
                hidden_sizes,
                init_seed,
                train_cfg,
                split_seed,
                &out_dir,
            )
        }
        Cmd::Eval {
            features,
            checkpoint,
            split_seed,
            out_dir,
        } => {
            let features = features_path(features, &cfg, out_dir.as_ref())?;
            let checkpoint = checkpoint_path(
                checkpoint.or_else(|| out_dir.as_ref().map(|d| d.join("model.ckpt"))),
                &cfg,
            )?;
            let split_seed = pick(split_seed, cfg.split_seed, 0);
            let out_dir = need("out-dir", out_dir, cfg.out_dir.clone())?;
            commands::cmd_eval(&features, &checkpoint, split_seed, &out_dir)
        }
        Cmd::Predict {
            image,
            checkpoint,
            extractor,
        } => {
            let checkpoint = checkpoint_path(checkpoint, &cfg)?;
            let extractor = extractor.resolve(&cfg)?;
            commands::cmd_predict(&image, &checkpoint, &extractor)
        }
        Cmd::Profile {
            image,
            checkpoint,
            extractor,
            repeats,
            aggregation,
            hardware_note,
            out_dir,
        } => {
            let checkpoint = checkpoint_path(checkpoint, &cfg)?;
            let extractor = extractor.resolve(&cfg)?;
            let aggregation: Aggregation = aggregation.parse()?;
            let out_dir = need("out-dir", out_dir, cfg.out_dir.clone())?;
            commands::cmd_profile(
                &image,
                &checkpoint,
                &extractor,
                repeats,
                aggregation,
                &hardware_note,
                &out_dir,
            )
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_class().code());
    }
}
