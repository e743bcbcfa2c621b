//! One function per subcommand. Each validates its inputs before touching
//! anything heavy, logs progress to standard error, and reserves standard
//! output for results.

use std::path::{Path, PathBuf};

use blockage_core::dataset::{load_dataset, split, synthesize};
use blockage_core::extractor::{
    extract_features, load_extractor, load_image, read_features, read_manifest, write_features,
    write_manifest, ExtractorKind, FeatureManifest,
};
use blockage_core::metrics::{emit_prediction_track, emit_scatter, evaluate};
use blockage_core::mlp::{
    load_checkpoint, save_checkpoint, train, Mlp, MlpConfig, MlpPreset, TrainConfig,
    TrainProvenance,
};
use blockage_core::profiler::{profile_pipeline, Aggregation, STAGE_NAMES};
use blockage_core::scaler::StandardScaler;
use blockage_core::{Error, Result};
use ndarray::{Array1, Array2, Axis};

/// Extractor choice plus the flags that parameterize it, resolved from the
/// command line and config file.
pub struct ExtractorArgs {
    pub kind: ExtractorKind,
    pub model_path: Option<PathBuf>,
    pub toy_dim: Option<usize>,
}

impl ExtractorArgs {
    /// Checks the flag combination without loading anything. Mirrors the
    /// checks `load_extractor` performs so a bad combination fails before
    /// any multi-hundred-megabyte model file is opened.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExtractorKind::Toy => {
                if self.model_path.is_some() {
                    return Err(Error::Usage(
                        "the toy extractor does not take a model file".into(),
                    ));
                }
            }
            ExtractorKind::Backbone(b) => {
                if self.toy_dim.is_some() {
                    return Err(Error::Usage(
                        "feature width is fixed per backbone; --toy-dim only applies to toy"
                            .into(),
                    ));
                }
                if self.model_path.is_none() {
                    return Err(Error::Usage(format!(
                        "extractor '{}' requires a model file (--model-path)",
                        b.name()
                    )));
                }
            }
        }
        Ok(())
    }

    fn load(&self) -> Result<Box<dyn blockage_core::extractor::Extractor>> {
        load_extractor(self.kind, self.model_path.as_deref(), self.toy_dim)
    }
}

pub fn cmd_synth(out_dir: &Path, scenarios: usize, seed: u64, noise_sd: f64) -> Result<()> {
    let samples = synthesize(out_dir, scenarios, seed, noise_sd)?;
    eprintln!(
        "wrote {} images and dataset.csv under {}",
        samples.len(),
        out_dir.display()
    );
    Ok(())
}

pub fn cmd_extract(dataset: &Path, extractor: &ExtractorArgs, features_out: &Path) -> Result<()> {
    extractor.validate()?;
    let samples = load_dataset(dataset)?;
    eprintln!("loaded {} samples from {}", samples.len(), dataset.display());
    let ext = extractor.load()?;
    let (matrix, manifest) = extract_features(ext.as_ref(), &samples)?;
    if let Some(parent) = features_out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_features(features_out, &matrix)?;
    write_manifest(features_out, &manifest)?;
    eprintln!(
        "extracted {}x{} '{}' features to {}",
        matrix.rows(),
        matrix.dim(),
        manifest.extractor,
        features_out.display()
    );
    Ok(())
}

/// The network shape to train: a named preset or an explicit layer stack.
pub enum PresetChoice {
    Named(MlpPreset),
    Custom,
}

impl PresetChoice {
    pub fn parse(s: &str) -> Result<PresetChoice> {
        if s == "custom" {
            return Ok(PresetChoice::Custom);
        }
        Ok(PresetChoice::Named(s.parse()?))
    }

    /// Resolves to a concrete model config against the feature width on
    /// disk. Named presets carry their own input width, which must match
    /// the features exactly — ann1 pairs with mobilenet-width features and
    /// so on. `custom` adapts to any width but then requires the hidden
    /// stack to be spelled out.
    fn config(
        &self,
        feature_dim: usize,
        hidden_sizes: Option<Vec<usize>>,
        init_seed: u64,
    ) -> Result<MlpConfig> {
        match self {
            PresetChoice::Named(preset) => {
                if hidden_sizes.is_some() {
                    return Err(Error::Usage(format!(
                        "--hidden-sizes conflicts with preset '{}'; use --preset custom",
                        preset.name()
                    )));
                }
                let config = preset.config(init_seed);
                if config.input_dim != feature_dim {
                    return Err(Error::Config(format!(
                        "preset '{}' expects {}-wide features but the feature file is {} wide",
                        preset.name(),
                        config.input_dim,
                        feature_dim
                    )));
                }
                Ok(config)
            }
            PresetChoice::Custom => {
                let hidden = hidden_sizes.ok_or_else(|| {
                    Error::Usage("--preset custom requires --hidden-sizes".into())
                })?;
                Ok(MlpConfig::new(feature_dim, hidden, init_seed))
            }
        }
    }
}

fn gather_rows(data: &Array2<f32>, idx: &[usize]) -> Array2<f32> {
    data.select(Axis(0), idx)
}

fn gather_targets(manifest: &FeatureManifest, idx: &[usize]) -> Array1<f32> {
    idx.iter()
        .map(|&i| manifest.rows[i].blockage_pct as f32)
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    features: &Path,
    preset: PresetChoice,
    hidden_sizes: Option<Vec<usize>>,
    init_seed: u64,
    train_cfg: TrainConfig,
    split_seed: u64,
    out_dir: &Path,
) -> Result<()> {
    train_cfg.validate()?;
    // The manifest is a few kilobytes of JSON; checking the width contract
    // there avoids pulling a gigabyte feature matrix just to reject ann1 on
    // resnet50-width features.
    let manifest = read_manifest(features)?;
    let config = preset.config(manifest.feature_dim, hidden_sizes, init_seed)?;
    config.validate()?;

    let matrix = read_features(features)?;
    if matrix.dim() != manifest.feature_dim {
        return Err(Error::Shape {
            expected: manifest.feature_dim,
            actual: matrix.dim(),
            context: format!("manifest vs feature file {}", features.display()),
        });
    }
    let s = split(matrix.rows(), split_seed)?;
    eprintln!(
        "split {} rows into {} train / {} val / {} test (seed {})",
        matrix.rows(),
        s.train_idx.len(),
        s.val_idx.len(),
        s.test_idx.len(),
        split_seed
    );

    // Scaler statistics come from the train split alone; validation rows
    // pass through the same transform but never influence it.
    let x_train_raw = gather_rows(&matrix.data, &s.train_idx);
    let scaler = StandardScaler::fit(x_train_raw.view())?;
    let x_train = scaler.transform(x_train_raw.view())?;
    let y_train = gather_targets(&manifest, &s.train_idx);
    let x_val = scaler.transform(gather_rows(&matrix.data, &s.val_idx).view())?;
    let y_val = gather_targets(&manifest, &s.val_idx);

    let model = Mlp::build(config)?;
    eprintln!(
        "training {} parameters for {} epochs (batch {}, lr {})",
        model.param_count(),
        train_cfg.epochs,
        train_cfg.batch_size,
        train_cfg.learning_rate
    );
    let (model, history) = train(
        model,
        x_train.view(),
        y_train.view(),
        Some((x_val.view(), y_val.view())),
        &train_cfg,
    )?;
    let model = model.with_scaler(scaler);

    std::fs::create_dir_all(out_dir)?;
    let ckpt_path = out_dir.join("model.ckpt");
    let provenance = TrainProvenance {
        epochs: train_cfg.epochs,
        learning_rate: train_cfg.learning_rate,
        batch_size: train_cfg.batch_size,
        shuffle_seed: train_cfg.shuffle_seed,
        final_train_mape: history.final_train_mape().unwrap_or(f64::NAN),
        final_val_mape: history.final_val_mape(),
    };
    save_checkpoint(&ckpt_path, &model, &manifest.extractor, Some(provenance))?;
    history.write_csv(&out_dir.join("history.csv"))?;
    eprintln!(
        "final train MAPE {:.4}, val MAPE {}; checkpoint at {}",
        history.final_train_mape().unwrap_or(f64::NAN),
        history
            .final_val_mape()
            .map_or("n/a".to_string(), |v| format!("{v:.4}")),
        ckpt_path.display()
    );
    Ok(())
}

pub fn cmd_eval(
    features: &Path,
    checkpoint: &Path,
    split_seed: u64,
    out_dir: &Path,
) -> Result<()> {
    let manifest = read_manifest(features)?;
    let (model, meta) = load_checkpoint(checkpoint)?;
    if meta.extractor != manifest.extractor {
        eprintln!(
            "warning: checkpoint was trained on '{}' features but the file holds '{}'",
            meta.extractor, manifest.extractor
        );
    }
    let matrix = read_features(features)?;
    let s = split(matrix.rows(), split_seed)?;
    eprintln!(
        "evaluating on the {}-row test split (seed {})",
        s.test_idx.len(),
        split_seed
    );

    let scaler = model
        .scaler
        .as_ref()
        .ok_or_else(|| Error::Config("checkpoint carries no scaler".into()))?;
    let x_test = scaler.transform(gather_rows(&matrix.data, &s.test_idx).view())?;
    let preds32 = model.predict(x_test.view())?;
    let predictions: Array1<f64> = preds32.mapv(f64::from);
    let targets: Array1<f64> = s
        .test_idx
        .iter()
        .map(|&i| manifest.rows[i].blockage_pct)
        .collect();

    let report = evaluate(targets.view(), predictions.view())?;
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    std::fs::write(out_dir.join("report.json"), &json)?;
    emit_scatter(targets.view(), predictions.view(), &out_dir.join("scatter.csv"))?;
    emit_prediction_track(targets.view(), predictions.view(), &out_dir.join("track.csv"))?;
    print!("{json}");
    Ok(())
}

/// Wraps one prediction phase so failures name their stage, matching the
/// profiler's vocabulary.
fn staged<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

pub fn cmd_predict(image: &Path, checkpoint: &Path, extractor: &ExtractorArgs) -> Result<()> {
    extractor.validate()?;
    let img = staged(STAGE_NAMES[0], || load_image(image))?;
    let ext = staged(STAGE_NAMES[1], || extractor.load())?;
    let feats = staged(STAGE_NAMES[2], || ext.extract(&img))?;
    let (model, meta) = staged(STAGE_NAMES[4], || load_checkpoint(checkpoint))?;
    if meta.extractor != ext.name() {
        eprintln!(
            "warning: checkpoint was trained on '{}' features but extraction used '{}'",
            meta.extractor,
            ext.name()
        );
    }
    let scaler = model
        .scaler
        .as_ref()
        .ok_or_else(|| Error::Config("checkpoint carries no scaler".into()))?;
    let row = Array2::from_shape_vec((1, feats.len()), feats).expect("row vector");
    let scaled = staged(STAGE_NAMES[3], || scaler.transform(row.view()))?;
    let pred = staged(STAGE_NAMES[5], || model.predict(scaled.view()))?;
    println!("{}", pred[0]);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_profile(
    image: &Path,
    checkpoint: &Path,
    extractor: &ExtractorArgs,
    repeats: usize,
    aggregation: Aggregation,
    hardware_note: &str,
    out_dir: &Path,
) -> Result<()> {
    extractor.validate()?;
    let report = profile_pipeline(
        image,
        checkpoint,
        extractor.kind,
        extractor.model_path.as_deref(),
        extractor.toy_dim,
        repeats,
        aggregation,
        hardware_note,
    )?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("profile.json"), report.to_json())?;
    std::fs::write(out_dir.join("profile.csv"), report.to_csv())?;
    print!("{}", report.to_json());
    Ok(())
}
