//! Per-stage latency measurement of the inference pipeline.
//!
//! Six stages are timed with a monotonic clock, each repeat starting from
//! cold handles so model-loading costs are really measured. Absolute numbers
//! are hardware-dependent and never gate anything; the report exists for
//! relative comparison between backbones.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{load_extractor, load_image, ExtractorKind};
use crate::mlp::load_checkpoint;

/// Stage names in report column order.
pub const STAGE_NAMES: [&str; 6] = [
    "image_loading",
    "cnn_model_loading",
    "feature_extraction",
    "scalar_transform",
    "ann_model_loading",
    "prediction",
];

/// Reference stage timings (seconds) for the mobilenet-width
/// pipeline on lab-grade hardware, in [`STAGE_NAMES`] order. Non-binding —
/// useful only as a relative-comparison anchor.
pub const REFERENCE_STAGE_SECONDS: [f64; 6] = [0.0966, 0.7545, 0.1122, 0.0183, 0.2172, 0.0502];

/// Floor applied to each measured sample so a stage faster than the clock's
/// resolution still reports a positive time.
const MIN_STAGE_SECONDS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Median,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "median" => Ok(Aggregation::Median),
            other => Err(Error::Usage(format!(
                "unknown aggregation '{other}' (expected mean or median)"
            ))),
        }
    }
}

/// Aggregated seconds per stage. Field order is the report column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub image_loading: f64,
    pub cnn_model_loading: f64,
    pub feature_extraction: f64,
    pub scalar_transform: f64,
    pub ann_model_loading: f64,
    pub prediction: f64,
}

impl StageTimes {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.image_loading,
            self.cnn_model_loading,
            self.feature_extraction,
            self.scalar_transform,
            self.ann_model_loading,
            self.prediction,
        ]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub stages: StageTimes,
    pub repeats: usize,
    pub aggregation: Aggregation,
    pub hardware_note: String,
}

impl ProfileReport {
    pub fn total(&self) -> f64 {
        self.stages.total()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Header plus one data row, columns in [`STAGE_NAMES`] order.
    pub fn to_csv(&self) -> String {
        let mut out = STAGE_NAMES.join(",");
        out.push('\n');
        let mut first = true;
        for v in self.stages.as_array() {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
        out
    }
}

/// How many measurement passes to run and how many leading passes to drop:
/// with three or more requested repeats, one extra warmup pass is run first
/// and discarded, so the aggregate still covers `repeats` samples.
fn run_plan(repeats: usize) -> (usize, usize) {
    if repeats >= 3 {
        (repeats + 1, 1)
    } else {
        (repeats, 0)
    }
}

fn aggregate(samples: &[[f64; 6]], aggregation: Aggregation) -> [f64; 6] {
    let mut out = [0.0f64; 6];
    for (stage, slot) in out.iter_mut().enumerate() {
        let mut values: Vec<f64> = samples.iter().map(|s| s[stage]).collect();
        *slot = match aggregation {
            Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregation::Median => {
                values.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
                let mid = values.len() / 2;
                if values.len() % 2 == 1 {
                    values[mid]
                } else {
                    (values[mid - 1] + values[mid]) / 2.0
                }
            }
        };
    }
    out
}

fn timed<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let started = Instant::now();
    let value = f().map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })?;
    Ok((value, started.elapsed().as_secs_f64().max(MIN_STAGE_SECONDS)))
}

/// Times the six pipeline stages over `repeats` measured passes.
///
/// Measurement order differs from presentation order in one place: the
/// checkpoint is loaded before the scaler transform, because the scaler
/// lives inside the checkpoint. The report keeps the conventional column
/// order regardless.
#[allow(clippy::too_many_arguments)]
pub fn profile_pipeline(
    image_path: &Path,
    checkpoint_path: &Path,
    kind: ExtractorKind,
    model_path: Option<&Path>,
    toy_dim: Option<usize>,
    repeats: usize,
    aggregation: Aggregation,
    hardware_note: &str,
) -> Result<ProfileReport> {
    if repeats == 0 {
        return Err(Error::Usage("repeat count must be at least 1".into()));
    }
    let (passes, skip) = run_plan(repeats);
    let mut samples: Vec<[f64; 6]> = Vec::with_capacity(passes);
    for _ in 0..passes {
        let (image, t_image) = timed(STAGE_NAMES[0], || load_image(image_path))?;
        let (extractor, t_cnn_load) =
            timed(STAGE_NAMES[1], || load_extractor(kind, model_path, toy_dim))?;
        let (features, t_extract) = timed(STAGE_NAMES[2], || extractor.extract(&image))?;
        let ((model, _meta), t_ann_load) =
            timed(STAGE_NAMES[4], || load_checkpoint(checkpoint_path))?;
        let scaler = model.scaler.as_ref().expect("checkpoints embed a scaler");
        let row = Array2::from_shape_vec((1, features.len()), features).expect("row vector");
        let (scaled, t_transform) = timed(STAGE_NAMES[3], || scaler.transform(row.view()))?;
        let (_, t_predict) = timed(STAGE_NAMES[5], || model.predict(scaled.view()))?;
        samples.push([
            t_image,
            t_cnn_load,
            t_extract,
            t_transform,
            t_ann_load,
            t_predict,
        ]);
    }

    let kept = &samples[skip..];
    let agg = aggregate(kept, aggregation);
    Ok(ProfileReport {
        stages: StageTimes {
            image_loading: agg[0],
            cnn_model_loading: agg[1],
            feature_extraction: agg[2],
            scalar_transform: agg[3],
            ann_model_loading: agg[4],
            prediction: agg[5],
        },
        repeats,
        aggregation,
        hardware_note: hardware_note.to_string(),
    })
}
