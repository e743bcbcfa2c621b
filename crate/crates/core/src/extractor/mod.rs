//! Visual feature extraction: pluggable backbones behind one trait, plus the
//! batch driver that turns a dataset into a feature matrix with provenance.

pub mod features;
mod onnx;
pub mod preprocess;
mod toy;

pub use features::{
    manifest_path, read_features, read_manifest, write_features, write_manifest, FeatureManifest,
    FeatureMatrix, ManifestRow,
};
pub use onnx::OnnxExtractor;
pub use preprocess::{ChannelLayout, PreprocessSpec};
pub use toy::{ToyExtractor, TOY_DEFAULT_DIM, TOY_DEFAULT_INPUT, TOY_GRID};

use std::path::Path;

use image::RgbImage;
use ndarray::{Array2, ArrayView};

use crate::dataset::HydraulicSample;
use crate::error::{Error, Result};

/// The convolutional backbones with pinned feature contracts. Feature
/// width is the flattened final convolutional map: channels x height x width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackboneKind {
    /// 7 x 7 x 1024 at 224 x 224 input.
    MobileNet,
    /// 7 x 7 x 2048 at 224 x 224 input.
    ResNet50,
    /// 10 x 10 x 1536 at 300 x 300 input.
    EfficientNetB3,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 3] = [
        BackboneKind::MobileNet,
        BackboneKind::ResNet50,
        BackboneKind::EfficientNetB3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackboneKind::MobileNet => "mobilenet",
            BackboneKind::ResNet50 => "resnet50",
            BackboneKind::EfficientNetB3 => "efficientnetb3",
        }
    }

    pub fn input_size(self) -> u32 {
        match self {
            BackboneKind::MobileNet | BackboneKind::ResNet50 => 224,
            BackboneKind::EfficientNetB3 => 300,
        }
    }

    pub fn feature_dim(self) -> usize {
        match self {
            BackboneKind::MobileNet => 7 * 7 * 1024,
            BackboneKind::ResNet50 => 7 * 7 * 2048,
            BackboneKind::EfficientNetB3 => 10 * 10 * 1536,
        }
    }
}

/// Extractor selection as it appears on the command line and in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorKind {
    Toy,
    Backbone(BackboneKind),
}

impl std::str::FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(ExtractorKind::Toy),
            "mobilenet" => Ok(ExtractorKind::Backbone(BackboneKind::MobileNet)),
            "resnet50" => Ok(ExtractorKind::Backbone(BackboneKind::ResNet50)),
            "efficientnetb3" => Ok(ExtractorKind::Backbone(BackboneKind::EfficientNetB3)),
            other => Err(Error::Usage(format!(
                "unknown extractor '{other}' (expected toy, mobilenet, resnet50, or efficientnetb3)"
            ))),
        }
    }
}

/// Maps an image to a fixed-width feature vector.
pub trait Extractor {
    fn name(&self) -> &'static str;
    fn feature_dim(&self) -> usize;
    fn preprocess_spec(&self) -> PreprocessSpec;
    fn extract(&self, image: &RgbImage) -> Result<Vec<f32>>;
}

/// Instantiates an extractor, validating the flag combination eagerly.
///
/// Backbones require `model_path`; the toy extractor takes an optional
/// feature width (default [`TOY_DEFAULT_DIM`]) and rejects a model path.
pub fn load_extractor(
    kind: ExtractorKind,
    model_path: Option<&Path>,
    toy_dim: Option<usize>,
) -> Result<Box<dyn Extractor>> {
    match kind {
        ExtractorKind::Toy => {
            if model_path.is_some() {
                return Err(Error::Usage(
                    "the toy extractor does not take a model file".into(),
                ));
            }
            let dim = toy_dim.unwrap_or(TOY_DEFAULT_DIM);
            Ok(Box::new(ToyExtractor::new(dim, TOY_DEFAULT_INPUT)?))
        }
        ExtractorKind::Backbone(backbone) => {
            if toy_dim.is_some() {
                return Err(Error::Usage(
                    "feature width is fixed per backbone; --toy-dim only applies to toy".into(),
                ));
            }
            let path = model_path.ok_or_else(|| {
                Error::Usage(format!(
                    "extractor '{}' requires a model file (--model-path)",
                    backbone.name()
                ))
            })?;
            Ok(Box::new(OnnxExtractor::new(path, backbone)?))
        }
    }
}

/// Decodes an image file to RGB. Failure to open the file is a load error;
/// anything that goes wrong after it opened — unknown format, corrupt or
/// truncated contents — is a decode error. The decoder reports truncation
/// as an I/O error, so classification keys on the phase, not the variant.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let file = std::fs::File::open(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let decode_err = |e: &dyn std::fmt::Display| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let reader = image::ImageReader::new(std::io::BufReader::new(file))
        .with_guessed_format()
        .map_err(|e| decode_err(&e))?;
    let img = reader.decode().map_err(|e| decode_err(&e))?;
    Ok(img.to_rgb8())
}

/// Runs the extractor over every sample, producing the feature matrix and
/// its provenance manifest. Row order follows sample order. Per-image
/// failures are collected so one bad file does not hide the rest: the error
/// lists every sample that failed.
pub fn extract_features(
    extractor: &dyn Extractor,
    samples: &[HydraulicSample],
) -> Result<(FeatureMatrix, FeatureManifest)> {
    if samples.is_empty() {
        return Err(Error::Size("cannot extract features from zero samples".into()));
    }
    let dim = extractor.feature_dim();
    let mut data = Array2::<f32>::zeros((samples.len(), dim));
    let mut rows = Vec::with_capacity(samples.len());
    let mut failures: Vec<String> = Vec::new();
    for (i, sample) in samples.iter().enumerate() {
        let feats = load_image(&sample.image_path).and_then(|img| extractor.extract(&img));
        match feats {
            Err(e) => {
                failures.push(format!("{}: {e}", sample.scenario_id));
                continue;
            }
            Ok(feats) => data.row_mut(i).assign(&ArrayView::from(feats.as_slice())),
        }
        rows.push(ManifestRow {
            scenario_id: sample.scenario_id.clone(),
            image_path: sample.image_path.to_string_lossy().into_owned(),
            blockage_pct: sample.blockage_pct,
        });
    }
    if !failures.is_empty() {
        return Err(Error::Validation(format!(
            "{} of {} images failed extraction: {}",
            failures.len(),
            samples.len(),
            failures.join("; ")
        )));
    }
    let matrix = FeatureMatrix {
        extractor: extractor.name().to_string(),
        data,
    };
    let manifest = FeatureManifest {
        extractor: extractor.name().to_string(),
        feature_dim: dim,
        preprocess: extractor.preprocess_spec(),
        rows,
    };
    Ok((matrix, manifest))
}
