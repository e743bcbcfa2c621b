//! Deep feature extraction through pretrained convolutional backbones in
//! ONNX interchange format. The backbone is a frozen, externally produced
//! artifact; this module only loads it, feeds preprocessed pixels, and
//! checks that the flattened feature width matches the backbone's contract.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::RgbImage;
use tract_onnx::prelude::*;

use crate::error::{Error, Result};
use crate::extractor::preprocess::{preprocess, PreprocessSpec};
use crate::extractor::{BackboneKind, Extractor};

pub struct OnnxExtractor {
    backbone: BackboneKind,
    spec: PreprocessSpec,
    model_path: PathBuf,
    plan: Arc<TypedSimplePlan>,
}

impl std::fmt::Debug for OnnxExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxExtractor")
            .field("backbone", &self.backbone)
            .field("model_path", &self.model_path)
            .finish_non_exhaustive()
    }
}

impl OnnxExtractor {
    pub fn new(model_path: &Path, backbone: BackboneKind) -> Result<Self> {
        let s = backbone.input_size() as usize;
        let load = || -> TractResult<Arc<TypedSimplePlan>> {
            tract_onnx::onnx()
                .model_for_path(model_path)?
                .with_input_fact(0, f32::fact([1, 3, s, s]).into())?
                .into_optimized()?
                .into_runnable()
        };
        let plan = load().map_err(|e| Error::Load {
            path: model_path.to_path_buf(),
            message: format!("{e:#}"),
        })?;
        // Reject a mismatched export (pooled head, wrong variant) at load
        // time when the graph declares a concrete output shape; symbolic
        // shapes fall through to the per-image check in `extract`.
        if let Ok(fact) = plan.model().output_fact(0) {
            if let Some(dims) = fact.shape.as_concrete() {
                let width: usize = dims.iter().skip(1).product();
                if width != backbone.feature_dim() {
                    return Err(Error::Shape {
                        expected: backbone.feature_dim(),
                        actual: width,
                        context: format!(
                            "declared output of {} loaded as {}",
                            model_path.display(),
                            backbone.name()
                        ),
                    });
                }
            }
        }
        Ok(OnnxExtractor {
            backbone,
            spec: PreprocessSpec::imagenet(backbone.input_size()),
            model_path: model_path.to_path_buf(),
            plan,
        })
    }

    pub fn backbone(&self) -> BackboneKind {
        self.backbone
    }
}

impl Extractor for OnnxExtractor {
    fn name(&self) -> &'static str {
        self.backbone.name()
    }

    fn feature_dim(&self) -> usize {
        self.backbone.feature_dim()
    }

    fn preprocess_spec(&self) -> PreprocessSpec {
        self.spec
    }

    fn extract(&self, image: &RgbImage) -> Result<Vec<f32>> {
        let arr = preprocess(image, &self.spec)?;
        let (c, h, w) = arr.dim();
        let data: Vec<f32> = arr.iter().copied().collect();
        let input = Tensor::from_shape(&[1, c, h, w], &data)
            .map_err(|e| Error::Numeric(format!("building input tensor failed: {e:#}")))?;
        let outputs = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| Error::Numeric(format!("backbone inference failed: {e:#}")))?;
        let view = outputs[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| Error::Numeric(format!("backbone output is not f32: {e:#}")))?;
        let feats: Vec<f32> = view.iter().copied().collect();
        if feats.len() != self.backbone.feature_dim() {
            return Err(Error::Shape {
                expected: self.backbone.feature_dim(),
                actual: feats.len(),
                context: format!(
                    "flattened {} output from {}",
                    self.backbone.name(),
                    self.model_path.display()
                ),
            });
        }
        if let Some(bad) = feats.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "backbone produced a non-finite activation ({bad})"
            )));
        }
        Ok(feats)
    }
}
