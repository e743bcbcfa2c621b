//! Hermetic fallback extractor: a coarse grayscale thumbnail of the
//! standardized image. No model files, no network — useful for tests and for
//! exercising the full pipeline on machines without backbone exports. It is
//! deliberately simple, not a convolutional feature map, but it preserves
//! spatial intensity structure well enough to regress on.

use image::RgbImage;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::extractor::preprocess::{preprocess, PreprocessSpec};
use crate::extractor::Extractor;

/// Thumbnail side length; features are pooled onto this grid.
pub const TOY_GRID: u32 = 56;
/// Default feature width: one value per thumbnail cell.
pub const TOY_DEFAULT_DIM: usize = (TOY_GRID * TOY_GRID) as usize;
pub const TOY_DEFAULT_INPUT: u32 = 224;

pub struct ToyExtractor {
    feature_dim: usize,
    spec: PreprocessSpec,
}

impl ToyExtractor {
    /// `input_size` must be a multiple of [`TOY_GRID`] so average pooling
    /// tiles the image exactly.
    pub fn new(feature_dim: usize, input_size: u32) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::Config("toy feature width must be positive".into()));
        }
        if input_size == 0 || !input_size.is_multiple_of(TOY_GRID) {
            return Err(Error::Config(format!(
                "toy input size must be a positive multiple of {TOY_GRID}, got {input_size}"
            )));
        }
        Ok(ToyExtractor {
            feature_dim,
            spec: PreprocessSpec::imagenet(input_size),
        })
    }
}

impl Default for ToyExtractor {
    fn default() -> Self {
        ToyExtractor::new(TOY_DEFAULT_DIM, TOY_DEFAULT_INPUT).expect("default configuration")
    }
}

/// Channel-mean then block-average pooling onto the 56x56 grid, flattened
/// row-major.
fn pool_thumbnail(arr: &Array3<f32>) -> Vec<f32> {
    let (_, h, _) = arr.dim();
    let block = h / TOY_GRID as usize;
    let norm = 1.0 / (3 * block * block) as f32;
    let grid = TOY_GRID as usize;
    let mut base = vec![0.0f32; grid * grid];
    for (i, cell) in base.iter_mut().enumerate() {
        let (by, bx) = (i / grid, i % grid);
        let mut sum = 0.0f32;
        for c in 0..3 {
            for y in by * block..(by + 1) * block {
                for x in bx * block..(bx + 1) * block {
                    sum += arr[[c, y, x]];
                }
            }
        }
        *cell = sum * norm;
    }
    base
}

impl Extractor for ToyExtractor {
    fn name(&self) -> &'static str {
        "toy"
    }

    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn preprocess_spec(&self) -> PreprocessSpec {
        self.spec
    }

    fn extract(&self, image: &RgbImage) -> Result<Vec<f32>> {
        let arr = preprocess(image, &self.spec)?;
        let base = pool_thumbnail(&arr);
        // Tile (or truncate) the thumbnail to the requested width.
        let out = (0..self.feature_dim).map(|i| base[i % base.len()]).collect();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::preprocess::{IMAGENET_MEANS, IMAGENET_SDS};
    use image::Rgb;

    #[test]
    fn default_width_is_thumbnail_area() {
        let toy = ToyExtractor::default();
        assert_eq!(toy.feature_dim(), 3136);
        assert_eq!(toy.preprocess_spec().input_size, 224);
    }

    #[test]
    fn constant_image_gives_constant_features() {
        let toy = ToyExtractor::default();
        let img = RgbImage::from_pixel(224, 224, Rgb([128, 128, 128]));
        let feats = toy.extract(&img).unwrap();
        assert_eq!(feats.len(), 3136);
        let expected: f32 = (0..3)
            .map(|c| (128.0 / 255.0 - IMAGENET_MEANS[c]) / IMAGENET_SDS[c])
            .sum::<f32>()
            / 3.0;
        for &f in &feats {
            assert!((f - expected).abs() < 1e-5, "feature {f} vs {expected}");
        }
    }

    #[test]
    fn tiling_and_truncation() {
        let img = {
            let mut img = RgbImage::new(224, 224);
            for (x, y, p) in img.enumerate_pixels_mut() {
                *p = Rgb([(x % 251) as u8, (y % 241) as u8, ((x * y) % 253) as u8]);
            }
            img
        };
        let full = ToyExtractor::default().extract(&img).unwrap();
        let short = ToyExtractor::new(10, 224).unwrap().extract(&img).unwrap();
        assert_eq!(short, full[..10]);
        let long = ToyExtractor::new(5000, 224).unwrap().extract(&img).unwrap();
        assert_eq!(long[..3136], full[..]);
        assert_eq!(long[3136..], full[..5000 - 3136]);
    }

    #[test]
    fn other_input_sizes_pool_exactly() {
        let toy = ToyExtractor::new(3136, 112).unwrap();
        let img = RgbImage::from_pixel(112, 112, Rgb([60, 60, 60]));
        assert_eq!(toy.extract(&img).unwrap().len(), 3136);
        assert!(matches!(ToyExtractor::new(3136, 100), Err(Error::Config(_))));
        assert!(matches!(ToyExtractor::new(0, 224), Err(Error::Config(_))));
    }

    #[test]
    fn fill_level_moves_features_monotonically() {
        // Bottom-up darkening should change the mean thumbnail signal.
        let mut low = RgbImage::from_pixel(224, 224, Rgb([128, 128, 128]));
        let mut high = low.clone();
        for y in 150..224 {
            for x in 0..224 {
                low.put_pixel(x, y, Rgb([40, 40, 40]));
            }
        }
        for y in 80..224 {
            for x in 0..224 {
                high.put_pixel(x, y, Rgb([40, 40, 40]));
            }
        }
        let toy = ToyExtractor::default();
        let mean = |v: &[f32]| v.iter().sum::<f32>() / v.len() as f32;
        let m_low = mean(&toy.extract(&low).unwrap());
        let m_high = mean(&toy.extract(&high).unwrap());
        assert!(m_high < m_low, "darker fill should lower the mean signal");
    }
}
