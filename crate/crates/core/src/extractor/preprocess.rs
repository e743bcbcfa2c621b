//! Image preprocessing shared by all feature extractors: bilinear resize,
//! scale to [0, 1], per-channel standardization.

use image::{imageops, RgbImage};
use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-channel means the backbones were trained against (RGB).
pub const IMAGENET_MEANS: [f32; 3] = [0.485, 0.456, 0.406];
/// Per-channel standard deviations matching [`IMAGENET_MEANS`].
pub const IMAGENET_SDS: [f32; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelLayout {
    /// `(3, H, W)` — the default; what the backbones expect.
    ChannelsFirst,
    /// `(H, W, 3)`.
    ChannelsLast,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    /// Side length the image is resized to (square).
    pub input_size: u32,
    pub means: [f32; 3],
    pub sds: [f32; 3],
    pub layout: ChannelLayout,
}

impl PreprocessSpec {
    /// Standard recipe at the given input size: bilinear resize, [0, 1]
    /// scaling, ImageNet statistics, channels-first layout.
    pub fn imagenet(input_size: u32) -> Self {
        PreprocessSpec {
            input_size,
            means: IMAGENET_MEANS,
            sds: IMAGENET_SDS,
            layout: ChannelLayout::ChannelsFirst,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 {
            return Err(Error::Config("preprocess input size must be positive".into()));
        }
        for (i, (&m, &s)) in self.means.iter().zip(&self.sds).enumerate() {
            if !m.is_finite() || !s.is_finite() || s <= 0.0 {
                return Err(Error::Config(format!(
                    "preprocess channel {i} has invalid statistics (mean {m}, sd {s})"
                )));
            }
        }
        Ok(())
    }
}

/// Resizes, scales to [0, 1], and standardizes an RGB image. The output
/// shape follows `spec.layout`.
pub fn preprocess(image: &RgbImage, spec: &PreprocessSpec) -> Result<Array3<f32>> {
    spec.validate()?;
    let s = spec.input_size;
    let resized = if image.dimensions() == (s, s) {
        image.clone()
    } else {
        imageops::resize(image, s, s, imageops::FilterType::Triangle)
    };

    let side = s as usize;
    let mut out = match spec.layout {
        ChannelLayout::ChannelsFirst => Array3::<f32>::zeros((3, side, side)),
        ChannelLayout::ChannelsLast => Array3::<f32>::zeros((side, side, 3)),
    };
    for (x, y, pixel) in resized.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        for c in 0..3 {
            let v = (f32::from(pixel[c]) / 255.0 - spec.means[c]) / spec.sds[c];
            match spec.layout {
                ChannelLayout::ChannelsFirst => out[[c, y, x]] = v,
                ChannelLayout::ChannelsLast => out[[y, x, c]] = v,
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn constant_image_standardizes_per_channel() {
        let img = RgbImage::from_pixel(8, 8, Rgb([128, 128, 128]));
        let spec = PreprocessSpec::imagenet(8);
        let arr = preprocess(&img, &spec).unwrap();
        assert_eq!(arr.dim(), (3, 8, 8));
        let raw = 128.0f32 / 255.0;
        for c in 0..3 {
            let expected = (raw - IMAGENET_MEANS[c]) / IMAGENET_SDS[c];
            assert!((arr[[c, 3, 5]] - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn layouts_agree_on_values() {
        let mut img = RgbImage::from_pixel(4, 4, Rgb([10, 20, 30]));
        img.put_pixel(2, 1, Rgb([200, 100, 50]));
        let first = preprocess(&img, &PreprocessSpec::imagenet(4)).unwrap();
        let mut spec = PreprocessSpec::imagenet(4);
        spec.layout = ChannelLayout::ChannelsLast;
        let last = preprocess(&img, &spec).unwrap();
        assert_eq!(last.dim(), (4, 4, 3));
        for c in 0..3 {
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(first[[c, y, x]], last[[y, x, c]]);
                }
            }
        }
    }

    #[test]
    fn degenerate_and_large_inputs_resize_to_spec() {
        let spec = PreprocessSpec::imagenet(224);
        let tiny = RgbImage::from_pixel(1, 1, Rgb([77, 77, 77]));
        assert_eq!(preprocess(&tiny, &spec).unwrap().dim(), (3, 224, 224));
        let wide = RgbImage::new(640, 480);
        assert_eq!(preprocess(&wide, &spec).unwrap().dim(), (3, 224, 224));
    }

    #[test]
    fn image_matching_channel_means_standardizes_to_zero() {
        // Means chosen to be exactly representable as u8/255 values.
        let spec = PreprocessSpec {
            input_size: 4,
            means: [100.0 / 255.0, 150.0 / 255.0, 200.0 / 255.0],
            sds: [0.5, 0.5, 0.5],
            layout: ChannelLayout::ChannelsFirst,
        };
        let img = RgbImage::from_pixel(4, 4, Rgb([100, 150, 200]));
        let arr = preprocess(&img, &spec).unwrap();
        for &v in arr.iter() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn resize_is_deterministic() {
        let mut img = RgbImage::new(37, 53);
        for (x, y, p) in img.enumerate_pixels_mut() {
            *p = Rgb([(x * 7 % 256) as u8, (y * 11 % 256) as u8, ((x + y) % 256) as u8]);
        }
        let spec = PreprocessSpec::imagenet(16);
        let a = preprocess(&img, &spec).unwrap();
        let b = preprocess(&img, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_invalid_spec() {
        let img = RgbImage::new(4, 4);
        let mut spec = PreprocessSpec::imagenet(4);
        spec.sds[1] = 0.0;
        assert!(matches!(preprocess(&img, &spec), Err(Error::Config(_))));
        let mut spec = PreprocessSpec::imagenet(0);
        spec.input_size = 0;
        assert!(matches!(preprocess(&img, &spec), Err(Error::Config(_))));
    }
}
