//! Deterministic synthetic culvert scenes.
//!
//! Each scene is a fixed camera view of a culvert barrel on a uniform
//! background; debris occludes the barrel opening from the bottom up. The
//! occluded pixel count is exact, so the rendered image carries a clean
//! visual signal for the stated blockage. Labels get small Gaussian noise so
//! the regression problem is not literally interpolation.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::dataset::{compute_blockage, write_dataset, HydraulicSample};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const IMAGE_SIZE: u32 = 224;

/// Barrel opening in pixel coordinates: rows `BARREL_TOP..BARREL_BOTTOM`,
/// columns `BARREL_LEFT..BARREL_RIGHT`.
const BARREL_TOP: u32 = 90;
const BARREL_BOTTOM: u32 = 190;
const BARREL_LEFT: u32 = 62;
const BARREL_RIGHT: u32 = 162;
const BARREL_COLS: u32 = BARREL_RIGHT - BARREL_LEFT;
/// Total barrel-opening pixels available for debris.
const BARREL_AREA: u32 = (BARREL_BOTTOM - BARREL_TOP) * BARREL_COLS;
const FRAME_WIDTH: u32 = 4;

const BACKGROUND: Rgb<u8> = Rgb([128, 128, 128]);
const FRAME: Rgb<u8> = Rgb([205, 205, 205]);
const OPENING: Rgb<u8> = Rgb([40, 42, 46]);

/// Reference upstream water level for the fully clear culvert, meters.
pub const WL_BLOCKED_M: f64 = 0.2;

/// Visual texture of the rendered debris. Purely cosmetic: the blockage
/// signal is the occluded area, not the palette.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DebrisStyle {
    Urban,
    Vegetative,
    Mixed,
}

impl DebrisStyle {
    fn primary(self) -> Rgb<u8> {
        match self {
            DebrisStyle::Urban => Rgb([105, 105, 115]),
            DebrisStyle::Vegetative => Rgb([110, 88, 48]),
            DebrisStyle::Mixed => Rgb([96, 96, 88]),
        }
    }

    fn accent(self) -> Rgb<u8> {
        match self {
            DebrisStyle::Urban => Rgb([82, 84, 96]),
            DebrisStyle::Vegetative => Rgb([70, 98, 54]),
            DebrisStyle::Mixed => Rgb([118, 92, 60]),
        }
    }
}

/// One generated scene before rendering.
#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub scenario_id: String,
    /// Fraction of the barrel opening covered by debris, in [0, 1].
    pub occlusion: f64,
    pub style: DebrisStyle,
    /// Label: `100 * occlusion` plus clamped Gaussian noise.
    pub blockage_pct: f64,
}

/// Water levels consistent with a blockage percentage: the blocked level is
/// held at [`WL_BLOCKED_M`] and the unblocked level back-solved.
pub fn water_levels_for_blockage(blockage_pct: f64) -> (f64, f64) {
    (WL_BLOCKED_M, WL_BLOCKED_M * (1.0 - blockage_pct / 100.0))
}

/// Generates `n_scenarios` scenes under `out_dir`: PNG images in `images/`
/// plus a `dataset.csv` indexing them with relative paths. Reruns with the
/// same arguments produce byte-identical files. Returned samples carry
/// absolute image paths so they can be consumed without reloading the CSV.
pub fn synthesize(
    out_dir: &Path,
    n_scenarios: usize,
    seed: u64,
    noise_sd: f64,
) -> Result<Vec<HydraulicSample>> {
    if n_scenarios == 0 {
        return Err(Error::Usage("number of scenarios must be positive".into()));
    }
    if !noise_sd.is_finite() || noise_sd < 0.0 {
        return Err(Error::Domain(format!(
            "label noise standard deviation must be finite and non-negative, got {noise_sd}"
        )));
    }

    let images_dir = out_dir.join("images");
    std::fs::create_dir_all(&images_dir)?;

    let mut rng = SplitMix64::new(seed);
    let mut relative = Vec::with_capacity(n_scenarios);
    let mut absolute = Vec::with_capacity(n_scenarios);
    for i in 0..n_scenarios {
        let occlusion = rng.next_f64();
        let style = match rng.next_below(3) {
            0 => DebrisStyle::Urban,
            1 => DebrisStyle::Vegetative,
            _ => DebrisStyle::Mixed,
        };
        let noise = rng.next_normal() * noise_sd;
        let blockage_pct = (100.0 * occlusion + noise).clamp(0.0, 100.0);

        let scenario = SyntheticScenario {
            scenario_id: format!("synth_{i:04}"),
            occlusion,
            style,
            blockage_pct,
        };

        let image_name = format!("{}.png", scenario.scenario_id);
        let image = render_scenario(&scenario, &mut rng);
        image
            .save(images_dir.join(&image_name))
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;

        let (wl_blocked, wl_unblocked) = water_levels_for_blockage(blockage_pct);
        // Store the level-derived value so the CSV is self-consistent under
        // the ingest cross-check.
        let blockage = compute_blockage(wl_blocked, wl_unblocked)?;
        let rel_path = PathBuf::from("images").join(&image_name);
        relative.push(HydraulicSample {
            scenario_id: scenario.scenario_id.clone(),
            upstream_wl_blocked: wl_blocked,
            upstream_wl_unblocked: wl_unblocked,
            blockage_pct: blockage,
            image_path: rel_path.clone(),
        });
        let mut abs = relative.last().unwrap().clone();
        abs.image_path = out_dir.join(rel_path);
        absolute.push(abs);
    }

    write_dataset(&relative, &out_dir.join("dataset.csv"))?;
    Ok(absolute)
}

/// Index of a barrel pixel in fill order: bottom row first, left to right.
/// A pixel is debris iff its fill index is below the target count.
fn fill_index(x: u32, y: u32) -> u32 {
    (BARREL_BOTTOM - 1 - y) * BARREL_COLS + (x - BARREL_LEFT)
}

fn render_scenario(scenario: &SyntheticScenario, rng: &mut SplitMix64) -> RgbImage {
    let mut img = RgbImage::from_pixel(IMAGE_SIZE, IMAGE_SIZE, BACKGROUND);

    // Frame band around the opening.
    for y in BARREL_TOP - FRAME_WIDTH..BARREL_BOTTOM + FRAME_WIDTH {
        for x in BARREL_LEFT - FRAME_WIDTH..BARREL_RIGHT + FRAME_WIDTH {
            img.put_pixel(x, y, FRAME);
        }
    }

    let target = (scenario.occlusion * f64::from(BARREL_AREA)).round() as u32;
    for y in BARREL_TOP..BARREL_BOTTOM {
        for x in BARREL_LEFT..BARREL_RIGHT {
            let color = if fill_index(x, y) < target {
                scenario.style.primary()
            } else {
                OPENING
            };
            img.put_pixel(x, y, color);
        }
    }

    // Cosmetic accent clumps. They only recolor pixels that are already
    // debris, so the occluded area stays exact.
    if target > 0 {
        let clumps = 6 + rng.next_below(5);
        for _ in 0..clumps {
            let center = rng.next_below(u64::from(target)) as u32;
            let cy = BARREL_BOTTOM - 1 - center / BARREL_COLS;
            let cx = BARREL_LEFT + center % BARREL_COLS;
            let radius = 2 + rng.next_below(4) as i64;
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    if dx * dx + dy * dy > radius * radius {
                        continue;
                    }
                    let y = i64::from(cy) + dy;
                    let x = i64::from(cx) + dx;
                    if y < i64::from(BARREL_TOP)
                        || y >= i64::from(BARREL_BOTTOM)
                        || x < i64::from(BARREL_LEFT)
                        || x >= i64::from(BARREL_RIGHT)
                    {
                        continue;
                    }
                    let (x, y) = (x as u32, y as u32);
                    if fill_index(x, y) < target {
                        img.put_pixel(x, y, scenario.style.accent());
                    }
                }
            }
        }
    }

    img
}
