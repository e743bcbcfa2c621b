//! Hydraulic records: blockage computation, CSV ingest, deterministic splits,
//! and synthetic desk-scale dataset generation.

mod synth;

pub use synth::{synthesize, DebrisStyle, SyntheticScenario};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Train/validation/test ratios. Sizing is floor/floor/remainder.
pub const SPLIT_RATIOS: (f64, f64, f64) = (0.6, 0.2, 0.2);

/// Relative tolerance used when cross-checking a stated blockage percentage
/// against the one recomputed from the water levels (unit floor near zero).
pub const BLOCKAGE_CHECK_RTOL: f64 = 1e-9;

/// CSV header for hydraulic datasets. The `blockage_pct` column is optional
/// on ingest; when present it is cross-checked against the water levels.
pub const CSV_HEADER: &str =
    "scenario_id,upstream_wl_blocked_m,upstream_wl_unblocked_m,blockage_pct,image_path";
const CSV_HEADER_NO_BLOCKAGE: &str =
    "scenario_id,upstream_wl_blocked_m,upstream_wl_unblocked_m,image_path";

/// One experiment record: upstream water levels with and without debris, the
/// derived blockage percentage, and the culvert image it corresponds to.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicSample {
    pub scenario_id: String,
    /// Upstream water level with debris present, meters (> 0).
    pub upstream_wl_blocked: f64,
    /// Upstream water level for the clear culvert, meters (>= 0).
    pub upstream_wl_unblocked: f64,
    /// Percentage hydraulic blockage in [0, 100].
    pub blockage_pct: f64,
    pub image_path: PathBuf,
}

impl HydraulicSample {
    /// Checks the level ordering and that `blockage_pct` agrees with the
    /// value recomputed from the levels.
    pub fn validate(&self) -> Result<()> {
        let computed = compute_blockage(self.upstream_wl_blocked, self.upstream_wl_unblocked)?;
        let scale = computed.abs().max(self.blockage_pct.abs()).max(1.0);
        if (self.blockage_pct - computed).abs() > BLOCKAGE_CHECK_RTOL * scale {
            return Err(Error::Validation(format!(
                "scenario '{}': stated blockage {} disagrees with {} computed from water levels",
                self.scenario_id, self.blockage_pct, computed
            )));
        }
        Ok(())
    }
}

/// Percentage hydraulic blockage from upstream water levels:
/// `(wl_blocked - wl_unblocked) / wl_blocked * 100`.
///
/// Debris raises the upstream level, so `wl_blocked >= wl_unblocked >= 0`
/// and `wl_blocked > 0` are required.
pub fn compute_blockage(wl_blocked: f64, wl_unblocked: f64) -> Result<f64> {
    if wl_blocked <= 0.0 || !wl_blocked.is_finite() {
        return Err(Error::Domain(format!(
            "blocked water level must be positive and finite, got {wl_blocked}"
        )));
    }
    if wl_unblocked < 0.0 || !wl_unblocked.is_finite() {
        return Err(Error::Domain(format!(
            "unblocked water level must be non-negative and finite, got {wl_unblocked}"
        )));
    }
    if wl_unblocked > wl_blocked {
        return Err(Error::Ordering(format!(
            "unblocked level {wl_unblocked} exceeds blocked level {wl_blocked}"
        )));
    }
    Ok((wl_blocked - wl_unblocked) / wl_blocked * 100.0)
}

/// Disjoint train/validation/test index lists produced by a seeded shuffle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn ratios(&self) -> (f64, f64, f64) {
        SPLIT_RATIOS
    }

    pub fn len(&self) -> usize {
        self.train_idx.len() + self.val_idx.len() + self.test_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 60:20:20 split of `0..n`: Fisher-Yates shuffle driven by splitmix64, then
/// the first floor(0.6 n) indices train, the next floor(0.2 n) validate, and
/// the remainder test.
pub fn split(n: usize, seed: u64) -> Result<DatasetSplit> {
    if n < 5 {
        return Err(Error::Size(format!(
            "need at least 5 samples to populate three nonempty partitions, got {n}"
        )));
    }
    // Integer forms of floor(0.6 n) and floor(0.2 n).
    let n_train = n * 6 / 10;
    let n_val = n * 2 / 10;
    let mut rng = SplitMix64::new(seed);
    let perm = rng.permutation(n);
    Ok(DatasetSplit {
        train_idx: perm[..n_train].to_vec(),
        val_idx: perm[n_train..n_train + n_val].to_vec(),
        test_idx: perm[n_train + n_val..].to_vec(),
        seed,
    })
}

/// Loads and validates a hydraulic dataset CSV.
///
/// Relative image paths are resolved against the CSV's parent directory.
/// Rows that violate the level ordering or disagree with the recomputed
/// blockage are rejected; all offending rows are listed in the error.
pub fn load_dataset(csv_path: &Path) -> Result<Vec<HydraulicSample>> {
    let base = csv_path.parent().unwrap_or_else(|| Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(csv_path)
        .map_err(|e| csv_error(e, csv_path))?;

    let headers = reader.headers().map_err(|e| csv_error(e, csv_path))?;
    let header_line = headers.iter().collect::<Vec<_>>().join(",");
    let has_blockage_col = match header_line.as_str() {
        h if h == CSV_HEADER => true,
        h if h == CSV_HEADER_NO_BLOCKAGE => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected header '{other}', expected '{CSV_HEADER}'"),
            })
        }
    };

    let mut samples = Vec::new();
    let mut violations: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, csv_path))?;
        let line = record.position().map_or(0, |p| p.line());
        let expected_fields = if has_blockage_col { 5 } else { 4 };
        if record.len() != expected_fields {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected_fields} fields, got {}", record.len()),
            });
        }

        let scenario_id = record[0].to_string();
        let wl_blocked = parse_field(&record[1], "upstream_wl_blocked_m", line)?;
        let wl_unblocked = parse_field(&record[2], "upstream_wl_unblocked_m", line)?;
        let stated_blockage = if has_blockage_col && !record[3].is_empty() {
            Some(parse_field(&record[3], "blockage_pct", line)?)
        } else {
            None
        };
        let image_field = if has_blockage_col { &record[4] } else { &record[3] };
        let image_path = resolve_image_path(base, image_field);

        match compute_blockage(wl_blocked, wl_unblocked) {
            Ok(computed) => {
                let blockage_pct = stated_blockage.unwrap_or(computed);
                let sample = HydraulicSample {
                    scenario_id,
                    upstream_wl_blocked: wl_blocked,
                    upstream_wl_unblocked: wl_unblocked,
                    blockage_pct,
                    image_path,
                };
                if let Err(e) = sample.validate() {
                    violations.push(format!("line {line}: {e}"));
                } else {
                    samples.push(sample);
                }
            }
            Err(e) => violations.push(format!("line {line}: {e}")),
        }
    }

    if !violations.is_empty() {
        return Err(Error::Validation(format!(
            "{} row(s) rejected:\n  {}",
            violations.len(),
            violations.join("\n  ")
        )));
    }
    Ok(samples)
}

fn resolve_image_path(base: &Path, field: &str) -> PathBuf {
    let p = PathBuf::from(field);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn parse_field(raw: &str, name: &str, line: u64) -> Result<f64> {
    raw.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} value '{raw}' as a number"),
    })
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Load {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        _ => Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        },
    }
}

/// Writes samples in the dataset CSV schema. Output is byte-deterministic
/// for identical inputs; fields are quoted only when they need escaping.
pub fn write_dataset(samples: &[HydraulicSample], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in samples {
        let image = s.image_path.to_string_lossy();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            escape_csv(&s.scenario_id),
            s.upstream_wl_blocked,
            s.upstream_wl_unblocked,
            s.blockage_pct,
            escape_csv(&image)
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn escape_csv(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
