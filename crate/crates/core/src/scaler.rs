//! Column-wise standardization fitted on the training split only.
//!
//! Parameters are kept in f64 so the fitted statistics do not depend on the
//! precision of the feature payload; transformed features are returned in
//! f32 to match the network.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose population standard deviation falls below this are treated
/// as constant: their divisor is pinned to 1 so a constant column maps to
/// exactly zero instead of amplifying rounding noise.
pub const DEGENERATE_SD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub means: Vec<f64>,
    /// Population (1/N) standard deviations, with degenerate columns pinned
    /// to 1.0.
    pub sds: Vec<f64>,
    /// Number of rows the statistics were fitted on.
    pub fitted_on: usize,
}

impl StandardScaler {
    /// Fits per-column mean and population standard deviation. Requires at
    /// least two rows; a single row standardizes to all zeros, which hides
    /// bugs rather than surfacing them.
    pub fn fit(data: ArrayView2<'_, f32>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows < 2 {
            return Err(Error::Size(format!(
                "scaler needs at least 2 rows to fit, got {rows}"
            )));
        }
        if let Some((idx, v)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite feature value {v} at row {}, column {}",
                idx.0, idx.1
            )));
        }
        let n = rows as f64;
        let mut means = Vec::with_capacity(cols);
        let mut sds = Vec::with_capacity(cols);
        for col in data.columns() {
            let mut sum = 0.0f64;
            for &v in col.iter() {
                sum += f64::from(v);
            }
            let mean = sum / n;
            let mut ss = 0.0f64;
            for &v in col.iter() {
                let d = f64::from(v) - mean;
                ss += d * d;
            }
            let sd = (ss / n).sqrt();
            means.push(mean);
            sds.push(if sd < DEGENERATE_SD { 1.0 } else { sd });
        }
        Ok(StandardScaler {
            means,
            sds,
            fitted_on: rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    /// Applies `(x - mean) / sd` per column.
    pub fn transform(&self, data: ArrayView2<'_, f32>) -> Result<Array2<f32>> {
        let (rows, cols) = data.dim();
        if cols != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: cols,
                context: "feature width vs fitted scaler".into(),
            });
        }
        let mut out = Array2::<f32>::zeros((rows, cols));
        for ((i, j), v) in data.indexed_iter() {
            out[[i, j]] = ((f64::from(*v) - self.means[j]) / self.sds[j]) as f32;
        }
        Ok(out)
    }
}
