//! Regression evaluation bundle (MSLE, MSE, MAE, R², MAPE) plus the CSV
//! emitters behind the scatter and actual-vs-predicted plots.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::math::mape;

/// Flat evaluation record; serializes to a JSON object with exactly these
/// six fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub msle: f64,
    pub mse: f64,
    pub mae: f64,
    pub r2: f64,
    pub mape: f64,
    pub n: usize,
}

fn check_inputs(targets: ArrayView1<'_, f64>, predictions: ArrayView1<'_, f64>) -> Result<()> {
    if targets.len() != predictions.len() {
        return Err(Error::Shape {
            expected: targets.len(),
            actual: predictions.len(),
            context: "prediction count vs target count".into(),
        });
    }
    if let Some(bad) = targets.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!(
            "targets must be finite and non-negative, got {bad}"
        )));
    }
    if let Some(bad) = predictions.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite prediction {bad}")));
    }
    Ok(())
}

/// Computes the full metric bundle over a test set.
///
/// Negative predictions are clamped to zero inside the MSLE logarithm only;
/// every other metric sees them as-is. R² uses the test-set target mean and
/// may be negative.
pub fn evaluate(
    targets: ArrayView1<'_, f64>,
    predictions: ArrayView1<'_, f64>,
) -> Result<EvalReport> {
    check_inputs(targets, predictions)?;
    let n = targets.len();
    if n < 2 {
        return Err(Error::Size(format!(
            "evaluation needs at least 2 samples, got {n}"
        )));
    }

    let nf = n as f64;
    let mut se = 0.0;
    let mut ae = 0.0;
    let mut sle = 0.0;
    for (&y, &p) in targets.iter().zip(predictions.iter()) {
        let d = y - p;
        se += d * d;
        ae += d.abs();
        let dl = (1.0 + y).ln() - (1.0 + p.max(0.0)).ln();
        sle += dl * dl;
    }

    let mean = targets.sum() / nf;
    let ss_tot: f64 = targets.iter().map(|&y| (y - mean) * (y - mean)).sum();
    // Threshold rather than == 0: the mean of n identical values can land an
    // ulp off, leaving a denormal-scale sum of squares.
    if ss_tot < SS_TOT_FLOOR {
        return Err(Error::Numeric(
            "coefficient of determination is undefined for constant targets".into(),
        ));
    }

    Ok(EvalReport {
        msle: sle / nf,
        mse: se / nf,
        mae: ae / nf,
        r2: 1.0 - se / ss_tot,
        mape: mape(targets, predictions)?,
        n,
    })
}

/// Total-sum-of-squares values below this are treated as zero variance.
const SS_TOT_FLOOR: f64 = 1e-12;

/// Least-squares line of predictions against targets: `(slope, intercept)`,
/// or an error when the targets carry no variance to regress on.
fn fit_line(
    targets: ArrayView1<'_, f64>,
    predictions: ArrayView1<'_, f64>,
) -> Result<(f64, f64)> {
    let n = targets.len() as f64;
    let mx = targets.sum() / n;
    let my = predictions.sum() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (&x, &y) in targets.iter().zip(predictions.iter()) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    if var < SS_TOT_FLOOR {
        return Err(Error::Numeric(
            "fitted line is undefined for constant targets".into(),
        ));
    }
    let slope = cov / var;
    Ok((slope, my - slope * mx))
}

/// Writes `actual,predicted` rows plus a fitted-line footer comment, the
/// data behind a predicted-vs-actual scatter plot.
pub fn emit_scatter(
    targets: ArrayView1<'_, f64>,
    predictions: ArrayView1<'_, f64>,
    path: &Path,
) -> Result<()> {
    check_inputs(targets, predictions)?;
    if targets.len() < 2 {
        return Err(Error::Size(format!(
            "scatter output needs at least 2 samples, got {}",
            targets.len()
        )));
    }
    let (slope, intercept) = fit_line(targets, predictions)?;
    let mut out = String::from("actual,predicted\n");
    for (&y, &p) in targets.iter().zip(predictions.iter()) {
        let _ = writeln!(out, "{y},{p}");
    }
    let _ = writeln!(out, "# fit slope={slope} intercept={intercept}");
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes `index,actual,predicted,residual` rows with an over-prediction
/// tally footer. Residual is predicted minus actual, so positive residuals
/// are over-predictions.
pub fn emit_prediction_track(
    targets: ArrayView1<'_, f64>,
    predictions: ArrayView1<'_, f64>,
    path: &Path,
) -> Result<()> {
    check_inputs(targets, predictions)?;
    if targets.is_empty() {
        return Err(Error::Size("prediction track needs at least 1 sample".into()));
    }
    let mut over = 0usize;
    let mut out = String::from("index,actual,predicted,residual\n");
    for (i, (&y, &p)) in targets.iter().zip(predictions.iter()).enumerate() {
        let residual = p - y;
        if residual > 0.0 {
            over += 1;
        }
        let _ = writeln!(out, "{i},{y},{p},{residual}");
    }
    let _ = writeln!(out, "# over_predictions {over} of {}", targets.len());
    std::fs::write(path, out)?;
    Ok(())
}
