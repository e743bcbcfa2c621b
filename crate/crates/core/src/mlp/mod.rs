//! The regression network: configurable fully-connected architecture,
//! seeded initialization, Adam training on the MAPE loss, and checkpointing.

pub mod checkpoint;
pub mod math;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, TrainProvenance};
pub use math::{backward, fd_gradients, forward, he_init, mape, MlpFloat, Params};

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, ArrayView1, ArrayView2, Axis, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scaler::StandardScaler;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

pub const DEFAULT_EPOCHS: usize = 500;
pub const DEFAULT_LEARNING_RATE: f64 = 0.001;
pub const DEFAULT_BATCH_SIZE: usize = 32;

/// Architecture plus the seed that pins its initial weights. Hidden layers
/// use ReLU; the output is a single affine unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>, seed: u64) -> Self {
        MlpConfig {
            input_dim,
            hidden_sizes,
            seed,
        }
    }

    /// `[input, hidden..., 1]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_sizes.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_sizes);
        dims.push(1);
        dims
    }

    /// Closed-form trainable parameter count: sum over layers of
    /// `fan_in * fan_out + fan_out`.
    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|p| p[0] * p[1] + p[1])
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input width must be at least 1".into()));
        }
        if self.hidden_sizes.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::Config("hidden layers must have at least one node".into()));
        }
        Ok(())
    }
}

/// The three preset architectures, one per backbone feature width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlpPreset {
    Ann1,
    Ann2,
    Ann3,
}

impl MlpPreset {
    pub const ALL: [MlpPreset; 3] = [MlpPreset::Ann1, MlpPreset::Ann2, MlpPreset::Ann3];

    pub fn name(self) -> &'static str {
        match self {
            MlpPreset::Ann1 => "ann1",
            MlpPreset::Ann2 => "ann2",
            MlpPreset::Ann3 => "ann3",
        }
    }

    pub fn config(self, seed: u64) -> MlpConfig {
        let (input_dim, hidden) = match self {
            MlpPreset::Ann1 => (50_176, vec![32, 16, 16, 16, 16]),
            MlpPreset::Ann2 => (100_352, vec![32, 16, 16, 16, 16, 16, 16, 16]),
            MlpPreset::Ann3 => (153_600, vec![32, 16, 16, 16, 16, 16, 16, 16, 16, 16]),
        };
        MlpConfig::new(input_dim, hidden, seed)
    }

    /// Reference totals reported for these presets. They exceed the dense
    /// closed form by 64 / 32 / 32 (< 0.005%) — consistent with some extra
    /// bookkeeping parameters in the originating toolkit that the dense
    /// architecture does not have. The closed form is authoritative here;
    /// these are retained for comparison only.
    pub fn reference_param_count(self) -> usize {
        match self {
            MlpPreset::Ann1 => 1_607_089,
            MlpPreset::Ann2 => 3_213_505,
            MlpPreset::Ann3 => 4_917_985,
        }
    }
}

impl std::str::FromStr for MlpPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ann1" => Ok(MlpPreset::Ann1),
            "ann2" => Ok(MlpPreset::Ann2),
            "ann3" => Ok(MlpPreset::Ann3),
            other => Err(Error::Usage(format!(
                "unknown preset '{other}' (expected ann1, ann2, or ann3)"
            ))),
        }
    }
}

/// A built network. The scaler that standardized its training features
/// travels with the model so a checkpoint is a single self-contained
/// inference artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub config: MlpConfig,
    pub params: Params<f32>,
    pub scaler: Option<StandardScaler>,
}

impl Mlp {
    /// He-initializes a network from `config.seed`.
    pub fn build(config: MlpConfig) -> Result<Mlp> {
        config.validate()?;
        let mut rng = SplitMix64::new(config.seed);
        let params = he_init::<f32>(&config.layer_dims(), &mut rng);
        Ok(Mlp {
            config,
            params,
            scaler: None,
        })
    }

    pub fn with_scaler(mut self, scaler: StandardScaler) -> Mlp {
        self.scaler = Some(scaler);
        self
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    /// Predicts one percentage per row. Rows must already be standardized.
    pub fn predict(&self, x: ArrayView2<'_, f32>) -> Result<Array1<f32>> {
        let out = forward(&self.params, x)?;
        Ok(out.column(0).to_owned())
    }
}

/// Optimization schedule. The learning rate is constant — no decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One row of training telemetry. `val_mape` is absent when no validation
/// split was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mape: f64,
    pub val_mape: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_train_mape(&self) -> Option<f64> {
        self.records.last().map(|r| r.train_mape)
    }

    pub fn final_val_mape(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.val_mape)
    }

    /// CSV with one row per epoch. The seconds column is wall time and is
    /// the one column excluded from byte-determinism guarantees.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,train_mape,val_mape,epoch_seconds\n");
        for r in &self.records {
            let val = r.val_mape.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.epoch, r.train_mape, val, r.seconds);
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

struct AdamState {
    m: Params<f32>,
    v: Params<f32>,
    t: i32,
}

impl AdamState {
    fn new(params: &Params<f32>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Params<f32>, grads: &Params<f32>, lr: f32) {
        self.t += 1;
        let b1 = ADAM_BETA1 as f32;
        let b2 = ADAM_BETA2 as f32;
        let eps = ADAM_EPSILON as f32;
        let bc1 = 1.0 - b1.powi(self.t);
        let bc2 = 1.0 - b2.powi(self.t);
        for l in 0..params.weights.len() {
            adam_update(
                &mut params.weights[l],
                &grads.weights[l],
                &mut self.m.weights[l],
                &mut self.v.weights[l],
                lr,
                (b1, b2, eps, bc1, bc2),
            );
            adam_update(
                &mut params.biases[l],
                &grads.biases[l],
                &mut self.m.biases[l],
                &mut self.v.biases[l],
                lr,
                (b1, b2, eps, bc1, bc2),
            );
        }
    }
}

fn adam_update<D: Dimension>(
    w: &mut ndarray::Array<f32, D>,
    g: &ndarray::Array<f32, D>,
    m: &mut ndarray::Array<f32, D>,
    v: &mut ndarray::Array<f32, D>,
    lr: f32,
    (b1, b2, eps, bc1, bc2): (f32, f32, f32, f32, f32),
) {
    Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *w -= lr * m_hat / (v_hat.sqrt() + eps);
    });
}

/// Trains with shuffled mini-batches for exactly `cfg.epochs` epochs and
/// returns the final-epoch weights — validation is monitoring only, there is
/// no early stopping or weight selection. The batch order is driven solely
/// by `cfg.shuffle_seed`, so (config.seed, shuffle_seed, data) pin the
/// trained model bit-for-bit.
pub fn train(
    mut model: Mlp,
    x_train: ArrayView2<'_, f32>,
    y_train: ArrayView1<'_, f32>,
    val: Option<(ArrayView2<'_, f32>, ArrayView1<'_, f32>)>,
    cfg: &TrainConfig,
) -> Result<(Mlp, TrainHistory)> {
    cfg.validate()?;
    let n = x_train.nrows();
    if x_train.ncols() != model.config.input_dim {
        return Err(Error::Shape {
            expected: model.config.input_dim,
            actual: x_train.ncols(),
            context: "training feature width vs model input".into(),
        });
    }
    if y_train.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: y_train.len(),
            context: "training target count".into(),
        });
    }
    if n < cfg.batch_size {
        return Err(Error::Size(format!(
            "need at least one full batch: {n} row(s) for batch size {}",
            cfg.batch_size
        )));
    }
    if let Some(bad) = y_train.iter().chain(val.iter().flat_map(|(_, y)| y.iter())).find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite training target {bad}")));
    }
    if let Some((xv, yv)) = &val {
        if xv.ncols() != model.config.input_dim {
            return Err(Error::Shape {
                expected: model.config.input_dim,
                actual: xv.ncols(),
                context: "validation feature width vs model input".into(),
            });
        }
        if yv.len() != xv.nrows() {
            return Err(Error::Shape {
                expected: xv.nrows(),
                actual: yv.len(),
                context: "validation target count".into(),
            });
        }
    }

    let lr = cfg.learning_rate as f32;
    let mut rng = SplitMix64::new(cfg.shuffle_seed);
    let mut adam = AdamState::new(&model.params);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        rng.shuffle(&mut indices);
        for batch in indices.chunks(cfg.batch_size) {
            let xb = x_train.select(Axis(0), batch);
            let yb = y_train.select(Axis(0), batch);
            let (_, grads) = backward(&model.params, xb.view(), yb.view())
                .map_err(|e| at_epoch(e, epoch))?;
            adam.step(&mut model.params, &grads, lr);
        }

        let train_mape = epoch_mape(&model, x_train, y_train, epoch)?;
        let val_mape = match &val {
            Some((xv, yv)) => Some(epoch_mape(&model, *xv, *yv, epoch)?),
            None => None,
        };
        history.records.push(EpochRecord {
            epoch,
            train_mape,
            val_mape,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok((model, history))
}

fn epoch_mape(
    model: &Mlp,
    x: ArrayView2<'_, f32>,
    y: ArrayView1<'_, f32>,
    epoch: usize,
) -> Result<f64> {
    let pred = model.predict(x).map_err(|e| at_epoch(e, epoch))?;
    let loss = f64::from(mape(y, pred.view()).map_err(|e| at_epoch(e, epoch))?);
    if !loss.is_finite() {
        return Err(Error::Numeric(format!(
            "training diverged at epoch {epoch} (loss {loss})"
        )));
    }
    Ok(loss)
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}: {msg}")),
        other => other,
    }
}
