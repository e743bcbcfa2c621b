//! Model persistence.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic   b"MLPC"
//! offset 4   u32     format version (1)
//! offset 8   u32     JSON header length in bytes
//! offset 12  [u8]    header: config, layer dims, scaler, provenance
//! then per layer, in order:
//!            [f32]   weights, fan-out x fan-in row-major
//!            [f32]   biases, fan-out
//! ```
//!
//! The header is pure data — no timestamps, hostnames, or other
//! run-dependent content — so identical training runs serialize to
//! identical bytes.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::math::Params;
use crate::mlp::{Mlp, MlpConfig};
use crate::scaler::StandardScaler;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MLPC";
pub const CHECKPOINT_VERSION: u32 = 1;

/// How the checkpointed weights were produced. All fields are deterministic
/// functions of the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainProvenance {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub final_train_mape: f64,
    pub final_val_mape: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: MlpConfig,
    pub layer_dims: Vec<usize>,
    pub scaler: StandardScaler,
    /// Name of the extractor whose features the model was trained on.
    pub extractor: String,
    pub train: Option<TrainProvenance>,
}

/// Serializes the model with its embedded scaler. Fails if the model has no
/// scaler: a checkpoint must be usable for inference on raw features.
pub fn save_checkpoint(
    path: &Path,
    model: &Mlp,
    extractor: &str,
    train: Option<TrainProvenance>,
) -> Result<()> {
    let scaler = model.scaler.clone().ok_or_else(|| {
        Error::Config("model has no fitted scaler; refusing to write a non-inferable checkpoint".into())
    })?;
    let meta = CheckpointMeta {
        config: model.config.clone(),
        layer_dims: model.config.layer_dims(),
        scaler,
        extractor: extractor.to_string(),
        train,
    };
    write_parts(path, &meta, &model.params)
}

/// Low-level writer, split out so tests can produce deliberately
/// inconsistent files.
pub(crate) fn write_parts(path: &Path, meta: &CheckpointMeta, params: &Params<f32>) -> Result<()> {
    let header = serde_json::to_vec(meta)
        .map_err(|e| Error::Config(format!("header serialization failed: {e}")))?;
    let header_len = u32::try_from(header.len())
        .map_err(|_| Error::Config("header exceeds 4 GiB".into()))?;

    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&header_len.to_le_bytes())?;
    w.write_all(&header)?;
    for l in 0..params.weights.len() {
        for &v in params.weights[l].iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in params.biases[l].iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads and cross-validates a checkpoint. The returned model carries the
/// embedded scaler, so prediction needs no separate artifact.
pub fn load_checkpoint(path: &Path) -> Result<(Mlp, CheckpointMeta)> {
    let file = std::fs::File::open(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut r = BufReader::new(file);
    let mut offset = 0u64;

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, &mut offset, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"),
        });
    }
    let mut u32buf = [0u8; 4];
    read_exact(&mut r, &mut u32buf, &mut offset, "version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}, expected {CHECKPOINT_VERSION}"),
        });
    }
    read_exact(&mut r, &mut u32buf, &mut offset, "header length")?;
    let header_len = u32::from_le_bytes(u32buf) as usize;
    let mut header = vec![0u8; header_len];
    read_exact(&mut r, &mut header, &mut offset, "header")?;
    let meta: CheckpointMeta = serde_json::from_slice(&header).map_err(|e| Error::Format {
        offset: 12,
        message: format!("header is not valid JSON: {e}"),
    })?;

    let declared = meta.config.layer_dims();
    if meta.layer_dims != declared {
        return Err(Error::Format {
            offset: 12,
            message: format!(
                "declared layer dims {:?} disagree with config-derived {:?}",
                meta.layer_dims, declared
            ),
        });
    }
    meta.config.validate().map_err(|e| Error::Format {
        offset: 12,
        message: format!("stored config is invalid: {e}"),
    })?;
    if meta.scaler.dim() != meta.config.input_dim {
        return Err(Error::Format {
            offset: 12,
            message: format!(
                "scaler width {} disagrees with input width {}",
                meta.scaler.dim(),
                meta.config.input_dim
            ),
        });
    }

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for pair in declared.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let mut values = vec![0.0f32; fan_in * fan_out];
        read_f32s(&mut r, &mut values, &mut offset, "layer weights")?;
        weights
            .push(Array2::from_shape_vec((fan_out, fan_in), values).expect("exact length"));
        let mut values = vec![0.0f32; fan_out];
        read_f32s(&mut r, &mut values, &mut offset, "layer biases")?;
        biases.push(Array1::from_vec(values));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format {
            offset,
            message: "trailing bytes after parameter payload".into(),
        });
    }

    let model = Mlp {
        config: meta.config.clone(),
        params: Params { weights, biases },
        scaler: Some(meta.scaler.clone()),
    };
    Ok((model, meta))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    let start = *offset;
    match r.read_exact(buf) {
        Ok(()) => {
            *offset += buf.len() as u64;
            Ok(())
        }
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::Format {
            offset: start,
            message: format!("file truncated while reading {what}"),
        }),
        Err(e) => Err(e.into()),
    }
}

fn read_f32s<R: Read>(r: &mut R, out: &mut [f32], offset: &mut u64, what: &str) -> Result<()> {
    let mut chunk = [0u8; 4];
    for v in out.iter_mut() {
        read_exact(r, &mut chunk, offset, what)?;
        *v = f32::from_le_bytes(chunk);
    }
    Ok(())
}
