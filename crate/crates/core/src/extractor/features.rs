//! On-disk feature matrices.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! offset 0   magic   b"FVEC"
//! offset 4   u32     format version (1)
//! offset 8   u64     rows
//! offset 16  u64     feature width
//! offset 24  u16     extractor-name length in bytes
//! offset 26  [u8]    extractor name, UTF-8
//! then       [f32]   rows x width values, row-major
//! ```
//!
//! A JSON sidecar at `<file>.json` records where each row came from and the
//! preprocessing recipe, so downstream stages can recover targets and verify
//! compatibility without the images.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::preprocess::PreprocessSpec;

pub const FVEC_MAGIC: [u8; 4] = *b"FVEC";
pub const FVEC_VERSION: u32 = 1;

/// A dense rows-by-width feature matrix tagged with its extractor name.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub extractor: String,
    pub data: Array2<f32>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Provenance for one feature row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub scenario_id: String,
    pub image_path: String,
    pub blockage_pct: f64,
}

/// Sidecar describing a feature file: extraction settings plus per-row
/// provenance (including regression targets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub extractor: String,
    pub feature_dim: usize,
    pub preprocess: PreprocessSpec,
    pub rows: Vec<ManifestRow>,
}

/// Sidecar path for a feature file: the same name with `.json` appended.
pub fn manifest_path(fvec_path: &Path) -> PathBuf {
    let mut os = fvec_path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn write_features(path: &Path, matrix: &FeatureMatrix) -> Result<()> {
    let name = matrix.extractor.as_bytes();
    if name.len() > usize::from(u16::MAX) {
        return Err(Error::Config("extractor name exceeds 65535 bytes".into()));
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(&FVEC_MAGIC)?;
    w.write_all(&FVEC_VERSION.to_le_bytes())?;
    w.write_all(&(matrix.rows() as u64).to_le_bytes())?;
    w.write_all(&(matrix.dim() as u64).to_le_bytes())?;
    w.write_all(&(name.len() as u16).to_le_bytes())?;
    w.write_all(name)?;
    for &v in matrix.data.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

struct CountingReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> CountingReader<R> {
    fn read_exact_at(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        let start = self.offset;
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::Format {
                offset: start,
                message: format!("file truncated while reading {what}"),
            }),
            Err(e) => Err(e.into()),
        }
    }
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut r = CountingReader {
        inner: BufReader::new(file),
        offset: 0,
    };

    let mut magic = [0u8; 4];
    r.read_exact_at(&mut magic, "magic")?;
    if magic != FVEC_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {FVEC_MAGIC:?}"),
        });
    }
    let mut u32buf = [0u8; 4];
    r.read_exact_at(&mut u32buf, "version")?;
    let version = u32::from_le_bytes(u32buf);
    if version != FVEC_VERSION {
        return Err(Error::Format {
            offset: 4,
            message: format!("unsupported version {version}, expected {FVEC_VERSION}"),
        });
    }
    let mut u64buf = [0u8; 8];
    r.read_exact_at(&mut u64buf, "row count")?;
    let rows = u64::from_le_bytes(u64buf);
    r.read_exact_at(&mut u64buf, "feature width")?;
    let dim = u64::from_le_bytes(u64buf);
    let mut u16buf = [0u8; 2];
    r.read_exact_at(&mut u16buf, "name length")?;
    let name_len = u16::from_le_bytes(u16buf);
    let mut name_bytes = vec![0u8; usize::from(name_len)];
    r.read_exact_at(&mut name_bytes, "extractor name")?;
    let extractor = String::from_utf8(name_bytes).map_err(|_| Error::Format {
        offset: 26,
        message: "extractor name is not valid UTF-8".into(),
    })?;

    let count = rows.checked_mul(dim).and_then(|n| {
        usize::try_from(n).ok().filter(|&n| n.checked_mul(4).is_some())
    });
    let Some(count) = count else {
        return Err(Error::Format {
            offset: 8,
            message: format!("{rows} x {dim} values do not fit in memory"),
        });
    };

    let mut values = vec![0.0f32; count];
    let mut chunk = [0u8; 4];
    for v in values.iter_mut() {
        r.read_exact_at(&mut chunk, "feature values")?;
        *v = f32::from_le_bytes(chunk);
    }
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing)? != 0 {
        return Err(Error::Format {
            offset: r.offset,
            message: "trailing bytes after feature payload".into(),
        });
    }

    let data = Array2::from_shape_vec((rows as usize, dim as usize), values)
        .expect("row-major buffer matches declared shape");
    Ok(FeatureMatrix { extractor, data })
}

pub fn write_manifest(fvec_path: &Path, manifest: &FeatureManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Config(format!("manifest serialization failed: {e}")))?;
    std::fs::write(manifest_path(fvec_path), json + "\n")?;
    Ok(())
}

pub fn read_manifest(fvec_path: &Path) -> Result<FeatureManifest> {
    let path = manifest_path(fvec_path);
    let raw = std::fs::read_to_string(&path).map_err(|e| Error::Load {
        path: path.clone(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&raw).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: format!("manifest {}: {e}", path.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample_matrix() -> FeatureMatrix {
        FeatureMatrix {
            extractor: "toy".into(),
            data: array![[1.0f32, -2.5, 3.25], [0.0, f32::MIN_POSITIVE, 1e30]],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        let m = sample_matrix();
        write_features(&path, &m).unwrap();
        let back = read_features(&path).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn frozen_byte_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        let m = FeatureMatrix {
            extractor: "t".into(),
            data: array![[1.0f32, 2.0]],
        };
        write_features(&path, &m).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"FVEC");
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        expected.extend_from_slice(&1u16.to_le_bytes());
        expected.push(b't');
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&2.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        match read_features(&path).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn bad_version_reports_offset_four() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FVEC");
        bytes.extend_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match read_features(&path).unwrap_err() {
            Error::Format { offset, .. } => assert_eq!(offset, 4),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        let m = sample_matrix();
        write_features(&path, &m).unwrap();
        let good = std::fs::read(&path).unwrap();

        std::fs::write(&path, &good[..good.len() - 3]).unwrap();
        match read_features(&path).unwrap_err() {
            Error::Format { offset, message } => {
                assert!(message.contains("truncated"), "{message}");
                assert!(offset > 0);
            }
            other => panic!("expected format error, got {other:?}"),
        }

        let mut padded = good.clone();
        padded.push(0);
        std::fs::write(&path, &padded).unwrap();
        match read_features(&path).unwrap_err() {
            Error::Format { offset, message } => {
                assert_eq!(offset, good.len() as u64);
                assert!(message.contains("trailing"), "{message}");
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        let manifest = FeatureManifest {
            extractor: "toy".into(),
            feature_dim: 3136,
            preprocess: PreprocessSpec::imagenet(224),
            rows: vec![ManifestRow {
                scenario_id: "s0".into(),
                image_path: "images/s0.png".into(),
                blockage_pct: 42.5,
            }],
        };
        write_manifest(&path, &manifest).unwrap();
        assert_eq!(manifest_path(&path), dir.path().join("f.fvec.json"));
        let back = read_manifest(&path).unwrap();
        assert_eq!(back, manifest);
    }

    #[test]
    fn empty_extractor_name_is_allowed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fvec");
        let m = FeatureMatrix {
            extractor: String::new(),
            data: Array2::zeros((2, 3)),
        };
        write_features(&path, &m).unwrap();
        assert_eq!(read_features(&path).unwrap(), m);
    }
}
