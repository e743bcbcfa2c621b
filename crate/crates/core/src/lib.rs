//! Core library for visual estimation of culvert hydraulic blockage.
//!
//! The pipeline maps a culvert-mouth photograph to a predicted percentage of
//! hydraulic blockage: a convolutional backbone (or a hermetic toy stand-in)
//! turns the image into a flat feature vector, a standard scaler normalizes
//! it with train-split statistics, and a small from-scratch MLP regresses the
//! blockage percentage. Supporting modules cover the hydraulic ground-truth
//! definition, dataset ingest and synthesis, evaluation metrics, binary
//! artifact formats, and a per-stage latency profiler.
//!
//! Everything downstream of image decoding is deterministic: the same seeds
//! and inputs reproduce checkpoints and reports byte for byte.

pub mod dataset;
pub mod error;
pub mod extractor;
pub mod metrics;
pub mod mlp;
pub mod profiler;
pub mod rng;
pub mod scaler;

pub use error::{Error, ExitClass, Result};
