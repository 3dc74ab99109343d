//! IO, configuration, training orchestration and evaluation around the
//! `drht-core` numerics: PFM/PPM codecs, the checkpoint directory format,
//! dataset synthesis on disk, the training loops with JSON-lines logging,
//! PSNR/SSIM/FSIM quality metrics, and the `drht` command-line tool.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod infer;
pub mod metrics;
pub mod pfm;
pub mod ppm;
pub mod trainer;

pub use error::{Error, Result};
