//! Core of the reciprocating HDR image-correction pipeline.
//!
//! An under/over-exposed photograph loses detail because the camera response
//! squashes scene radiance into display range. This crate implements the
//! numeric machinery to undo that: an HDR-estimation network recovers the
//! missing detail in the radiance domain, a log-domain transfer compresses it
//! back into a bounded range, and an LDR-correction network tone-maps the
//! result into a displayable image. Everything needed to train the pair from
//! scratch lives here — dense tensors with reverse-mode differentiation for
//! exactly the layer set the networks use, the encoder-decoder assembly with
//! skip connections, the ADAM optimizer with staged learning-rate schedules,
//! and a procedural scene generator that synthesizes training triplets.
//!
//! The crate is `no_std` (alloc only); file formats, logging and the CLI live
//! in the companion `drht` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod conv;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod tensor;
pub mod train;

pub use error::Error;
pub use graph::{Graph, NodeId};
pub use model::{DomainTransferParams, LayerKind, LayerSpec, ModelParams, NetworkSpec};
pub use scalar::Scalar;
pub use scene::{ExposureSimulator, HdrImage, LdrImage, TrainingTriplet};
pub use tensor::Tensor;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
