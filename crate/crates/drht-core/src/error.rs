//! Error type shared by the core modules.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tensor did not have the shape an operation required.
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    /// Channel counts of two operands disagree (e.g. conv input vs. weight).
    ChannelMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// An argument was outside its documented domain.
    InvalidArgument {
        context: &'static str,
        message: String,
    },
    /// A network spec failed validation; `detail` names the offending layer
    /// or skip pair.
    InvalidSpec { detail: String },
    /// Spatial size must be a multiple of the encoder's total downsampling.
    SpatialNotDivisible {
        required: usize,
        height: usize,
        width: usize,
    },
    /// Batch-statistics normalization needs at least two samples per channel.
    BatchTooSmall { population: usize },
    /// A non-finite value appeared where the pipeline requires finite data;
    /// `context` names the producing operation or layer.
    NonFinite { context: String },
    /// Backward was requested on a graph with no recorded loss node, or on a
    /// non-scalar node.
    BackwardBeforeForward,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                context,
                expected,
                found,
            } => write!(
                f,
                "{context}: shape mismatch, expected {expected:?} but found {found:?}"
            ),
            Error::ChannelMismatch {
                context,
                expected,
                found,
            } => write!(
                f,
                "{context}: channel mismatch, expected {expected} but found {found}"
            ),
            Error::InvalidArgument { context, message } => {
                write!(f, "{context}: {message}")
            }
            Error::InvalidSpec { detail } => write!(f, "invalid network spec: {detail}"),
            Error::SpatialNotDivisible {
                required,
                height,
                width,
            } => write!(
                f,
                "spatial size {height}x{width} must be a multiple of {required}"
            ),
            Error::BatchTooSmall { population } => write!(
                f,
                "batch normalization needs at least 2 samples per channel, got {population}"
            ),
            Error::NonFinite { context } => {
                write!(f, "non-finite value produced by {context}")
            }
            Error::BackwardBeforeForward => {
                write!(f, "backward called before a scalar forward pass was recorded")
            }
        }
    }
}

impl core::error::Error for Error {}
