//! Finite-difference gradient verification harness.
//!
//! Rebuilds a forward graph from perturbed copies of its leaf tensors and
//! compares the analytic gradients of one backward pass against central
//! differences `(f(x+h) − f(x−h)) / 2h` at randomly sampled coordinates.
//! Used by the test suites; lives in the library so every consumer checks
//! gradients the same way.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::graph::{Graph, NodeId};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Default central-difference step for 64-bit checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Default relative-error tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

pub struct GradCheck {
    pub step: f64,
    pub tolerance: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            samples: 120,
            seed: 0x5eed,
        }
    }
}

/// Outcome of one check: the worst relative error and how many coordinates
/// were sampled.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub samples: usize,
}

impl GradCheck {
    /// `build` must run the forward pass from the given leaf values and
    /// return the scalar loss node together with the leaf node ids in the
    /// same order as `leaves`. Returns the worst relative error observed, or
    /// a message naming the first failing coordinate.
    pub fn run(
        &self,
        name: &str,
        leaves: &[Tensor<f64>],
        build: impl Fn(&mut Graph<f64>, &[Tensor<f64>]) -> (NodeId, Vec<NodeId>),
    ) -> Result<GradCheckReport, String> {
        let mut g = Graph::new();
        let (loss, ids) = build(&mut g, leaves);
        if ids.len() != leaves.len() {
            return Err(format!("{name}: build returned {} ids for {} leaves", ids.len(), leaves.len()));
        }
        g.backward(loss).map_err(|e| format!("{name}: backward failed: {e}"))?;
        let analytic: Vec<Tensor<f64>> = ids
            .iter()
            .map(|&id| {
                g.grad(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(g.value(id).shape()))
            })
            .collect();

        let eval = |leaves: &[Tensor<f64>]| -> f64 {
            let mut g = Graph::new();
            let (loss, _) = build(&mut g, leaves);
            g.value(loss).data()[0]
        };

        let mut rng = SeededRng::new(self.seed ^ name.len() as u64);
        let mut worst = 0.0f64;
        for _ in 0..self.samples {
            let li = rng.uniform_usize(leaves.len());
            let ei = rng.uniform_usize(leaves[li].len().max(1));
            let mut plus = leaves.to_vec();
            plus[li].data_mut()[ei] += self.step;
            let mut minus = leaves.to_vec();
            minus[li].data_mut()[ei] -= self.step;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * self.step);
            let a = analytic[li].data()[ei];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            let rel = (a - numeric).abs() / denom;
            if rel >= self.tolerance {
                return Err(format!(
                    "{name}: leaf {li} elem {ei}: analytic {a} vs numeric {numeric} (rel {rel:.3e})"
                ));
            }
            worst = worst.max(rel);
        }
        Ok(GradCheckReport {
            max_relative_error: worst,
            samples: self.samples,
        })
    }
}
