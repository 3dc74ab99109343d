//! Reverse-mode differentiation tape.
//!
//! A [`Graph`] records operations eagerly: each builder method runs the
//! forward computation immediately, stores the result, and remembers how it
//! was produced. [`Graph::backward`] then walks the recorded nodes in reverse
//! and accumulates `∂loss/∂node` for every node below the loss; two paths
//! into the same node sum. The op set is exactly what the two correction
//! networks need — convolution, transposed convolution, ELU, batch
//! normalization, MSE, and the elementwise add/log/power/scale/clamp family
//! used by the domain transfer.
//!
//! Values are either all `f32` or all `f64` per graph; the element type is a
//! compile-time parameter, so the two modes cannot mix.

use alloc::vec;
use alloc::vec::Vec;

use crate::conv;
use crate::error::Error;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

/// Epsilon added to batch variance before the square root.
pub const BN_EPSILON: f64 = 1e-5;

/// Handle to a node in one specific [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

/// Per-channel statistics of one train-mode batch-norm evaluation, reported
/// back so the owner can fold them into running statistics.
pub struct BnBatchStats<E> {
    pub mean: Vec<E>,
    pub var: Vec<E>,
}

enum Op<E> {
    Leaf,
    Conv2d {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
    },
    ConvTranspose2d {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
    },
    Elu {
        input: NodeId,
    },
    BatchNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<E>,
        inv_std: Vec<E>,
        train: bool,
    },
    Add {
        lhs: NodeId,
        rhs: NodeId,
    },
    AddScalar {
        input: NodeId,
    },
    Scale {
        input: NodeId,
        factor: E,
    },
    Ln {
        input: NodeId,
    },
    PowScalar {
        input: NodeId,
        exponent: E,
    },
    Clamp {
        input: NodeId,
        lo: E,
        hi: E,
    },
    Mse {
        lhs: NodeId,
        rhs: NodeId,
    },
}

struct Node<E> {
    value: Tensor<E>,
    op: Op<E>,
}

pub struct Graph<E: Scalar> {
    nodes: Vec<Node<E>>,
    grads: Vec<Option<Tensor<E>>>,
}

impl<E: Scalar> Default for Graph<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Scalar> Graph<E> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert an input tensor (parameter, activation or constant).
    pub fn leaf(&mut self, value: Tensor<E>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<E> {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated by the last [`Graph::backward`] call, `None` for
    /// nodes the loss does not depend on.
    pub fn grad(&self, id: NodeId) -> Option<&Tensor<E>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, value: Tensor<E>, op: Op<E>) -> NodeId {
        debug_assert!(value.all_finite(), "graph op produced a non-finite value");
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
    ) -> Result<NodeId> {
        let out = conv::conv2d_forward(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
        )?;
        Ok(self.push(
            out,
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
            },
        ))
    }

    pub fn conv_transpose2d(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
        stride: usize,
    ) -> Result<NodeId> {
        let out = conv::conv_transpose2d_forward(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
            stride,
        )?;
        Ok(self.push(
            out,
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                stride,
            },
        ))
    }

    /// Exponential linear unit, `x` for `x > 0` and `eˣ − 1` otherwise.
    pub fn elu(&mut self, input: NodeId) -> NodeId {
        let out = self.value(input).map(|x| {
            if x > E::ZERO {
                x
            } else {
                x.exp() - E::ONE
            }
        });
        self.push(out, Op::Elu { input })
    }

    /// Train-mode batch normalization over `(N, H, W)` per channel with the
    /// batch's own statistics; reports those statistics for running-state
    /// updates. Requires at least two samples per channel.
    pub fn batchnorm_train(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
    ) -> Result<(NodeId, BnBatchStats<E>)> {
        let (n, c, h, w) = self.check_bn_args("batchnorm", input, gamma, beta)?;
        let population = n * h * w;
        if population < 2 {
            return Err(Error::BatchTooSmall { population });
        }
        let x = self.value(input);
        let mut mean = vec![E::ZERO; c];
        let mut var = vec![E::ZERO; c];
        let inv_m = E::ONE / E::from_usize(population);
        for ci in 0..c {
            let mut acc = E::ZERO;
            for_channel(x.data(), n, c, h * w, ci, |v| acc += v);
            let mu = acc * inv_m;
            let mut acc2 = E::ZERO;
            for_channel(x.data(), n, c, h * w, ci, |v| {
                let d = v - mu;
                acc2 += d * d;
            });
            mean[ci] = mu;
            var[ci] = acc2 * inv_m;
        }
        let inv_std: Vec<E> = var
            .iter()
            .map(|&v| E::ONE / (v + E::from_f64(BN_EPSILON)).sqrt())
            .collect();
        let out = self.bn_apply(input, gamma, beta, &mean, &inv_std);
        let id = self.push(
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean: mean.clone(),
                inv_std,
                train: true,
            },
        );
        Ok((id, BnBatchStats { mean, var }))
    }

    /// Inference-mode batch normalization with frozen running statistics.
    pub fn batchnorm_infer(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running_mean: &[E],
        running_var: &[E],
    ) -> Result<NodeId> {
        let (_, c, _, _) = self.check_bn_args("batchnorm infer", input, gamma, beta)?;
        if running_mean.len() != c || running_var.len() != c {
            return Err(Error::ChannelMismatch {
                context: "batchnorm infer running stats",
                expected: c,
                found: running_mean.len(),
            });
        }
        let mean = running_mean.to_vec();
        let inv_std: Vec<E> = running_var
            .iter()
            .map(|&v| E::ONE / (v + E::from_f64(BN_EPSILON)).sqrt())
            .collect();
        let out = self.bn_apply(input, gamma, beta, &mean, &inv_std);
        Ok(self.push(
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean,
                inv_std,
                train: false,
            },
        ))
    }

    fn check_bn_args(
        &self,
        context: &'static str,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
    ) -> Result<(usize, usize, usize, usize)> {
        let shape = self.value(input).shape();
        if shape.len() != 4 {
            return Err(Error::ShapeMismatch {
                context,
                expected: vec![0, 0, 0, 0],
                found: shape.to_vec(),
            });
        }
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        for id in [gamma, beta] {
            if self.value(id).shape() != [c] {
                return Err(Error::ShapeMismatch {
                    context,
                    expected: vec![c],
                    found: self.value(id).shape().to_vec(),
                });
            }
        }
        Ok((n, c, h, w))
    }

    fn bn_apply(
        &self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: &[E],
        inv_std: &[E],
    ) -> Tensor<E> {
        let x = self.value(input);
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let shape = x.shape();
        let (n, c, hw) = (shape[0], shape[1], shape[2] * shape[3]);
        let mut out = Tensor::zeros(shape);
        for s in 0..n {
            for ci in 0..c {
                let base = (s * c + ci) * hw;
                let scale = g[ci] * inv_std[ci];
                let shift = b[ci] - mean[ci] * scale;
                for (o, &v) in out.data_mut()[base..base + hw]
                    .iter_mut()
                    .zip(&x.data()[base..base + hw])
                {
                    *o = v * scale + shift;
                }
            }
        }
        out
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let out = self
            .value(lhs)
            .zip(self.value(rhs), "add", |a, b| a + b)?;
        Ok(self.push(out, Op::Add { lhs, rhs }))
    }

    pub fn add_scalar(&mut self, input: NodeId, offset: E) -> NodeId {
        let out = self.value(input).map(|v| v + offset);
        self.push(out, Op::AddScalar { input })
    }

    pub fn scale(&mut self, input: NodeId, factor: E) -> NodeId {
        let out = self.value(input).map(|v| v * factor);
        self.push(out, Op::Scale { input, factor })
    }

    /// Natural logarithm; the input must be strictly positive.
    pub fn ln(&mut self, input: NodeId) -> Result<NodeId> {
        if self.value(input).data().iter().any(|&v| v <= E::ZERO) {
            return Err(Error::InvalidArgument {
                context: "ln",
                message: alloc::string::String::from("input must be strictly positive"),
            });
        }
        let out = self.value(input).map(|v| v.ln());
        Ok(self.push(out, Op::Ln { input }))
    }

    /// Elementwise power with a constant exponent; for non-integer exponents
    /// the input must be non-negative.
    pub fn pow_scalar(&mut self, input: NodeId, exponent: E) -> Result<NodeId> {
        let exp_f64 = exponent.to_f64();
        let is_integer = exp_f64 == libm::trunc(exp_f64);
        if !is_integer && self.value(input).data().iter().any(|&v| v < E::ZERO) {
            return Err(Error::InvalidArgument {
                context: "pow",
                message: alloc::string::String::from(
                    "fractional power of a negative value is undefined",
                ),
            });
        }
        let out = self.value(input).map(|v| v.powf(exponent));
        Ok(self.push(out, Op::PowScalar { input, exponent }))
    }

    /// Clamp into `[lo, hi]`; the backward pass uses subgradient 0 at points
    /// the forward pass moved.
    pub fn clamp(&mut self, input: NodeId, lo: E, hi: E) -> NodeId {
        let out = self.value(input).map(|v| v.maximum(lo).minimum(hi));
        self.push(out, Op::Clamp { input, lo, hi })
    }

    /// Mean squared error with the ½ factor: `(1/2N)·Σ(a−b)²`.
    pub fn mse(&mut self, lhs: NodeId, rhs: NodeId) -> Result<NodeId> {
        let a = self.value(lhs);
        let b = self.value(rhs);
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch {
                context: "mse",
                expected: a.shape().to_vec(),
                found: b.shape().to_vec(),
            });
        }
        let inv_2n = E::ONE / (E::from_usize(2) * E::from_usize(a.len()));
        let mut acc = E::ZERO;
        for (&av, &bv) in a.data().iter().zip(b.data()) {
            let d = av - bv;
            acc += d * d;
        }
        Ok(self.push(Tensor::scalar(acc * inv_2n), Op::Mse { lhs, rhs }))
    }

    /// Reverse pass from a scalar loss node; fills per-node gradients
    /// retrievable through [`Graph::grad`].
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::BackwardBeforeForward);
        }
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::BackwardBeforeForward);
        }
        self.grads = vec![None; self.nodes.len()];
        self.grads[loss.0] = Some(Tensor::scalar(E::ONE));
        for id in (0..=loss.0).rev() {
            let Some(grad_out) = self.grads[id].take() else {
                continue;
            };
            self.step_backward(id, &grad_out)?;
            self.grads[id] = Some(grad_out);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, grad: Tensor<E>) {
        match &mut self.grads[id.0] {
            Some(existing) => existing.add_assign(&grad),
            slot @ None => *slot = Some(grad),
        }
    }

    fn step_backward(&mut self, id: usize, grad_out: &Tensor<E>) -> Result<()> {
        match &self.nodes[id].op {
            Op::Leaf => {}
            Op::Conv2d {
                input,
                weight,
                bias,
                stride,
            } => {
                let (input, weight, bias, stride) = (*input, *weight, *bias, *stride);
                let grads = conv::conv2d_backward(
                    self.value(input),
                    self.value(weight),
                    stride,
                    grad_out,
                )?;
                self.accumulate(input, grads.input);
                self.accumulate(weight, grads.weight);
                if let Some(b) = bias {
                    self.accumulate(b, grads.bias);
                }
            }
            Op::ConvTranspose2d {
                input,
                weight,
                bias,
                stride,
            } => {
                let (input, weight, bias, stride) = (*input, *weight, *bias, *stride);
                let grads = conv::conv_transpose2d_backward(
                    self.value(input),
                    self.value(weight),
                    stride,
                    grad_out,
                )?;
                self.accumulate(input, grads.input);
                self.accumulate(weight, grads.weight);
                if let Some(b) = bias {
                    self.accumulate(b, grads.bias);
                }
            }
            Op::Elu { input } => {
                let input = *input;
                // For x ≤ 0 the output y = eˣ − 1 gives the derivative y + 1.
                let y = &self.nodes[id].value;
                let x = self.value(input);
                let mut grad = Tensor::zeros(x.shape());
                for ((g, &go), (&xv, &yv)) in grad
                    .data_mut()
                    .iter_mut()
                    .zip(grad_out.data())
                    .zip(x.data().iter().zip(y.data()))
                {
                    *g = if xv > E::ZERO { go } else { go * (yv + E::ONE) };
                }
                self.accumulate(input, grad);
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                mean,
                inv_std,
                train,
            } => {
                let (input, gamma, beta, train) = (*input, *gamma, *beta, *train);
                let (mean, inv_std) = (mean.clone(), inv_std.clone());
                let (gi, gg, gb) =
                    self.bn_backward(input, gamma, &mean, &inv_std, train, grad_out);
                self.accumulate(input, gi);
                self.accumulate(gamma, gg);
                self.accumulate(beta, gb);
            }
            Op::Add { lhs, rhs } => {
                let (lhs, rhs) = (*lhs, *rhs);
                self.accumulate(lhs, grad_out.clone());
                self.accumulate(rhs, grad_out.clone());
            }
            Op::AddScalar { input } => {
                let input = *input;
                self.accumulate(input, grad_out.clone());
            }
            Op::Scale { input, factor } => {
                let (input, factor) = (*input, *factor);
                self.accumulate(input, grad_out.map(|g| g * factor));
            }
            Op::Ln { input } => {
                let input = *input;
                let grad = grad_out
                    .zip(self.value(input), "ln backward", |g, x| g / x)
                    .expect("shape fixed by forward");
                self.accumulate(input, grad);
            }
            Op::PowScalar { input, exponent } => {
                let (input, p) = (*input, *exponent);
                let grad = grad_out
                    .zip(self.value(input), "pow backward", |g, x| {
                        g * p * x.powf(p - E::ONE)
                    })
                    .expect("shape fixed by forward");
                self.accumulate(input, grad);
            }
            Op::Clamp { input, lo, hi } => {
                let (input, lo, hi) = (*input, *lo, *hi);
                let grad = grad_out
                    .zip(self.value(input), "clamp backward", |g, x| {
                        if x >= lo && x <= hi {
                            g
                        } else {
                            E::ZERO
                        }
                    })
                    .expect("shape fixed by forward");
                self.accumulate(input, grad);
            }
            Op::Mse { lhs, rhs } => {
                let (lhs, rhs) = (*lhs, *rhs);
                let g = grad_out.data()[0];
                let factor = g / E::from_usize(self.value(lhs).len());
                let diff = self
                    .value(lhs)
                    .zip(self.value(rhs), "mse backward", |a, b| (a - b) * factor)
                    .expect("shape checked by forward");
                let neg = diff.map(|v| -v);
                self.accumulate(lhs, diff);
                self.accumulate(rhs, neg);
            }
        }
        Ok(())
    }

    fn bn_backward(
        &self,
        input: NodeId,
        gamma: NodeId,
        mean: &[E],
        inv_std: &[E],
        train: bool,
        grad_out: &Tensor<E>,
    ) -> (Tensor<E>, Tensor<E>, Tensor<E>) {
        let x = self.value(input);
        let g = self.value(gamma).data();
        let shape = x.shape();
        let (n, c, hw) = (shape[0], shape[1], shape[2] * shape[3]);
        let m = E::from_usize(n * hw);
        let mut grad_input = Tensor::zeros(shape);
        let mut grad_gamma = Tensor::zeros(&[c]);
        let mut grad_beta = Tensor::zeros(&[c]);
        for ci in 0..c {
            // Per-channel sums of dy and dy·x̂.
            let mut sum_dy = E::ZERO;
            let mut sum_dy_xhat = E::ZERO;
            for s in 0..n {
                let base = (s * c + ci) * hw;
                for (&dy, &xv) in grad_out.data()[base..base + hw]
                    .iter()
                    .zip(&x.data()[base..base + hw])
                {
                    let xhat = (xv - mean[ci]) * inv_std[ci];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat;
                }
            }
            grad_gamma.data_mut()[ci] = sum_dy_xhat;
            grad_beta.data_mut()[ci] = sum_dy;
            let scale = g[ci] * inv_std[ci];
            let mean_dy = sum_dy / m;
            let mean_dy_xhat = sum_dy_xhat / m;
            for s in 0..n {
                let base = (s * c + ci) * hw;
                for ((gi, &dy), &xv) in grad_input.data_mut()[base..base + hw]
                    .iter_mut()
                    .zip(&grad_out.data()[base..base + hw])
                    .zip(&x.data()[base..base + hw])
                {
                    *gi = if train {
                        let xhat = (xv - mean[ci]) * inv_std[ci];
                        scale * (dy - mean_dy - xhat * mean_dy_xhat)
                    } else {
                        scale * dy
                    };
                }
            }
        }
        (grad_input, grad_gamma, grad_beta)
    }
}

fn for_channel<E: Scalar>(
    data: &[E],
    n: usize,
    c: usize,
    hw: usize,
    channel: usize,
    mut f: impl FnMut(E),
) {
    for s in 0..n {
        let base = (s * c + channel) * hw;
        for &v in &data[base..base + hw] {
            f(v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn elu_values() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(&[3], vec![0.0f64, 2.5, -1.0]).unwrap());
        let y = g.elu(x);
        let out = g.value(y).data();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 2.5);
        assert!((out[2] - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((out[2] + 0.6321).abs() < 1e-4);
    }

    #[test]
    fn mse_values() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::full(&[4], 0.6f64));
        let b = g.leaf(Tensor::full(&[4], 0.5f64));
        let l = g.mse(a, b).unwrap();
        assert!((g.value(l).data()[0] - 0.005).abs() < 1e-15);
        let same = g.mse(a, a).unwrap();
        assert_eq!(g.value(same).data()[0], 0.0);
    }

    #[test]
    fn mse_rejects_shape_mismatch() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::<f64>::zeros(&[3]));
        let b = g.leaf(Tensor::<f64>::zeros(&[4]));
        assert!(g.mse(a, b).is_err());
    }

    #[test]
    fn mse_gradient_of_half_square() {
        // loss = mse(x, 0) over scalar x = 3 has derivative x = 3.
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0f64));
        let zero = g.leaf(Tensor::scalar(0.0f64));
        let loss = g.mse(x, zero).unwrap();
        g.backward(loss).unwrap();
        assert!((g.grad(x).unwrap().data()[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn backward_needs_scalar_loss() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::<f64>::zeros(&[2, 2]));
        assert!(matches!(
            g.backward(x),
            Err(Error::BackwardBeforeForward)
        ));
    }

    #[test]
    fn batchnorm_normalizes_per_channel() {
        let mut rng = SeededRng::new(17);
        let shape = [2usize, 3, 4, 4];
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.uniform(-2.0, 3.0))
            .collect();
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(&shape, data).unwrap());
        let gamma = g.leaf(Tensor::full(&[3], 1.0f64));
        let beta = g.leaf(Tensor::zeros(&[3]));
        let (y, stats) = g.batchnorm_train(x, gamma, beta).unwrap();
        // Undo the epsilon factor to recover the raw standardized values.
        for ci in 0..3 {
            let correction = (stats.var[ci] + BN_EPSILON).sqrt() / stats.var[ci].sqrt();
            let mut mean = 0.0;
            let mut var = 0.0;
            let mut count = 0.0;
            for s in 0..2 {
                let base = (s * 3 + ci) * 16;
                for &v in &g.value(y).data()[base..base + 16] {
                    mean += v * correction;
                    count += 1.0;
                }
            }
            mean /= count;
            for s in 0..2 {
                let base = (s * 3 + ci) * 16;
                for &v in &g.value(y).data()[base..base + 16] {
                    let d = v * correction - mean;
                    var += d * d;
                }
            }
            var /= count;
            assert!(mean.abs() < 1e-6, "channel {ci} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "channel {ci} var {var}");
        }
    }

    #[test]
    fn batchnorm_zero_gamma_outputs_beta() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(&[1, 2, 2, 2], (0..8).map(|v| v as f64).collect()).unwrap());
        let gamma = g.leaf(Tensor::zeros(&[2]));
        let beta = g.leaf(Tensor::from_vec(&[2], vec![0.7, -0.3]).unwrap());
        let (y, _) = g.batchnorm_train(x, gamma, beta).unwrap();
        for &v in &g.value(y).data()[..4] {
            assert_eq!(v, 0.7);
        }
        for &v in &g.value(y).data()[4..] {
            assert_eq!(v, -0.3);
        }
    }

    #[test]
    fn batchnorm_identity_up_to_epsilon_factor() {
        // Input already zero-mean unit-variance (population statistics):
        // output is input / sqrt(1 + eps).
        let vals = vec![-1.0f64, 1.0, -1.0, 1.0];
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(&[4, 1, 1, 1], vals.clone()).unwrap());
        let gamma = g.leaf(Tensor::full(&[1], 1.0f64));
        let beta = g.leaf(Tensor::zeros(&[1]));
        let (y, _) = g.batchnorm_train(x, gamma, beta).unwrap();
        let factor = 1.0 / (1.0 + BN_EPSILON).sqrt();
        for (&got, &orig) in g.value(y).data().iter().zip(&vals) {
            assert!((got - orig * factor).abs() < 1e-12);
        }
    }

    #[test]
    fn batchnorm_rejects_single_element_population() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::<f64>::zeros(&[1, 2, 1, 1]));
        let gamma = g.leaf(Tensor::full(&[2], 1.0f64));
        let beta = g.leaf(Tensor::zeros(&[2]));
        assert!(matches!(
            g.batchnorm_train(x, gamma, beta),
            Err(Error::BatchTooSmall { population: 1 })
        ));
    }

    #[test]
    fn clamp_blocks_gradient_outside_range() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_vec(&[3], vec![-0.5f64, 0.5, 1.5]).unwrap());
        let y = g.clamp(x, 0.0, 1.0);
        let t = g.leaf(Tensor::zeros(&[3]));
        let loss = g.mse(y, t).unwrap();
        g.backward(loss).unwrap();
        let grad = g.grad(x).unwrap().data();
        assert_eq!(grad[0], 0.0);
        assert!(grad[1] != 0.0);
        assert_eq!(grad[2], 0.0);
    }

    #[test]
    fn gradient_accumulates_over_shared_input() {
        // loss = mse(x + x, 0) = (1/2)(2x)² ⇒ dloss/dx = 4x.
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(1.5f64));
        let two_x = g.add(x, x).unwrap();
        let zero = g.leaf(Tensor::scalar(0.0f64));
        let loss = g.mse(two_x, zero).unwrap();
        g.backward(loss).unwrap();
        assert!((g.grad(x).unwrap().data()[0] - 6.0).abs() < 1e-12);
    }
}
