//! The two correction networks and the domain transfer between them.
//!
//! Both networks are fully convolutional encoder-decoders: the encoder
//! compresses the image into a coarse latent representation, the decoder
//! rebuilds it with transposed convolutions, every encoder layer feeds its
//! activation to the mirrored decoder layer (elementwise addition), and a
//! direct input→output skip makes each network learn only a residual.
//!
//! Network one maps a corrupted LDR input to a gamma-compressed HDR estimate.
//! The estimate is expanded back to full radiance by inverse gamma
//! correction, log-compressed and normalized to `[0,1]` — the domain
//! transfer — and network two tone-maps that back into a corrected LDR image.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::graph::{Graph, NodeId};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

/// Fraction of the previous running statistic kept per batch-norm update.
pub const BN_MOMENTUM: f64 = 0.99;

/// Standard deviation of the truncated-normal weight initializer.
pub const INIT_SIGMA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LayerKind {
    Conv,
    Deconv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub has_bn: bool,
    pub has_act: bool,
}

/// Mirror-symmetric encoder-decoder description. `skip_pairs` lists
/// `(encoder index, decoder index)` connections where the encoder layer's
/// output feeds the decoder layer's input; the pair with decoder index 0 is
/// the bottleneck handoff itself, every later pair is an elementwise add.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkSpec {
    pub encoder: Vec<LayerSpec>,
    pub decoder: Vec<LayerSpec>,
    pub skip_pairs: Vec<(usize, usize)>,
    pub residual_io: bool,
}

impl NetworkSpec {
    /// Build a mirrored encoder-decoder spec. `channels[i]`, `kernels[i]` and
    /// `strides[i]` describe encoder layer `i` (input has `in_channels`
    /// channels); the decoder mirrors the list in reverse with transposed
    /// convolutions, and the final layer is linear (no norm, no activation).
    pub fn encoder_decoder(
        in_channels: usize,
        channels: &[usize],
        kernels: &[usize],
        strides: &[usize],
    ) -> Result<Self> {
        let depth = channels.len();
        if depth == 0 || kernels.len() != depth || strides.len() != depth {
            return Err(Error::InvalidSpec {
                detail: String::from("channels, kernels and strides must have equal nonzero length"),
            });
        }
        let ch_in = |i: usize| if i == 0 { in_channels } else { channels[i - 1] };
        let encoder: Vec<LayerSpec> = (0..depth)
            .map(|i| LayerSpec {
                kind: LayerKind::Conv,
                in_channels: ch_in(i),
                out_channels: channels[i],
                kernel: kernels[i],
                stride: strides[i],
                has_bn: true,
                has_act: true,
            })
            .collect();
        let decoder: Vec<LayerSpec> = (0..depth)
            .map(|j| {
                let mirrored = depth - 1 - j;
                let last = j == depth - 1;
                LayerSpec {
                    kind: LayerKind::Deconv,
                    in_channels: channels[mirrored],
                    out_channels: ch_in(mirrored),
                    kernel: kernels[mirrored],
                    stride: strides[mirrored],
                    has_bn: !last,
                    has_act: !last,
                }
            })
            .collect();
        let skip_pairs = (0..depth).map(|j| (depth - 1 - j, j)).collect();
        let spec = Self {
            encoder,
            decoder,
            skip_pairs,
            residual_io: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The default configuration: four encoder levels at 64, 64, 128, 128
    /// channels with 9×9 and 5×5 kernels up front (3×3 elsewhere) and
    /// downsampling in the last two levels.
    pub fn desk() -> Self {
        Self::encoder_decoder(3, &[64, 64, 128, 128], &[9, 5, 3, 3], &[1, 1, 2, 2])
            .expect("builtin spec is valid")
    }

    /// Same topology at 8/8/16/16 channels: the quick-turnaround preset used
    /// by the convergence tests and small CPU runs.
    pub fn tiny() -> Self {
        Self::encoder_decoder(3, &[8, 8, 16, 16], &[9, 5, 3, 3], &[1, 1, 2, 2])
            .expect("builtin spec is valid")
    }

    /// Two-level miniature for gradient checking.
    pub fn micro() -> Self {
        Self::encoder_decoder(3, &[4, 6], &[3, 3], &[1, 2]).expect("builtin spec is valid")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "tiny" => Ok(Self::tiny()),
            "micro" => Ok(Self::micro()),
            other => Err(Error::InvalidSpec {
                detail: format!("unknown network preset '{other}'"),
            }),
        }
    }

    pub fn depth(&self) -> usize {
        self.encoder.len()
    }

    /// Product of encoder strides; input spatial sizes must be multiples.
    pub fn downsample_factor(&self) -> usize {
        self.encoder.iter().map(|l| l.stride).product()
    }

    pub fn input_channels(&self) -> usize {
        self.encoder[0].in_channels
    }

    pub fn validate(&self) -> Result<()> {
        let depth = self.encoder.len();
        if depth == 0 || self.decoder.len() != depth {
            return Err(Error::InvalidSpec {
                detail: String::from("encoder and decoder must have equal nonzero depth"),
            });
        }
        for (i, l) in self.encoder.iter().chain(self.decoder.iter()).enumerate() {
            if l.kernel % 2 == 0 || l.kernel == 0 {
                return Err(Error::InvalidSpec {
                    detail: format!("layer {i}: kernel must be odd, got {}", l.kernel),
                });
            }
            if l.stride != 1 && l.stride != 2 {
                return Err(Error::InvalidSpec {
                    detail: format!("layer {i}: stride must be 1 or 2, got {}", l.stride),
                });
            }
        }
        for i in 1..depth {
            if self.encoder[i].in_channels != self.encoder[i - 1].out_channels {
                return Err(Error::InvalidSpec {
                    detail: format!("encoder layer {i} does not chain from layer {}", i - 1),
                });
            }
        }
        for j in 1..depth {
            if self.decoder[j].in_channels != self.decoder[j - 1].out_channels {
                return Err(Error::InvalidSpec {
                    detail: format!("decoder layer {j} does not chain from layer {}", j - 1),
                });
            }
        }
        // Every encoder layer appears in exactly one skip pair, and each
        // pair's endpoints agree in channels and spatial scale.
        let mut seen_enc = vec![false; depth];
        let mut seen_dec = vec![false; depth];
        for &(e, j) in &self.skip_pairs {
            if e >= depth || j >= depth {
                return Err(Error::InvalidSpec {
                    detail: format!("skip pair ({e},{j}) out of range"),
                });
            }
            if seen_enc[e] || seen_dec[j] {
                return Err(Error::InvalidSpec {
                    detail: format!("skip pair ({e},{j}) reuses an endpoint"),
                });
            }
            seen_enc[e] = true;
            seen_dec[j] = true;
            if self.encoder[e].out_channels != self.decoder[j].in_channels {
                return Err(Error::InvalidSpec {
                    detail: format!(
                        "skip pair ({e},{j}): encoder yields {} channels but decoder takes {}",
                        self.encoder[e].out_channels, self.decoder[j].in_channels
                    ),
                });
            }
            if self.encoder_scale(e) != self.decoder_scale(j) {
                return Err(Error::InvalidSpec {
                    detail: format!(
                        "skip pair ({e},{j}): spatial scales differ ({} vs {})",
                        self.encoder_scale(e),
                        self.decoder_scale(j)
                    ),
                });
            }
        }
        if !seen_enc.iter().all(|&s| s) {
            return Err(Error::InvalidSpec {
                detail: String::from("every encoder layer must participate in one skip pair"),
            });
        }
        if !seen_dec[0] {
            return Err(Error::InvalidSpec {
                detail: String::from("decoder layer 0 must receive the bottleneck"),
            });
        }
        Ok(())
    }

    /// Downsampling factor of encoder layer `e`'s output.
    fn encoder_scale(&self, e: usize) -> usize {
        self.encoder[..=e].iter().map(|l| l.stride).product()
    }

    /// Downsampling factor of decoder layer `j`'s input.
    fn decoder_scale(&self, j: usize) -> usize {
        self.downsample_factor() / self.decoder[..j].iter().map(|l| l.stride).product::<usize>()
    }

    pub fn layer_name(&self, index: usize) -> String {
        let depth = self.depth();
        if index < depth {
            format!("enc{index}")
        } else {
            format!("dec{}", index - depth)
        }
    }
}

/// Learned scale/shift plus the running statistics of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnState<E> {
    pub gamma: Tensor<E>,
    pub beta: Tensor<E>,
    pub running_mean: Vec<E>,
    pub running_var: Vec<E>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<E> {
    pub weight: Tensor<E>,
    pub bias: Tensor<E>,
    pub bn: Option<BnState<E>>,
}

/// All parameters of one network, encoder layers first.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<E> {
    spec: NetworkSpec,
    layers: Vec<LayerParams<E>>,
}

impl<E: Scalar> ModelParams<E> {
    /// Initialize weights from a truncated normal (±2σ) drawn from the seeded
    /// generator; biases zero, batch-norm gamma one / beta zero, running mean
    /// zero / variance one. The same seed always yields identical parameters.
    pub fn init(spec: &NetworkSpec, seed: u64, sigma: f64) -> Result<Self> {
        spec.validate()?;
        let mut rng = SeededRng::new(seed);
        let layers = spec
            .encoder
            .iter()
            .chain(spec.decoder.iter())
            .map(|l| {
                let shape = weight_shape(l);
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| E::from_f64(rng.normal_truncated(sigma, 2.0)))
                    .collect();
                LayerParams {
                    weight: Tensor::from_vec(&shape, data).expect("shape matches count"),
                    bias: Tensor::zeros(&[l.out_channels]),
                    bn: l.has_bn.then(|| BnState {
                        gamma: Tensor::full(&[l.out_channels], E::ONE),
                        beta: Tensor::zeros(&[l.out_channels]),
                        running_mean: vec![E::ZERO; l.out_channels],
                        running_var: vec![E::ONE; l.out_channels],
                    }),
                }
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    /// All-zero weights and biases: the network body vanishes and the
    /// input→output skip makes the whole network the identity map.
    pub fn zeroed(spec: &NetworkSpec) -> Result<Self> {
        Self::init(spec, 0, 0.0)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerParams<E>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams<E>] {
        &mut self.layers
    }

    /// Count of trainable scalars (weights, biases, batch-norm gamma/beta).
    pub fn trainable_param_count(&self) -> usize {
        let mut count = 0;
        self.visit_tensors(|_, _, t| count += t.len());
        count
    }

    /// Visit the trainable tensors in canonical order: per layer, weight then
    /// bias then (if normalized) gamma and beta. The callback receives the
    /// layer index and a short tensor name.
    pub fn visit_tensors(&self, mut f: impl FnMut(usize, &str, &Tensor<E>)) {
        for (i, layer) in self.layers.iter().enumerate() {
            f(i, "weight", &layer.weight);
            f(i, "bias", &layer.bias);
            if let Some(bn) = &layer.bn {
                f(i, "bn_gamma", &bn.gamma);
                f(i, "bn_beta", &bn.beta);
            }
        }
    }

    /// Mutable counterpart of [`ModelParams::visit_tensors`], same order.
    pub fn visit_tensors_mut(&mut self, mut f: impl FnMut(usize, &str, &mut Tensor<E>)) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            f(i, "weight", &mut layer.weight);
            f(i, "bias", &mut layer.bias);
            if let Some(bn) = &mut layer.bn {
                f(i, "bn_gamma", &mut bn.gamma);
                f(i, "bn_beta", &mut bn.beta);
            }
        }
    }

    pub fn tensor_count(&self) -> usize {
        let mut n = 0;
        self.visit_tensors(|_, _, _| n += 1);
        n
    }

    /// Stage every trainable tensor as a graph leaf.
    pub fn stage(&self, g: &mut Graph<E>) -> StagedNetwork {
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            layers.push(StagedLayer {
                weight: g.leaf(layer.weight.clone()),
                bias: g.leaf(layer.bias.clone()),
                bn: layer
                    .bn
                    .as_ref()
                    .map(|bn| (g.leaf(bn.gamma.clone()), g.leaf(bn.beta.clone()))),
            });
        }
        StagedNetwork { layers }
    }

    /// Forward pass that normalizes with batch statistics and folds them into
    /// the running statistics (momentum update).
    pub fn forward_train(
        &mut self,
        g: &mut Graph<E>,
        staged: &StagedNetwork,
        input: NodeId,
    ) -> Result<NodeId> {
        self.forward(g, staged, input, true)
    }

    /// Forward pass that normalizes with the stored running statistics.
    pub fn forward_infer(
        &mut self,
        g: &mut Graph<E>,
        staged: &StagedNetwork,
        input: NodeId,
    ) -> Result<NodeId> {
        self.forward(g, staged, input, false)
    }

    /// Forward pass with explicit batch-norm mode: `bn_train` selects batch
    /// statistics (and updates the running state with the default momentum)
    /// versus running statistics.
    pub fn forward(
        &mut self,
        g: &mut Graph<E>,
        staged: &StagedNetwork,
        input: NodeId,
        train: bool,
    ) -> Result<NodeId> {
        self.forward_with_momentum(g, staged, input, train, E::from_f64(BN_MOMENTUM))
    }

    /// Forward pass with an explicit running-statistics retention factor:
    /// `running ← keep·running + (1−keep)·batch`. A keep factor of 0
    /// overwrites the running statistics with the current batch's, which is
    /// how the post-training calibration pass pools exact statistics.
    pub fn forward_with_momentum(
        &mut self,
        g: &mut Graph<E>,
        staged: &StagedNetwork,
        input: NodeId,
        train: bool,
        keep: E,
    ) -> Result<NodeId> {
        let depth = self.spec.depth();
        debug_assert_eq!(staged.layers.len(), 2 * depth);
        let shape = g.value(input).shape().to_vec();
        if shape.len() != 4 || shape[1] != self.spec.input_channels() {
            return Err(Error::ShapeMismatch {
                context: "network forward",
                expected: vec![0, self.spec.input_channels(), 0, 0],
                found: shape,
            });
        }
        let factor = self.spec.downsample_factor();
        if shape[2] % factor != 0 || shape[3] % factor != 0 {
            return Err(Error::SpatialNotDivisible {
                required: factor,
                height: shape[2],
                width: shape[3],
            });
        }

        let mut skip_source = vec![None; depth];
        for &(enc, dec) in &self.spec.skip_pairs {
            skip_source[dec] = Some(enc);
        }

        let mut enc_outs = Vec::with_capacity(depth);
        let mut x = input;
        for i in 0..depth {
            x = self.apply_layer(g, staged, i, x, train, keep)?;
            enc_outs.push(x);
        }
        // Decoder layer 0 consumes the bottleneck; later layers add the
        // paired encoder activation into their input.
        let mut y = enc_outs[skip_source[0].expect("validated spec")];
        for j in 0..depth {
            if j > 0 {
                if let Some(e) = skip_source[j] {
                    y = g.add(y, enc_outs[e])?;
                }
            }
            y = self.apply_layer(g, staged, depth + j, y, train, keep)?;
        }
        if self.spec.residual_io {
            y = g.add(input, y)?;
        }
        Ok(y)
    }

    fn apply_layer(
        &mut self,
        g: &mut Graph<E>,
        staged: &StagedNetwork,
        index: usize,
        input: NodeId,
        train: bool,
        keep: E,
    ) -> Result<NodeId> {
        let depth = self.spec.depth();
        let spec = if index < depth {
            &self.spec.encoder[index]
        } else {
            &self.spec.decoder[index - depth]
        };
        let ids = &staged.layers[index];
        let mut x = match spec.kind {
            LayerKind::Conv => g.conv2d(input, ids.weight, Some(ids.bias), spec.stride)?,
            LayerKind::Deconv => {
                g.conv_transpose2d(input, ids.weight, Some(ids.bias), spec.stride)?
            }
        };
        if let Some((gamma, beta)) = ids.bn {
            let bn = self.layers[index].bn.as_mut().expect("spec and params agree");
            if train {
                let (out, stats) = g.batchnorm_train(x, gamma, beta)?;
                let take = E::ONE - keep;
                for (r, &b) in bn.running_mean.iter_mut().zip(&stats.mean) {
                    *r = keep * *r + take * b;
                }
                for (r, &b) in bn.running_var.iter_mut().zip(&stats.var) {
                    *r = keep * *r + take * b;
                }
                x = out;
            } else {
                x = g.batchnorm_infer(x, gamma, beta, &bn.running_mean, &bn.running_var)?;
            }
        }
        if spec.has_act {
            x = g.elu(x);
        }
        Ok(x)
    }
}

/// Weight tensor shape for a layer: `[out,in,k,k]` for convolutions and
/// `[in,out,k,k]` for their transposes.
pub fn weight_shape(l: &LayerSpec) -> Vec<usize> {
    match l.kind {
        LayerKind::Conv => vec![l.out_channels, l.in_channels, l.kernel, l.kernel],
        LayerKind::Deconv => vec![l.in_channels, l.out_channels, l.kernel, l.kernel],
    }
}

/// Graph node handles of one staged network, aligned with the layer list.
pub struct StagedLayer {
    pub weight: NodeId,
    pub bias: NodeId,
    pub bn: Option<(NodeId, NodeId)>,
}

pub struct StagedNetwork {
    pub layers: Vec<StagedLayer>,
}

impl StagedNetwork {
    /// Node ids in the same canonical order as
    /// [`ModelParams::visit_tensors`].
    pub fn tensor_ids(&self) -> Vec<NodeId> {
        let mut ids = Vec::new();
        for layer in &self.layers {
            ids.push(layer.weight);
            ids.push(layer.bias);
            if let Some((gamma, beta)) = layer.bn {
                ids.push(gamma);
                ids.push(beta);
            }
        }
        ids
    }
}

/// Constants of the HDR↔LDR domain transfer: gamma compression `α·xᵞ`, the
/// log floor `δ`, and the radiance ceiling `s_max` the normalization maps to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainTransferParams<E> {
    pub alpha: E,
    pub gamma: E,
    pub delta: E,
    pub s_max: E,
}

impl<E: Scalar> Default for DomainTransferParams<E> {
    fn default() -> Self {
        Self {
            alpha: E::from_f64(0.03),
            gamma: E::from_f64(0.45),
            delta: E::from_f64(1.0 / 255.0),
            s_max: E::from_f64(64.0),
        }
    }
}

impl<E: Scalar> DomainTransferParams<E> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > E::ZERO
            && self.gamma > E::ZERO
            && self.gamma < E::ONE
            && self.delta > E::ZERO
            && self.s_max > E::ONE;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument {
                context: "domain transfer",
                message: String::from("require alpha>0, 0<gamma<1, delta>0, s_max>1"),
            })
        }
    }

    /// Gamma compression `α·sᵞ` of non-negative radiance.
    pub fn compress(&self, s: E) -> E {
        self.alpha * s.powf(self.gamma)
    }

    /// Inverse gamma correction `(max(s,0)/α)^(1/γ)` back to full radiance.
    /// Uses the same multiply-by-reciprocal arithmetic as [`Self::apply`] so
    /// the scalar and graph paths agree bit for bit.
    pub fn expand(&self, s: E) -> E {
        (s.maximum(E::ZERO) * (E::ONE / self.alpha)).powf(E::ONE / self.gamma)
    }

    /// Log-compress radiance and normalize: `ln(s+δ)` mapped affinely so that
    /// radiance 0 lands on 0 and `s_max` lands on 1, clamped to `[0,1]`.
    pub fn normalize_log_radiance(&self, s: E) -> E {
        let lo = self.delta.ln();
        let hi = (self.s_max + self.delta).ln();
        let t = ((s + self.delta).ln() - lo) * (E::ONE / (hi - lo));
        t.maximum(E::ZERO).minimum(E::ONE)
    }

    /// Undo [`Self::normalize_log_radiance`] for values inside `[0,1]`.
    pub fn denormalize_log(&self, t: E) -> E {
        let lo = self.delta.ln();
        let hi = (self.s_max + self.delta).ln();
        (t * (hi - lo) + lo).exp() - self.delta
    }

    /// Scalar domain transfer: expand, then normalized log compression.
    pub fn apply_scalar(&self, s_hat: E) -> E {
        self.normalize_log_radiance(self.expand(s_hat))
    }

    /// Differentiable domain transfer on a graph node.
    pub fn apply(&self, g: &mut Graph<E>, s_hat: NodeId) -> Result<NodeId> {
        let clamped = g.clamp(s_hat, E::ZERO, E::from_f64(f64::INFINITY));
        let scaled = g.scale(clamped, E::ONE / self.alpha);
        let full = g.pow_scalar(scaled, E::ONE / self.gamma)?;
        let shifted = g.add_scalar(full, self.delta);
        let logv = g.ln(shifted)?;
        let lo = self.delta.ln();
        let hi = (self.s_max + self.delta).ln();
        let centered = g.add_scalar(logv, -lo);
        let norm = g.scale(centered, E::ONE / (hi - lo));
        Ok(g.clamp(norm, E::ZERO, E::ONE))
    }
}

/// The end-to-end pipeline: estimation network, transfer, correction network.
pub struct DrhtModel<E> {
    pub f1: ModelParams<E>,
    pub f2: ModelParams<E>,
    pub transfer: DomainTransferParams<E>,
}

pub struct DrhtForward {
    /// Gamma-compressed HDR prediction of the first network.
    pub s_hat: NodeId,
    /// Normalized log-domain tensor fed to the second network.
    pub transferred: NodeId,
    /// Corrected LDR output (unclamped in training mode).
    pub i_ldr: NodeId,
}

impl<E: Scalar> DrhtModel<E> {
    /// Training-mode forward: batch statistics, unclamped LDR output.
    pub fn forward_train(
        &mut self,
        g: &mut Graph<E>,
        staged_f1: &StagedNetwork,
        staged_f2: &StagedNetwork,
        input: NodeId,
    ) -> Result<DrhtForward> {
        let s_hat = self.f1.forward_train(g, staged_f1, input)?;
        let transferred = self.transfer.apply(g, s_hat)?;
        let i_ldr = self.f2.forward_train(g, staged_f2, transferred)?;
        Ok(DrhtForward {
            s_hat,
            transferred,
            i_ldr,
        })
    }

    /// Inference-mode forward: running statistics, output clamped to `[0,1]`.
    pub fn forward_infer(&mut self, g: &mut Graph<E>, input: NodeId) -> Result<DrhtForward> {
        let staged_f1 = self.f1.stage(g);
        let staged_f2 = self.f2.stage(g);
        let s_hat = self.f1.forward_infer(g, &staged_f1, input)?;
        let transferred = self.transfer.apply(g, s_hat)?;
        let raw = self.f2.forward_infer(g, &staged_f2, transferred)?;
        let i_ldr = g.clamp(raw, E::ZERO, E::ONE);
        Ok(DrhtForward {
            s_hat,
            transferred,
            i_ldr,
        })
    }
}
