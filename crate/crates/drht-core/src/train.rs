//! Losses and single optimization steps.
//!
//! The HDR loss is the half-mean-squared error between the first network's
//! prediction and the gamma-compressed ground-truth radiance `α·Yᵞ`. The
//! joint loss adds the LDR reconstruction term against the ground-truth tone
//! mapping, with a balance weight `ε` on the HDR term. Both terms are
//! computed separately and combined at the end, so the decomposition
//! `loss(ε) = loss(0) + ε·loss_hdr` holds exactly in floating point.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::graph::Graph;
use crate::model::{DomainTransferParams, DrhtForward, DrhtModel, ModelParams};
use crate::optim::{clip_gradients, group_multiplier, Adam, ParamGroup};
use crate::scalar::Scalar;
use crate::scene::TrainingTriplet;
use crate::tensor::Tensor;
use crate::Result;

/// Gamma-compressed radiance target `α·Yᵞ`; negative radiance is a data bug.
pub fn hdr_target<E: Scalar>(
    y: &Tensor<E>,
    transfer: &DomainTransferParams<E>,
) -> Result<Tensor<E>> {
    if y.data().iter().any(|&v| v < E::ZERO) {
        return Err(Error::InvalidArgument {
            context: "hdr_target",
            message: String::from("ground-truth radiance contains negative values"),
        });
    }
    Ok(y.map(|v| transfer.compress(v)))
}

/// `(1/2N)·Σ(a−b)²` over same-shape tensors.
pub fn mse_value<E: Scalar>(a: &Tensor<E>, b: &Tensor<E>) -> Result<E> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            context: "mse",
            expected: a.shape().to_vec(),
            found: b.shape().to_vec(),
        });
    }
    let mut acc = E::ZERO;
    for (&av, &bv) in a.data().iter().zip(b.data()) {
        let d = av - bv;
        acc += d * d;
    }
    Ok(acc / (E::from_usize(2) * E::from_usize(a.len())))
}

pub fn loss_hdr_value<E: Scalar>(
    s_hat: &Tensor<E>,
    y: &Tensor<E>,
    transfer: &DomainTransferParams<E>,
) -> Result<E> {
    mse_value(s_hat, &hdr_target(y, transfer)?)
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig<E> {
    /// Balance weight of the HDR term inside the joint loss; zero in
    /// finetune mode.
    pub epsilon: E,
    pub transfer: DomainTransferParams<E>,
}

/// Joint loss `mse(î, i_gt) + ε·mse(ŝ, α·yᵞ)`.
pub fn loss_ldr_value<E: Scalar>(
    i_ldr: &Tensor<E>,
    i_gt: &Tensor<E>,
    s_hat: &Tensor<E>,
    y: &Tensor<E>,
    cfg: &LossConfig<E>,
) -> Result<E> {
    let ldr_term = mse_value(i_ldr, i_gt)?;
    let hdr_term = loss_hdr_value(s_hat, y, &cfg.transfer)?;
    Ok(ldr_term + cfg.epsilon * hdr_term)
}

/// Stack single-image tensors of a batch into `[N, 3, H, W]`.
fn stack<E: Scalar>(parts: Vec<&[E]>, h: usize, w: usize) -> Tensor<E> {
    let n = parts.len();
    let mut data = Vec::with_capacity(n * 3 * h * w);
    for p in parts {
        data.extend_from_slice(p);
    }
    Tensor::from_vec(&[n, 3, h, w], data).expect("image buffers are consistent")
}

/// Batch tensors (input, ground-truth HDR, ground-truth LDR) from triplets,
/// which must share dimensions.
pub fn batch_from_triplets<E: Scalar>(
    triplets: &[&TrainingTriplet<E>],
) -> Result<(Tensor<E>, Tensor<E>, Tensor<E>)> {
    let first = triplets.first().ok_or(Error::InvalidArgument {
        context: "batch_from_triplets",
        message: String::from("empty batch"),
    })?;
    let (w, h) = (first.input.width(), first.input.height());
    for t in triplets {
        if t.input.width() != w
            || t.input.height() != h
            || t.hdr_gt.width() != w
            || t.hdr_gt.height() != h
            || t.ldr_gt.width() != w
            || t.ldr_gt.height() != h
        {
            return Err(Error::InvalidArgument {
                context: "batch_from_triplets",
                message: String::from("triplet dimensions disagree"),
            });
        }
    }
    let input = stack(triplets.iter().map(|t| t.input.data()).collect(), h, w);
    let hdr = stack(triplets.iter().map(|t| t.hdr_gt.data()).collect(), h, w);
    let ldr = stack(triplets.iter().map(|t| t.ldr_gt.data()).collect(), h, w);
    Ok((input, hdr, ldr))
}

/// Per-step report used for logging and convergence checks.
#[derive(Debug, Clone, Copy)]
pub struct StepStats<E> {
    /// Total minimized loss (equals `loss_hdr` during pretraining).
    pub loss_total: E,
    /// HDR reconstruction term.
    pub loss_hdr: E,
    /// LDR reconstruction term (zero during pretraining).
    pub loss_ldr: E,
    /// Global gradient norm before clipping.
    pub grad_norm: E,
}

fn collect_grads<E: Scalar>(
    g: &Graph<E>,
    ids: &[crate::graph::NodeId],
) -> Vec<Tensor<E>> {
    ids.iter()
        .map(|&id| match g.grad(id) {
            Some(t) => t.clone(),
            None => Tensor::zeros(g.value(id).shape()),
        })
        .collect()
}

fn apply_updates<E: Scalar>(
    prefix: &str,
    params: &mut ModelParams<E>,
    opt: &mut Adam<E>,
    state_offset: usize,
    grads: &[Tensor<E>],
    lr: E,
    multipliers: &[E],
) -> Result<()> {
    let spec = params.spec().clone();
    let mut idx = 0;
    let mut result = Ok(());
    params.visit_tensors_mut(|layer, name, tensor| {
        if result.is_err() {
            return;
        }
        let full_name = format!("{prefix}.{}.{name}", spec.layer_name(layer));
        result = opt.step_param(
            state_offset + idx,
            &full_name,
            tensor,
            &grads[idx],
            lr,
            multipliers[idx],
        );
        idx += 1;
    });
    result
}

/// Optimizer sized for one network's trainable tensors.
pub fn adam_for<E: Scalar>(params: &ModelParams<E>) -> Adam<E> {
    let mut shapes = Vec::new();
    params.visit_tensors(|_, _, t| shapes.push(t.shape().to_vec()));
    Adam::new(Default::default(), &shapes)
}

/// Optimizer sized for the concatenated (f1, f2) tensor list.
pub fn adam_for_joint<E: Scalar>(f1: &ModelParams<E>, f2: &ModelParams<E>) -> Adam<E> {
    let mut shapes = Vec::new();
    f1.visit_tensors(|_, _, t| shapes.push(t.shape().to_vec()));
    f2.visit_tensors(|_, _, t| shapes.push(t.shape().to_vec()));
    Adam::new(Default::default(), &shapes)
}

/// One minimization step of the HDR loss for the estimation network.
pub fn pretrain_step<E: Scalar>(
    f1: &mut ModelParams<E>,
    opt: &mut Adam<E>,
    input: &Tensor<E>,
    hdr: &Tensor<E>,
    transfer: &DomainTransferParams<E>,
    lr: E,
    clip_norm: E,
    bn_train: bool,
) -> Result<StepStats<E>> {
    let mut g = Graph::new();
    let staged = f1.stage(&mut g);
    let x = g.leaf(input.clone());
    let target = g.leaf(hdr_target(hdr, transfer)?);
    let s_hat = f1.forward(&mut g, &staged, x, bn_train)?;
    let loss = g.mse(s_hat, target)?;
    let loss_value = g.value(loss).data()[0];
    if !loss_value.is_finite() {
        return Err(Error::NonFinite {
            context: String::from("pretraining loss"),
        });
    }
    g.backward(loss)?;
    let mut grads = collect_grads(&g, &staged.tensor_ids());
    let grad_norm = clip_gradients(&mut grads, clip_norm)?;
    let multipliers = alloc::vec![E::ONE; grads.len()];
    apply_updates("f1", f1, opt, 0, &grads, lr, &multipliers)?;
    Ok(StepStats {
        loss_total: loss_value,
        loss_hdr: loss_value,
        loss_ldr: E::ZERO,
        grad_norm,
    })
}

/// HDR loss of the current parameters without updating anything.
pub fn pretrain_loss<E: Scalar>(
    f1: &mut ModelParams<E>,
    input: &Tensor<E>,
    hdr: &Tensor<E>,
    transfer: &DomainTransferParams<E>,
    bn_train: bool,
) -> Result<E> {
    let mut g = Graph::new();
    let staged = f1.stage(&mut g);
    let x = g.leaf(input.clone());
    let s_hat = f1.forward(&mut g, &staged, x, bn_train)?;
    loss_hdr_value(g.value(s_hat), hdr, transfer)
}

/// Per-tensor learning-rate multipliers for the joint run at `stage`
/// (1-based): the whole first network and the second network's encoder count
/// as pretrained groups; the second network's decoder layers unlock one per
/// stage from the bottleneck outward.
pub fn joint_multipliers<E: Scalar>(
    f1: &ModelParams<E>,
    f2: &ModelParams<E>,
    stage: usize,
) -> Vec<E> {
    let mut out = Vec::new();
    f1.visit_tensors(|_, _, _| {
        out.push(E::from_f64(group_multiplier(ParamGroup::Pretrained, stage)));
    });
    let depth = f2.spec().depth();
    f2.visit_tensors(|layer, _, _| {
        let group = if layer < depth {
            ParamGroup::Pretrained
        } else {
            ParamGroup::Decoder {
                index: layer - depth,
            }
        };
        out.push(E::from_f64(group_multiplier(group, stage)));
    });
    out
}

#[derive(Debug, Clone, Copy)]
pub struct JointStepConfig<E> {
    pub epsilon: E,
    pub lr: E,
    pub clip_norm: E,
    /// 1-based hierarchical-supervision stage.
    pub stage: usize,
    pub bn_train: bool,
}

/// One minimization step of the joint loss through the whole chain.
pub fn joint_step<E: Scalar>(
    model: &mut DrhtModel<E>,
    opt: &mut Adam<E>,
    input: &Tensor<E>,
    hdr: &Tensor<E>,
    ldr_gt: &Tensor<E>,
    cfg: &JointStepConfig<E>,
) -> Result<StepStats<E>> {
    let mut g = Graph::new();
    let staged_f1 = model.f1.stage(&mut g);
    let staged_f2 = model.f2.stage(&mut g);
    let x = g.leaf(input.clone());
    let target = g.leaf(hdr_target(hdr, &model.transfer)?);
    let gt = g.leaf(ldr_gt.clone());

    let s_hat = model.f1.forward(&mut g, &staged_f1, x, cfg.bn_train)?;
    let transferred = model.transfer.apply(&mut g, s_hat)?;
    let i_ldr = model.f2.forward(&mut g, &staged_f2, transferred, cfg.bn_train)?;

    let ldr_term = g.mse(i_ldr, gt)?;
    let hdr_term = g.mse(s_hat, target)?;
    let weighted = g.scale(hdr_term, cfg.epsilon);
    let loss = g.add(ldr_term, weighted)?;
    let loss_value = g.value(loss).data()[0];
    if !loss_value.is_finite() {
        return Err(Error::NonFinite {
            context: String::from("joint loss"),
        });
    }
    let stats = StepStats {
        loss_total: loss_value,
        loss_hdr: g.value(hdr_term).data()[0],
        loss_ldr: g.value(ldr_term).data()[0],
        grad_norm: E::ZERO,
    };
    g.backward(loss)?;

    let mut ids = staged_f1.tensor_ids();
    let f1_count = ids.len();
    ids.extend(staged_f2.tensor_ids());
    let mut grads = collect_grads(&g, &ids);
    let grad_norm = clip_gradients(&mut grads, cfg.clip_norm)?;
    let multipliers = joint_multipliers(&model.f1, &model.f2, cfg.stage);
    apply_updates(
        "f1",
        &mut model.f1,
        opt,
        0,
        &grads[..f1_count],
        cfg.lr,
        &multipliers[..f1_count],
    )?;
    apply_updates(
        "f2",
        &mut model.f2,
        opt,
        f1_count,
        &grads[f1_count..],
        cfg.lr,
        &multipliers[f1_count..],
    )?;
    Ok(StepStats {
        grad_norm,
        ..stats
    })
}

/// Joint loss of the current parameters without updating anything; returns
/// `(total, hdr term, ldr term)` plus the graphless forward product.
pub fn joint_loss<E: Scalar>(
    model: &mut DrhtModel<E>,
    input: &Tensor<E>,
    hdr: &Tensor<E>,
    ldr_gt: &Tensor<E>,
    epsilon: E,
    bn_train: bool,
) -> Result<(E, E, E)> {
    let mut g = Graph::new();
    let staged_f1 = model.f1.stage(&mut g);
    let staged_f2 = model.f2.stage(&mut g);
    let x = g.leaf(input.clone());
    let DrhtForward { s_hat, i_ldr, .. } = {
        let s_hat = model.f1.forward(&mut g, &staged_f1, x, bn_train)?;
        let transferred = model.transfer.apply(&mut g, s_hat)?;
        let i_ldr = model.f2.forward(&mut g, &staged_f2, transferred, bn_train)?;
        DrhtForward {
            s_hat,
            transferred,
            i_ldr,
        }
    };
    let hdr_term = loss_hdr_value(g.value(s_hat), hdr, &model.transfer)?;
    let ldr_term = mse_value(g.value(i_ldr), ldr_gt)?;
    Ok((ldr_term + epsilon * hdr_term, hdr_term, ldr_term))
}
