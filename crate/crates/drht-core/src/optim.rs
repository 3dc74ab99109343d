//! ADAM optimizer, global-norm gradient clipping, and the learning-rate
//! machinery: a phase schedule for the base rate and a stage schedule that
//! progressively unlocks decoder layers while decaying the rates of the
//! groups unlocked earlier.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig<E> {
    pub beta1: E,
    pub beta2: E,
    pub epsilon: E,
}

impl<E: Scalar> Default for AdamConfig<E> {
    fn default() -> Self {
        Self {
            beta1: E::from_f64(0.9),
            beta2: E::from_f64(0.998),
            epsilon: E::from_f64(1e-8),
        }
    }
}

/// First/second moment estimates and step counter for one parameter tensor.
/// The counter only advances when the tensor actually updates, so a group
/// that unfreezes late still gets correct bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<E> {
    m: Tensor<E>,
    v: Tensor<E>,
    t: u64,
}

pub struct Adam<E: Scalar> {
    pub config: AdamConfig<E>,
    states: Vec<AdamState<E>>,
}

impl<E: Scalar> Adam<E> {
    pub fn new(config: AdamConfig<E>, shapes: &[Vec<usize>]) -> Self {
        let states = shapes
            .iter()
            .map(|s| AdamState {
                m: Tensor::zeros(s),
                v: Tensor::zeros(s),
                t: 0,
            })
            .collect();
        Self { config, states }
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn step_counter(&self, index: usize) -> u64 {
        self.states[index].t
    }

    /// Bias-corrected ADAM update of one tensor at `lr × multiplier`.
    /// A zero multiplier freezes the tensor completely: neither the value nor
    /// the moment estimates change.
    pub fn step_param(
        &mut self,
        index: usize,
        name: &str,
        param: &mut Tensor<E>,
        grad: &Tensor<E>,
        lr: E,
        multiplier: E,
    ) -> Result<()> {
        if multiplier == E::ZERO {
            return Ok(());
        }
        if !grad.all_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient for {name}"),
            });
        }
        if grad.shape() != param.shape() {
            return Err(Error::ShapeMismatch {
                context: "adam step",
                expected: param.shape().to_vec(),
                found: grad.shape().to_vec(),
            });
        }
        let state = &mut self.states[index];
        state.t += 1;
        let c = self.config;
        let one = E::ONE;
        let bc1 = one - pow_u(c.beta1, state.t);
        let bc2 = one - pow_u(c.beta2, state.t);
        let step = lr * multiplier;
        for ((p, g), (m, v)) in param
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(state.m.data_mut().iter_mut().zip(state.v.data_mut()))
        {
            *m = c.beta1 * *m + (one - c.beta1) * *g;
            *v = c.beta2 * *v + (one - c.beta2) * *g * *g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= step * m_hat / (v_hat.sqrt() + c.epsilon);
        }
        Ok(())
    }
}

fn pow_u<E: Scalar>(base: E, exp: u64) -> E {
    let mut acc = E::ONE;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Scale all gradients by `max_norm / norm` when the global L2 norm exceeds
/// `max_norm`; returns the pre-clip norm.
pub fn clip_gradients<E: Scalar>(grads: &mut [Tensor<E>], max_norm: E) -> Result<E> {
    if max_norm <= E::ZERO {
        return Err(Error::InvalidArgument {
            context: "clip_gradients",
            message: String::from("max_norm must be positive"),
        });
    }
    let mut sq = E::ZERO;
    for g in grads.iter() {
        sq += g.squared_norm();
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(factor);
        }
    }
    Ok(norm)
}

/// Piecewise-constant base learning rate: `phases[i]` holds for its step
/// count, then the next phase takes over; steps past the end keep the last
/// rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LrPhase {
    pub lr: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub phases: Vec<LrPhase>,
}

impl PhaseSchedule {
    pub fn total_steps(&self) -> usize {
        self.phases.iter().map(|p| p.steps).sum()
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        let mut start = 0;
        for phase in &self.phases {
            if step < start + phase.steps {
                return phase.lr;
            }
            start += phase.steps;
        }
        self.phases.last().map(|p| p.lr).unwrap_or(0.0)
    }
}

/// Hierarchical-supervision staging: `stages` equal slices of the run, where
/// stage `k` (1-based) has decoder layers `1..=k` unlocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSchedule {
    pub stages: usize,
    pub total_steps: usize,
}

impl StageSchedule {
    pub fn new(stages: usize, total_steps: usize) -> Self {
        Self {
            stages,
            total_steps,
        }
    }

    /// 1-based stage index at `step`.
    pub fn stage_at(&self, step: usize) -> usize {
        if self.stages <= 1 || self.total_steps == 0 {
            return self.stages.max(1);
        }
        let per = (self.total_steps / self.stages).max(1);
        (step / per + 1).min(self.stages)
    }

    /// Steps at which a new stage begins (excluding step 0).
    pub fn boundaries(&self) -> Vec<usize> {
        let per = (self.total_steps / self.stages.max(1)).max(1);
        (1..self.stages).map(|k| k * per).collect()
    }
}

/// Learning-rate multiplier groups under hierarchical supervision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// Anything trained from the start of the joint run: the whole first
    /// network and the second network's encoder. Decays 10× per stage.
    Pretrained,
    /// Decoder layer of the second network, indexed from the bottleneck.
    /// Layer `j` unlocks at stage `j+1` with full rate, then decays 10× each
    /// later stage; it is frozen (multiplier 0) before unlocking.
    Decoder { index: usize },
}

/// Multiplier decay applied to a group each time a later stage begins.
pub const STAGE_DECAY: f64 = 0.1;

pub fn group_multiplier(group: ParamGroup, stage: usize) -> f64 {
    debug_assert!(stage >= 1);
    let unlocked_at = match group {
        ParamGroup::Pretrained => 1,
        ParamGroup::Decoder { index } => index + 1,
    };
    if stage < unlocked_at {
        0.0
    } else {
        libm::pow(STAGE_DECAY, (stage - unlocked_at) as f64)
    }
}
