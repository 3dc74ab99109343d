//! Training loops: estimation-network pretraining on the HDR loss, then
//! joint end-to-end training of both networks under hierarchical supervision.
//!
//! Every step appends one JSON record to the log. A non-finite loss aborts
//! the run with the parameters rolled back to the last completed step, so the
//! caller can still persist a good checkpoint. With timing suppressed
//! (deterministic mode) the whole loop is a pure function of (config, seed,
//! dataset).

use std::io::Write;
use std::time::Instant;

use drht_core::model::{DrhtModel, ModelParams};
use drht_core::optim::StageSchedule;
use drht_core::rng::SeededRng;
use drht_core::scene::TrainingTriplet;
use drht_core::train::{
    adam_for, adam_for_joint, batch_from_triplets, joint_step, pretrain_step, JointStepConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// One log line per optimization step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: u64,
    /// Hierarchical-supervision stage (0 during pretraining).
    pub stage: u32,
    pub lr: f64,
    /// LDR reconstruction term; absent during pretraining.
    pub loss_ldr: Option<f64>,
    pub loss_hdr: f64,
    pub grad_norm: f64,
    /// Wall time of the step; 0 in deterministic mode so logs reproduce
    /// byte for byte.
    pub wall_ms: f64,
}

pub struct Trainer<'a> {
    pub cfg: &'a TrainConfig,
    /// Record real step durations (off in deterministic mode).
    pub timing: bool,
}

/// Deterministic epoch-shuffled batch iterator.
struct Batcher {
    order: Vec<usize>,
    cursor: usize,
    batch_size: usize,
    rng: SeededRng,
}

impl Batcher {
    fn new(n: usize, batch_size: usize, seed: u64, stream: u64) -> Self {
        Self {
            order: (0..n).collect(),
            cursor: n,
            batch_size: batch_size.min(n).max(1),
            rng: SeededRng::with_stream(seed, stream),
        }
    }

    fn next(&mut self) -> Vec<usize> {
        if self.cursor >= self.order.len() {
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let take = self.batch_size.min(self.order.len() - self.cursor);
        let out = self.order[self.cursor..self.cursor + take].to_vec();
        self.cursor += take;
        out
    }
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a TrainConfig, timing: bool) -> Self {
        Self { cfg, timing }
    }

    /// Deterministic unshuffled batches for the calibration pass.
    fn calibration_batches<'d>(
        &self,
        data: &'d [TrainingTriplet<f32>],
    ) -> Vec<Vec<&'d TrainingTriplet<f32>>> {
        let batch = self.cfg.train.batch_size.min(data.len()).max(1);
        data.chunks(batch).map(|c| c.iter().collect()).collect()
    }

    /// Replace the batch-norm running statistics with the arithmetic mean of
    /// the converged parameters' batch statistics (keep factor `i/(i+1)`
    /// pools exactly over the pass). Training leaves the running statistics
    /// lagging behind the still-moving features; without this pass the
    /// inference-mode network differs from the one that was trained.
    fn recalibrate_f1(&self, f1: &mut ModelParams<f32>, data: &[TrainingTriplet<f32>]) -> Result<()> {
        for (i, refs) in self.calibration_batches(data).into_iter().enumerate() {
            let (input, _, _) = batch_from_triplets(&refs)?;
            let keep = i as f32 / (i as f32 + 1.0);
            let mut g = drht_core::Graph::new();
            let staged = f1.stage(&mut g);
            let x = g.leaf(input);
            f1.forward_with_momentum(&mut g, &staged, x, true, keep)?;
        }
        Ok(())
    }

    fn recalibrate_joint(&self, model: &mut DrhtModel<f32>, data: &[TrainingTriplet<f32>]) -> Result<()> {
        for (i, refs) in self.calibration_batches(data).into_iter().enumerate() {
            let (input, _, _) = batch_from_triplets(&refs)?;
            let keep = i as f32 / (i as f32 + 1.0);
            let mut g = drht_core::Graph::new();
            let staged_f1 = model.f1.stage(&mut g);
            let staged_f2 = model.f2.stage(&mut g);
            let x = g.leaf(input);
            let s_hat = model.f1.forward_with_momentum(&mut g, &staged_f1, x, true, keep)?;
            let transferred = model.transfer.apply(&mut g, s_hat)?;
            model
                .f2
                .forward_with_momentum(&mut g, &staged_f2, transferred, true, keep)?;
        }
        Ok(())
    }

    fn write_record(&self, log: &mut dyn Write, record: &TrainLogRecord) -> Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| Error::Invalid(format!("log serialization failed: {e}")))?;
        writeln!(log, "{line}")
            .map_err(|e| Error::io("append training log", "train_log.jsonl", e))?;
        Ok(())
    }

    /// Minimize the HDR loss of the estimation network over the pretraining
    /// phase schedule.
    pub fn pretrain(
        &self,
        f1: &mut ModelParams<f32>,
        data: &[TrainingTriplet<f32>],
        log: &mut dyn Write,
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Dataset("pretraining needs a non-empty dataset".into()));
        }
        let schedule = self.cfg.pretrain_schedule();
        let transfer = self.cfg.transfer.to_params::<f32>();
        let clip = self.cfg.train.clip_norm as f32;
        let mut opt = adam_for(f1);
        let mut batcher = Batcher::new(data.len(), self.cfg.train.batch_size, self.cfg.train.seed, 2);
        for step in 0..schedule.total_steps() {
            let indices = batcher.next();
            let refs: Vec<&TrainingTriplet<f32>> = indices.iter().map(|&i| &data[i]).collect();
            let (input, hdr, _) = batch_from_triplets(&refs)?;
            let lr = schedule.lr_at(step);
            let snapshot = f1.clone();
            let started = Instant::now();
            let stats = match pretrain_step(
                f1,
                &mut opt,
                &input,
                &hdr,
                &transfer,
                lr as f32,
                clip,
                refs.len() > 1,
            ) {
                Ok(stats) => stats,
                Err(e) => {
                    *f1 = snapshot;
                    return Err(e.into());
                }
            };
            self.write_record(
                log,
                &TrainLogRecord {
                    step: step as u64,
                    stage: 0,
                    lr,
                    loss_ldr: None,
                    loss_hdr: stats.loss_hdr as f64,
                    grad_norm: stats.grad_norm as f64,
                    wall_ms: self.elapsed_ms(started),
                },
            )?;
        }
        self.recalibrate_f1(f1, data)?;
        Ok(())
    }

    /// Minimize the joint loss end to end with staged decoder unlocking.
    pub fn joint(
        &self,
        model: &mut DrhtModel<f32>,
        data: &[TrainingTriplet<f32>],
        log: &mut dyn Write,
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::Dataset("joint training needs a non-empty dataset".into()));
        }
        let schedule = self.cfg.joint_schedule();
        let total = schedule.total_steps();
        let stages = StageSchedule::new(model.f2.spec().depth(), total);
        let clip = self.cfg.train.clip_norm as f32;
        let epsilon = self.cfg.train.epsilon as f32;
        let mut opt = adam_for_joint(&model.f1, &model.f2);
        let mut batcher = Batcher::new(data.len(), self.cfg.train.batch_size, self.cfg.train.seed, 3);
        for step in 0..total {
            let indices = batcher.next();
            let refs: Vec<&TrainingTriplet<f32>> = indices.iter().map(|&i| &data[i]).collect();
            let (input, hdr, ldr) = batch_from_triplets(&refs)?;
            let lr = schedule.lr_at(step);
            let stage = stages.stage_at(step);
            let step_cfg = JointStepConfig {
                epsilon,
                lr: lr as f32,
                clip_norm: clip,
                stage,
                bn_train: refs.len() > 1,
            };
            let snapshot = (model.f1.clone(), model.f2.clone());
            let started = Instant::now();
            let stats = match joint_step(model, &mut opt, &input, &hdr, &ldr, &step_cfg) {
                Ok(stats) => stats,
                Err(e) => {
                    model.f1 = snapshot.0;
                    model.f2 = snapshot.1;
                    return Err(e.into());
                }
            };
            self.write_record(
                log,
                &TrainLogRecord {
                    step: step as u64,
                    stage: stage as u32,
                    lr,
                    loss_ldr: Some(stats.loss_ldr as f64),
                    loss_hdr: stats.loss_hdr as f64,
                    grad_norm: stats.grad_norm as f64,
                    wall_ms: self.elapsed_ms(started),
                },
            )?;
        }
        self.recalibrate_joint(model, data)?;
        Ok(())
    }

    fn elapsed_ms(&self, started: Instant) -> f64 {
        if self.timing {
            started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use drht_core::model::{DomainTransferParams, NetworkSpec};
    use drht_core::scene::make_dataset;

    fn micro_cfg() -> TrainConfig {
        let text = r#"{
            "data": {"scenes": 2, "scene_width": 16, "scene_height": 16,
                     "patch_width": 16, "patch_height": 16},
            "train": {"network": "micro", "batch_size": 2,
                      "pretrain_phases": [{"lr": 1e-3, "steps": 5}],
                      "joint_phases": [{"lr": 1e-3, "steps": 6}]}
        }"#;
        crate::config::parse_config(text).unwrap()
    }

    #[test]
    fn pretrain_emits_one_record_per_step_and_is_deterministic() {
        let cfg = micro_cfg();
        let transfer = cfg.transfer.to_params::<f32>();
        let data = make_dataset::<f32>(&cfg.data.dataset_config(), &transfer).unwrap();
        let spec = NetworkSpec::micro();
        let run = || {
            let mut f1 = ModelParams::<f32>::init(&spec, cfg.train.seed, 0.02).unwrap();
            let mut log = Vec::new();
            Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut log).unwrap();
            (f1, log)
        };
        let (f1a, loga) = run();
        let (f1b, logb) = run();
        assert_eq!(f1a, f1b);
        assert_eq!(loga, logb);
        let lines: Vec<&str> = std::str::from_utf8(&loga).unwrap().trim().lines().collect();
        assert_eq!(lines.len(), 5);
        let rec: TrainLogRecord = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(rec.step, 0);
        assert_eq!(rec.stage, 0);
        assert_eq!(rec.lr, 1e-3);
        assert_eq!(rec.wall_ms, 0.0);
        assert!(rec.loss_ldr.is_none());
    }

    #[test]
    fn joint_log_carries_stages_and_losses() {
        let cfg = micro_cfg();
        let transfer_f32 = cfg.transfer.to_params::<f32>();
        let data = make_dataset::<f32>(&cfg.data.dataset_config(), &transfer_f32).unwrap();
        let spec = NetworkSpec::micro();
        let mut model = DrhtModel {
            f1: ModelParams::<f32>::init(&spec, 1, 0.02).unwrap(),
            f2: ModelParams::<f32>::init(&spec, 2, 0.02).unwrap(),
            transfer: DomainTransferParams::default(),
        };
        let mut log = Vec::new();
        Trainer::new(&cfg, false).joint(&mut model, &data, &mut log).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&log).unwrap().trim().lines().collect();
        assert_eq!(lines.len(), 6);
        // Micro net has a 2-layer decoder: stages 1 and 2 split the run.
        let first: TrainLogRecord = serde_json::from_str(lines[0]).unwrap();
        let last: TrainLogRecord = serde_json::from_str(lines[5]).unwrap();
        assert_eq!(first.stage, 1);
        assert_eq!(last.stage, 2);
        assert!(first.loss_ldr.is_some());
    }
}
