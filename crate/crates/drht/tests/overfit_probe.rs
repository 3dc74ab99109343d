//! Scratch calibration runs (dev only).
use drht::config::{parse_config, TrainConfig};
use drht::metrics::psnr;
use drht::trainer::Trainer;
use drht_core::model::{DrhtModel, ModelParams};
use drht_core::scene::{make_dataset, LdrImage, TrainingTriplet};
use drht_core::train::*;
use drht_core::Graph;

fn cfg_with(batch: usize, pre: &str, joint: &str) -> TrainConfig {
    parse_config(&format!(r#"{{
        "data": {{"scenes": 8, "scene_width": 64, "scene_height": 64,
                 "patch_width": 64, "patch_height": 64}},
        "train": {{"network": "tiny", "batch_size": {batch},
                  "pretrain_phases": {pre},
                  "joint_phases": {joint}}}
    }}"#)).unwrap()
}

fn train_psnr(model: &mut DrhtModel<f32>, data: &[TrainingTriplet<f32>]) -> f64 {
    let mut acc = 0.0;
    for t in data {
        let mut g = Graph::new();
        let x = g.leaf(t.input.to_tensor());
        let fwd = model.forward_infer(&mut g, x).unwrap();
        let out = LdrImage::from_tensor(g.value(fwd.i_ldr)).unwrap();
        acc += psnr(&out, &t.ldr_gt).unwrap();
    }
    acc / data.len() as f64
}

#[test]
#[ignore]
fn batch8_sweep() {
    let base = cfg_with(8, "[]", "[]");
    let transfer = base.transfer.to_params::<f32>();
    let data = make_dataset::<f32>(&base.data.dataset_config(), &transfer).unwrap();
    let refs: Vec<_> = data.iter().collect();
    let (input, hdr, ldr) = batch_from_triplets(&refs).unwrap();
    let spec = base.network_spec().unwrap();
    let mut sink = std::io::sink();

    let pre_variants = [
        ("P1b8 240@1e-2+60@5e-5", r#"[{"lr":1e-2,"steps":240},{"lr":5e-5,"steps":60}]"#),
        ("P3b8 240@1e-3+60@5e-5", r#"[{"lr":1e-3,"steps":240},{"lr":5e-5,"steps":60}]"#),
    ];
    let mut best: Option<(f32, ModelParams<f32>)> = None;
    for (name, phases) in pre_variants {
        let cfg = cfg_with(8, phases, "[]");
        let mut f1 = ModelParams::<f32>::init(&spec, cfg.train.seed, 0.02).unwrap();
        let initial = pretrain_loss(&mut f1, &input, &hdr, &transfer, true).unwrap();
        let t0 = std::time::Instant::now();
        Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut sink).unwrap();
        let fin = pretrain_loss(&mut f1, &input, &hdr, &transfer, true).unwrap();
        println!("{name}: {initial:.3e} -> {fin:.3e} ({:.0}x) ({:.0}s)", initial / fin, t0.elapsed().as_secs_f64());
        if best.as_ref().map_or(true, |(b, _)| fin < *b) {
            best = Some((fin, f1));
        }
    }
    let (_, best_f1) = best.unwrap();

    let joint_variants = [
        ("Jb8 550@1e-3+50@5e-5", r#"[{"lr":1e-3,"steps":550},{"lr":5e-5,"steps":50}]"#),
    ];
    for (name, phases) in joint_variants {
        let cfg = cfg_with(8, "[]", phases);
        let mut model = DrhtModel {
            f1: best_f1.clone(),
            f2: ModelParams::<f32>::init(&spec, cfg.train.seed + 1, 0.02).unwrap(),
            transfer,
        };
        let (init, ih, il) = joint_loss(&mut model, &input, &hdr, &ldr, 1.0, true).unwrap();
        let t0 = std::time::Instant::now();
        Trainer::new(&cfg, false).joint(&mut model, &data, &mut sink).unwrap();
        let (fin, fh, fl) = joint_loss(&mut model, &input, &hdr, &ldr, 1.0, true).unwrap();
        println!("{name}: {init:.3e} (h {ih:.1e} l {il:.1e}) -> {fin:.3e} (h {fh:.1e} l {fl:.1e}) ({:.0}x)  psnr {:.2}  ({:.0}s)",
                 init / fin, train_psnr(&mut model, &data), t0.elapsed().as_secs_f64());
    }
}

/// Capacity-ceiling probe: joint training with hierarchy disabled (all
/// multipliers 1) to see what the architecture can reach at all.
#[test]
#[ignore]
fn flat_ceiling_probe() {
    use drht_core::optim::clip_gradients;
    let base = cfg_with(8, "[]", "[]");
    let transfer = base.transfer.to_params::<f32>();
    let data = make_dataset::<f32>(&base.data.dataset_config(), &transfer).unwrap();
    let refs: Vec<_> = data.iter().collect();
    let (input, hdr, ldr) = batch_from_triplets(&refs).unwrap();
    let spec = base.network_spec().unwrap();

    // Deep pretrain first.
    let mut f1 = ModelParams::<f32>::init(&spec, 42, 0.02).unwrap();
    let cfg = cfg_with(8, r#"[{"lr":1e-3,"steps":240},{"lr":5e-5,"steps":60}]"#, "[]");
    let mut sink = std::io::sink();
    Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut sink).unwrap();
    let pre = pretrain_loss(&mut f1, &input, &hdr, &transfer, true).unwrap();
    println!("pretrain floor: {pre:.3e}");

    let mut model = DrhtModel {
        f1,
        f2: ModelParams::<f32>::init(&spec, 43, 0.02).unwrap(),
        transfer,
    };
    let mut opt = adam_for_joint(&model.f1, &model.f2);
    let (init, ih, il) = joint_loss(&mut model, &input, &hdr, &ldr, 1.0, true).unwrap();
    println!("flat joint init: {init:.3e} (h {ih:.1e} l {il:.1e})");
    let target = hdr_target(&hdr, &transfer).unwrap();
    let t0 = std::time::Instant::now();
    for step in 0..600usize {
        let lr = if step < 550 { 1e-3 } else { 5e-5 };
        let mut g = Graph::new();
        let s1 = model.f1.stage(&mut g);
        let s2 = model.f2.stage(&mut g);
        let x = g.leaf(input.clone());
        let tgt = g.leaf(target.clone());
        let gt = g.leaf(ldr.clone());
        let s_hat = model.f1.forward(&mut g, &s1, x, true).unwrap();
        let td = model.transfer.apply(&mut g, s_hat).unwrap();
        let i_ldr = model.f2.forward(&mut g, &s2, td, true).unwrap();
        let lt = g.mse(i_ldr, gt).unwrap();
        let ht = g.mse(s_hat, tgt).unwrap();
        let w = g.scale(ht, 1.0);
        let loss = g.add(lt, w).unwrap();
        g.backward(loss).unwrap();
        let mut ids = s1.tensor_ids();
        ids.extend(s2.tensor_ids());
        let mut grads: Vec<_> = ids.iter().map(|&id| g.grad(id).cloned().unwrap()).collect();
        clip_gradients(&mut grads, 5.0).unwrap();
        let mut idx = 0;
        model.f1.visit_tensors_mut(|_, _, t| {
            opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
            idx += 1;
        });
        model.f2.visit_tensors_mut(|_, _, t| {
            opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
            idx += 1;
        });
    }
    let (fin, fh, fl) = joint_loss(&mut model, &input, &hdr, &ldr, 1.0, true).unwrap();
    println!("flat joint 600 steps: {fin:.3e} (h {fh:.1e} l {fl:.1e}) ({:.0}x) psnr {:.2} ({:.0}s)",
             init / fin, train_psnr(&mut model, &data), t0.elapsed().as_secs_f64());
}

/// Long flat run with per-100-step tracing, epsilon/lr variants, and a
/// batch-stat resync before the inference-mode PSNR.
#[test]
#[ignore]
fn floor_probe() {
    use drht_core::optim::clip_gradients;
    let base = cfg_with(8, "[]", "[]");
    let transfer = base.transfer.to_params::<f32>();
    let data = make_dataset::<f32>(&base.data.dataset_config(), &transfer).unwrap();
    let refs: Vec<_> = data.iter().collect();
    let (input, hdr, ldr) = batch_from_triplets(&refs).unwrap();
    let spec = base.network_spec().unwrap();

    let mut f1 = ModelParams::<f32>::init(&spec, 42, 0.02).unwrap();
    let cfg = cfg_with(8, r#"[{"lr":1e-3,"steps":240},{"lr":5e-5,"steps":60}]"#, "[]");
    let mut sink = std::io::sink();
    Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut sink).unwrap();

    for (name, eps, lr0) in [("eps0-lr3e-3", 0.0f32, 3e-3), ("eps0-lr1e-3", 0.0, 1e-3), ("eps1-lr3e-3", 1.0, 3e-3)] {
        let mut model = DrhtModel {
            f1: f1.clone(),
            f2: ModelParams::<f32>::init(&spec, 43, 0.02).unwrap(),
            transfer,
        };
        let mut opt = adam_for_joint(&model.f1, &model.f2);
        let target = hdr_target(&hdr, &transfer).unwrap();
        let t0 = std::time::Instant::now();
        for step in 0..1500usize {
            let lr = if step < 1400 { lr0 } else { 5e-5 };
            let mut g = Graph::new();
            let s1 = model.f1.stage(&mut g);
            let s2 = model.f2.stage(&mut g);
            let x = g.leaf(input.clone());
            let tgt = g.leaf(target.clone());
            let gt = g.leaf(ldr.clone());
            let s_hat = model.f1.forward(&mut g, &s1, x, true).unwrap();
            let td = model.transfer.apply(&mut g, s_hat).unwrap();
            let i_ldr = model.f2.forward(&mut g, &s2, td, true).unwrap();
            let lt = g.mse(i_ldr, gt).unwrap();
            let ht = g.mse(s_hat, tgt).unwrap();
            let w = g.scale(ht, eps);
            let loss = g.add(lt, w).unwrap();
            g.backward(loss).unwrap();
            if step % 150 == 0 {
                println!("  {name} step {step}: total {:.3e} l {:.3e} h {:.3e}",
                    g.value(loss).data()[0], g.value(lt).data()[0], g.value(ht).data()[0]);
            }
            let mut ids = s1.tensor_ids();
            ids.extend(s2.tensor_ids());
            let mut grads: Vec<_> = ids.iter().map(|&id| g.grad(id).cloned().unwrap()).collect();
            clip_gradients(&mut grads, 5.0).unwrap();
            let mut idx = 0;
            model.f1.visit_tensors_mut(|_, _, t| {
                opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
                idx += 1;
            });
            model.f2.visit_tensors_mut(|_, _, t| {
                opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
                idx += 1;
            });
        }
        // Resync BN running stats to the converged model (full-batch pass
        // repeated so the 0.99 momentum converges).
        for _ in 0..600 {
            let mut g = Graph::new();
            let s1 = model.f1.stage(&mut g);
            let s2 = model.f2.stage(&mut g);
            let x = g.leaf(input.clone());
            let s_hat = model.f1.forward(&mut g, &s1, x, true).unwrap();
            let td = model.transfer.apply(&mut g, s_hat).unwrap();
            let _ = model.f2.forward(&mut g, &s2, td, true).unwrap();
        }
        let (fin, fh, fl) = joint_loss(&mut model, &input, &hdr, &ldr, 1.0, true).unwrap();
        println!("{name}: final total {fin:.3e} (h {fh:.1e} l {fl:.1e}) psnr {:.2} ({:.0}s)",
                 train_psnr(&mut model, &data), t0.elapsed().as_secs_f64());
    }
}

/// Epsilon sweep with a staircase rate and exact full-batch stat resync.
#[test]
#[ignore]
fn epsilon_staircase_probe() {
    use drht_core::optim::clip_gradients;
    let base = cfg_with(8, "[]", "[]");
    let transfer = base.transfer.to_params::<f32>();
    let data = make_dataset::<f32>(&base.data.dataset_config(), &transfer).unwrap();
    let refs: Vec<_> = data.iter().collect();
    let (input, hdr, ldr) = batch_from_triplets(&refs).unwrap();
    let spec = base.network_spec().unwrap();

    let mut f1 = ModelParams::<f32>::init(&spec, 42, 0.02).unwrap();
    let cfg = cfg_with(8, r#"[{"lr":1e-3,"steps":240},{"lr":5e-5,"steps":60}]"#, "[]");
    let mut sink = std::io::sink();
    Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut sink).unwrap();

    let staircase = |step: usize| -> f32 {
        match step {
            0..=149 => 3e-3,
            150..=599 => 1e-3,
            600..=849 => 3e-4,
            _ => 1e-4,
        }
    };
    for (name, eps) in [("eps0.1", 0.1f32), ("eps0.25", 0.25), ("eps1.0", 1.0)] {
        let mut model = DrhtModel {
            f1: f1.clone(),
            f2: ModelParams::<f32>::init(&spec, 43, 0.02).unwrap(),
            transfer,
        };
        let mut opt = adam_for_joint(&model.f1, &model.f2);
        let target = hdr_target(&hdr, &transfer).unwrap();
        let t0 = std::time::Instant::now();
        for step in 0..1000usize {
            let lr = staircase(step);
            let mut g = Graph::new();
            let s1 = model.f1.stage(&mut g);
            let s2 = model.f2.stage(&mut g);
            let x = g.leaf(input.clone());
            let tgt = g.leaf(target.clone());
            let gt = g.leaf(ldr.clone());
            let s_hat = model.f1.forward(&mut g, &s1, x, true).unwrap();
            let td = model.transfer.apply(&mut g, s_hat).unwrap();
            let i_ldr = model.f2.forward(&mut g, &s2, td, true).unwrap();
            let lt = g.mse(i_ldr, gt).unwrap();
            let ht = g.mse(s_hat, tgt).unwrap();
            let w = g.scale(ht, eps);
            let loss = g.add(lt, w).unwrap();
            g.backward(loss).unwrap();
            if step % 200 == 0 {
                println!("  {name} step {step}: l {:.3e} h {:.3e}",
                    g.value(lt).data()[0], g.value(ht).data()[0]);
            }
            let mut ids = s1.tensor_ids();
            ids.extend(s2.tensor_ids());
            let mut grads: Vec<_> = ids.iter().map(|&id| g.grad(id).cloned().unwrap()).collect();
            clip_gradients(&mut grads, 5.0).unwrap();
            let mut idx = 0;
            model.f1.visit_tensors_mut(|_, _, t| {
                opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
                idx += 1;
            });
            model.f2.visit_tensors_mut(|_, _, t| {
                opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
                idx += 1;
            });
        }
        // One full-batch pass with keep 0 sets running stats exactly.
        {
            let mut g = Graph::new();
            let s1 = model.f1.stage(&mut g);
            let s2 = model.f2.stage(&mut g);
            let x = g.leaf(input.clone());
            let s_hat = model.f1.forward_with_momentum(&mut g, &s1, x, true, 0.0).unwrap();
            let td = model.transfer.apply(&mut g, s_hat).unwrap();
            let _ = model.f2.forward_with_momentum(&mut g, &s2, td, true, 0.0).unwrap();
        }
        let (fin, fh, fl) = joint_loss(&mut model, &input, &hdr, &ldr, eps, true).unwrap();
        println!("{name}: final total {fin:.3e} (h {fh:.1e} l {fl:.1e}) psnr {:.2} ({:.0}s)",
                 train_psnr(&mut model, &data), t0.elapsed().as_secs_f64());
    }
}

/// The winning flat recipe under the real staged trainer.
#[test]
#[ignore]
fn hierarchy_confirmation() {
    let eps: f64 = std::env::var("PROBE_EPS").map(|v| v.parse().unwrap()).unwrap_or(0.25);
    let joint = std::env::var("PROBE_JOINT").unwrap_or_else(|_| r#"[{"lr":3e-3,"steps":150},{"lr":1e-3,"steps":450},{"lr":3e-4,"steps":250},{"lr":1e-4,"steps":150}]"#.into());
    let cfg = parse_config(&format!(r#"{{
        "data": {{"scenes": 8, "scene_width": 64, "scene_height": 64,
                 "patch_width": 64, "patch_height": 64}},
        "train": {{"network": "tiny", "batch_size": 8, "epsilon": {eps},
                  "pretrain_phases": [{{"lr":1e-3,"steps":240}},{{"lr":5e-5,"steps":60}}],
                  "joint_phases": {joint}}}
    }}"#)).unwrap();
    let transfer = cfg.transfer.to_params::<f32>();
    let data = make_dataset::<f32>(&cfg.data.dataset_config(), &transfer).unwrap();
    let refs: Vec<_> = data.iter().collect();
    let (input, hdr, ldr) = batch_from_triplets(&refs).unwrap();
    let spec = cfg.network_spec().unwrap();
    let mut sink = std::io::sink();

    let t0 = std::time::Instant::now();
    let mut f1 = ModelParams::<f32>::init(&spec, cfg.train.seed, 0.02).unwrap();
    let init_hdr = pretrain_loss(&mut f1, &input, &hdr, &transfer, true).unwrap();
    Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut sink).unwrap();
    let fin_hdr = pretrain_loss(&mut f1, &input, &hdr, &transfer, true).unwrap();
    println!("pretrain: {init_hdr:.3e} -> {fin_hdr:.3e} ({:.0}x)", init_hdr / fin_hdr);

    let mut model = DrhtModel {
        f1,
        f2: ModelParams::<f32>::init(&spec, cfg.train.seed + 1, 0.02).unwrap(),
        transfer,
    };
    let eps32 = eps as f32;
    let (init, _, _) = joint_loss(&mut model, &input, &hdr, &ldr, eps32, true).unwrap();
    Trainer::new(&cfg, false).joint(&mut model, &data, &mut sink).unwrap();
    let (fin, fh, fl) = joint_loss(&mut model, &input, &hdr, &ldr, eps32, true).unwrap();
    println!("hier eps{eps}: {init:.3e} -> {fin:.3e} (h {fh:.1e} l {fl:.1e}) ({:.0}x) psnr {:.2} ({:.0}s total)",
             init / fin, train_psnr(&mut model, &data), t0.elapsed().as_secs_f64());
}

/// Capacity probe: wider nets, flat training, eps 0, gentle cooldown.
#[test]
#[ignore]
fn capacity_probe() {
    use drht_core::optim::clip_gradients;
    use drht_core::model::NetworkSpec;
    let base = cfg_with(8, "[]", "[]");
    let transfer = base.transfer.to_params::<f32>();
    let data = make_dataset::<f32>(&base.data.dataset_config(), &transfer).unwrap();
    let refs: Vec<_> = data.iter().collect();
    let (input, hdr, ldr) = batch_from_triplets(&refs).unwrap();

    let variants: Vec<(&str, NetworkSpec)> = vec![
        ("tiny12-k9", NetworkSpec::encoder_decoder(3, &[12,12,24,24], &[9,5,3,3], &[1,1,2,2]).unwrap()),
        ("tiny16-k5", NetworkSpec::encoder_decoder(3, &[16,16,32,32], &[5,3,3,3], &[1,1,2,2]).unwrap()),
    ];
    for (name, spec) in variants {
        let t0 = std::time::Instant::now();
        let mut f1 = ModelParams::<f32>::init(&spec, 42, 0.02).unwrap();
        let cfg = cfg_with(8, r#"[{"lr":1e-3,"steps":240},{"lr":5e-5,"steps":60}]"#, "[]");
        let mut sink = std::io::sink();
        Trainer::new(&cfg, false).pretrain(&mut f1, &data, &mut sink).unwrap();
        let pre = pretrain_loss(&mut f1, &input, &hdr, &transfer, true).unwrap();
        println!("{name}: pretrain floor {pre:.3e} ({:.0}s)", t0.elapsed().as_secs_f64());

        let mut model = DrhtModel {
            f1,
            f2: ModelParams::<f32>::init(&spec, 43, 0.02).unwrap(),
            transfer,
        };
        let mut opt = adam_for_joint(&model.f1, &model.f2);
        let target = hdr_target(&hdr, &transfer).unwrap();
        let t0 = std::time::Instant::now();
        for step in 0..1000usize {
            let lr = match step { 0..=849 => 1e-3, 850..=949 => 3e-4, _ => 5e-5 };
            let mut g = Graph::new();
            let s1 = model.f1.stage(&mut g);
            let s2 = model.f2.stage(&mut g);
            let x = g.leaf(input.clone());
            let gt = g.leaf(ldr.clone());
            let s_hat = model.f1.forward(&mut g, &s1, x, true).unwrap();
            let td = model.transfer.apply(&mut g, s_hat).unwrap();
            let i_ldr = model.f2.forward(&mut g, &s2, td, true).unwrap();
            let loss = g.mse(i_ldr, gt).unwrap();
            g.backward(loss).unwrap();
            if step % 200 == 0 {
                println!("  {name} step {step}: l {:.3e}", g.value(loss).data()[0]);
            }
            let mut ids = s1.tensor_ids();
            ids.extend(s2.tensor_ids());
            let mut grads: Vec<_> = ids.iter().map(|&id| g.grad(id).cloned().unwrap()).collect();
            clip_gradients(&mut grads, 5.0).unwrap();
            let mut idx = 0;
            model.f1.visit_tensors_mut(|_, _, t| {
                opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
                idx += 1;
            });
            model.f2.visit_tensors_mut(|_, _, t| {
                opt.step_param(idx, "p", t, &grads[idx], lr, 1.0).unwrap();
                idx += 1;
            });
        }
        {
            let mut g = Graph::new();
            let s1 = model.f1.stage(&mut g);
            let s2 = model.f2.stage(&mut g);
            let x = g.leaf(input.clone());
            let s_hat = model.f1.forward_with_momentum(&mut g, &s1, x, true, 0.0).unwrap();
            let td = model.transfer.apply(&mut g, s_hat).unwrap();
            let _ = model.f2.forward_with_momentum(&mut g, &s2, td, true, 0.0).unwrap();
        }
        let (_, _, fl) = joint_loss(&mut model, &input, &hdr, &ldr, 0.0, true).unwrap();
        let _ = target;
        println!("{name}: final l {fl:.3e} psnr {:.2} ({:.0}s joint)",
                 train_psnr(&mut model, &data), t0.elapsed().as_secs_f64());
    }
}
