//! End-to-end tests of the `drht` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use drht::checkpoint::save_checkpoint;
use drht::ppm::{read_ppm, write_ppm};
use drht_core::model::{DomainTransferParams, ModelParams, NetworkSpec};
use drht_core::scene::LdrImage;
use tempfile::tempdir;

fn drht(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drht"))
        .args(args)
        .current_dir(cwd)
        .env("DRHT_THREADS", "0")
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const MICRO_CONFIG: &str = r#"{
    "data": {"scenes": 2, "scene_width": 32, "scene_height": 16,
             "patch_width": 16, "patch_height": 16},
    "train": {"network": "micro", "batch_size": 2,
              "pretrain_phases": [{"lr": 1e-3, "steps": 4}],
              "joint_phases": [{"lr": 1e-3, "steps": 4}]}
}"#;

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, MICRO_CONFIG).unwrap();
    path
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

#[test]
fn gen_data_tiles_and_reruns_identically() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = drht(
        &["gen-data", "--config", cfg.to_str().unwrap(), "--out-dir", "d1"],
        tmp.path(),
    );
    assert_success(&out);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("d1/dataset.json")).unwrap())
            .unwrap();
    // 2 scenes of 32x16 cut into 16x16 patches: 2 patches each.
    assert_eq!(manifest["triplets"].as_array().unwrap().len(), 4);

    let out = drht(
        &["gen-data", "--config", cfg.to_str().unwrap(), "--out-dir", "d2"],
        tmp.path(),
    );
    assert_success(&out);
    assert_eq!(dir_bytes(&tmp.path().join("d1")), dir_bytes(&tmp.path().join("d2")));
}

#[test]
fn gen_data_rejects_zero_scenes() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = drht(
        &[
            "gen-data",
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            "d",
            "--scenes",
            "0",
        ],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty dataset"));
}

#[test]
fn train_writes_checkpoints_log_and_config_echo() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path());
    assert_success(&drht(
        &["gen-data", "--config", cfg.to_str().unwrap(), "--out-dir", "data"],
        tmp.path(),
    ));
    let out = drht(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            "data",
            "--out",
            "run",
        ],
        tmp.path(),
    );
    assert_success(&out);
    for file in [
        "run/config.json",
        "run/train_log.jsonl",
        "run/pretrain/manifest.json",
        "run/pretrain/params.bin",
        "run/joint/manifest.json",
        "run/joint/params.bin",
    ] {
        assert!(tmp.path().join(file).exists(), "{file} missing");
    }
    // One record per step: 4 pretraining + 4 joint.
    let log = std::fs::read_to_string(tmp.path().join("run/train_log.jsonl")).unwrap();
    assert_eq!(log.trim().lines().count(), 8);

    // Flag overrides beat the file; the resolved echo shows the final value.
    let out = drht(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            "data",
            "--out",
            "run2",
            "--batch-size",
            "1",
            "--pretrain-only",
        ],
        tmp.path(),
    );
    assert_success(&out);
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("run2/config.json")).unwrap())
            .unwrap();
    assert_eq!(echo["train"]["batch_size"], 1);
    assert!(!tmp.path().join("run2/joint").exists());
}

#[test]
fn resume_with_zero_steps_round_trips_the_checkpoint() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path());
    assert_success(&drht(
        &["gen-data", "--config", cfg.to_str().unwrap(), "--out-dir", "data"],
        tmp.path(),
    ));
    assert_success(&drht(
        &["train", "--config", cfg.to_str().unwrap(), "--data", "data", "--out", "run"],
        tmp.path(),
    ));
    // Same config but a joint schedule of zero steps.
    let frozen = MICRO_CONFIG.replace(r#""joint_phases": [{"lr": 1e-3, "steps": 4}]"#,
                                      r#""joint_phases": []"#);
    let frozen_path = tmp.path().join("frozen.json");
    std::fs::write(&frozen_path, frozen).unwrap();
    let out = drht(
        &[
            "train",
            "--config",
            frozen_path.to_str().unwrap(),
            "--data",
            "data",
            "--out",
            "resumed",
            "--resume",
            "run/joint",
        ],
        tmp.path(),
    );
    assert_success(&out);
    for file in ["manifest.json", "params.bin"] {
        let a = std::fs::read(tmp.path().join("run/joint").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("resumed/joint").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs after 0-step resume");
    }
}

#[test]
fn resume_rejects_corrupt_checkpoints() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path());
    assert_success(&drht(
        &["gen-data", "--config", cfg.to_str().unwrap(), "--out-dir", "data"],
        tmp.path(),
    ));
    assert_success(&drht(
        &["train", "--config", cfg.to_str().unwrap(), "--data", "data", "--out", "run"],
        tmp.path(),
    ));
    // Truncate the payload and try to resume.
    let params = tmp.path().join("run/joint/params.bin");
    let bytes = std::fs::read(&params).unwrap();
    std::fs::write(&params, &bytes[..bytes.len() / 3]).unwrap();
    let out = drht(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            "data",
            "--out",
            "r2",
            "--resume",
            "run/joint",
        ],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint integrity"));
}

#[test]
fn infer_with_zero_checkpoint_is_the_domain_transfer() {
    let tmp = tempdir().unwrap();
    let spec = NetworkSpec::micro();
    let transfer = DomainTransferParams::<f32>::default();
    let f1 = ModelParams::<f32>::zeroed(&spec).unwrap();
    let f2 = ModelParams::<f32>::zeroed(&spec).unwrap();
    save_checkpoint(&tmp.path().join("zero"), &[("f1", &f1), ("f2", &f2)], &transfer).unwrap();

    let data: Vec<f32> = (0..3 * 16 * 16).map(|i| (i % 209) as f32 / 208.0).collect();
    let input = LdrImage::from_planar(16, 16, data).unwrap();
    write_ppm(&tmp.path().join("in.ppm"), &input).unwrap();

    let out = drht(
        &[
            "infer",
            "--ckpt",
            "zero",
            "--in",
            "in.ppm",
            "--out",
            "out.ppm",
            "--dump-hdr",
            "s.pfm",
        ],
        tmp.path(),
    );
    assert_success(&out);
    let corrected = read_ppm(&tmp.path().join("out.ppm")).unwrap();
    for (&got, &x) in corrected.data().iter().zip(input.data()) {
        // The input file is 8-bit quantized before the transfer runs.
        let x_quantized = (x * 255.0).round() / 255.0;
        let expected = (transfer.apply_scalar(x_quantized) * 255.0).round() / 255.0;
        assert!((got - expected).abs() < 1e-6);
        assert!((0.0..=1.0).contains(&got));
    }
    assert!(tmp.path().join("s.pfm").exists());
}

#[test]
fn infer_requires_both_networks() {
    let tmp = tempdir().unwrap();
    let spec = NetworkSpec::micro();
    let transfer = DomainTransferParams::<f32>::default();
    let f1 = ModelParams::<f32>::zeroed(&spec).unwrap();
    save_checkpoint(&tmp.path().join("half"), &[("f1", &f1)], &transfer).unwrap();
    let data: Vec<f32> = vec![0.5; 3 * 16 * 16];
    write_ppm(
        &tmp.path().join("in.ppm"),
        &LdrImage::from_planar(16, 16, data).unwrap(),
    )
    .unwrap();
    let out = drht(
        &["infer", "--ckpt", "half", "--in", "in.ppm", "--out", "o.ppm"],
        tmp.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("f2"));
}

#[test]
fn eval_reports_and_exit_codes() {
    let tmp = tempdir().unwrap();
    let data: Vec<f32> = (0..3 * 32 * 32).map(|i| (i % 111) as f32 / 110.0).collect();
    let img = LdrImage::from_planar(32, 32, data).unwrap();
    write_ppm(&tmp.path().join("a.ppm"), &img).unwrap();
    std::fs::write(
        tmp.path().join("pairs.json"),
        r#"{"pairs": [{"image": "a.ppm", "reference": "a.ppm"}]}"#,
    )
    .unwrap();
    let out = drht(
        &["eval", "--pairs", "pairs.json", "--report", "report.json"],
        tmp.path(),
    );
    assert_success(&out);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["mean"]["psnr"], 99.0);
    assert_eq!(report["mean"]["ssim"], 1.0);
    assert!((report["mean"]["fsim"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    // A missing file shows up as a per-image error and a nonzero exit, but
    // the report is still written.
    std::fs::write(
        tmp.path().join("pairs2.json"),
        r#"{"pairs": [{"image": "a.ppm", "reference": "a.ppm"},
                      {"image": "nope.ppm", "reference": "a.ppm"}]}"#,
    )
    .unwrap();
    let out = drht(
        &["eval", "--pairs", "pairs2.json", "--report", "report2.json"],
        tmp.path(),
    );
    assert!(!out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report2.json")).unwrap())
            .unwrap();
    assert!(report["per_image"][1]["error"].is_string());

    // An empty manifest is an error outright.
    std::fs::write(tmp.path().join("pairs3.json"), r#"{"pairs": []}"#).unwrap();
    let out = drht(
        &["eval", "--pairs", "pairs3.json", "--report", "r3.json"],
        tmp.path(),
    );
    assert!(!out.status.success());
}
