//! Command-line surface: dataset generation, training, inference, evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use drht_core::model::{DrhtModel, ModelParams};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{apply_overrides, load_config, ConfigOverrides, TrainConfig};
use crate::dataset::{load_dataset, write_dataset};
use crate::error::{Error, Result};
use crate::eval::run_eval;
use crate::infer::run_inference;
use crate::pfm::write_pfm;
use crate::ppm::{read_ppm, write_ppm};
use crate::trainer::Trainer;

#[derive(Debug, Parser)]
#[command(
    name = "drht",
    about = "HDR-domain correction of under/over-exposed images",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a training dataset of (input, HDR, target-LDR) triplets.
    GenData {
        /// JSON config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the number of scenes.
        #[arg(long)]
        scenes: Option<usize>,
        /// Override the dataset seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Pretrain the HDR estimation network, then train the pair end to end.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset directory produced by gen-data.
        #[arg(long)]
        data: PathBuf,
        /// Run directory for checkpoints, logs and the resolved config.
        #[arg(long)]
        out: PathBuf,
        /// Stop after pretraining the estimation network.
        #[arg(long)]
        pretrain_only: bool,
        /// Continue joint training from an existing checkpoint (skips
        /// pretraining; the checkpoint's transfer constants win).
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Override the network preset from the config.
        #[arg(long)]
        network: Option<String>,
        /// Override the batch size.
        #[arg(long)]
        batch_size: Option<usize>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the HDR-term balance weight.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Correct one image with a trained checkpoint.
    Infer {
        /// Checkpoint directory (must contain both networks).
        #[arg(long)]
        ckpt: PathBuf,
        /// Input PPM image.
        #[arg(long = "in")]
        input: PathBuf,
        /// Output PPM image.
        #[arg(long)]
        out: PathBuf,
        /// Also write the expanded HDR estimate as PFM.
        #[arg(long)]
        dump_hdr: Option<PathBuf>,
    },
    /// Score image pairs with PSNR/SSIM/FSIM and write a JSON report.
    Eval {
        /// JSON manifest: {"pairs": [{"image": ..., "reference": ...}]}.
        #[arg(long)]
        pairs: PathBuf,
        /// Report output path.
        #[arg(long)]
        report: PathBuf,
    },
}

/// `DRHT_THREADS` environment contract: unset or 0 selects the
/// single-threaded deterministic mode (step timings logged as 0); any other
/// value keeps execution single-threaded but records real wall times.
pub fn deterministic_mode() -> Result<bool> {
    match std::env::var("DRHT_THREADS") {
        Err(_) => Ok(true),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) => Ok(true),
            Ok(_) => Ok(false),
            Err(_) => Err(Error::Invalid(format!(
                "DRHT_THREADS must be a non-negative integer, got {s:?}"
            ))),
        },
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            config,
            out_dir,
            scenes,
            seed,
        } => cmd_gen_data(config.as_deref(), &out_dir, scenes, seed),
        Command::Train {
            config,
            data,
            out,
            pretrain_only,
            resume,
            network,
            batch_size,
            seed,
            epsilon,
        } => {
            let overrides = ConfigOverrides {
                network,
                batch_size,
                train_seed: seed,
                epsilon,
                ..Default::default()
            };
            cmd_train(
                config.as_deref(),
                &data,
                &out,
                pretrain_only,
                resume.as_deref(),
                &overrides,
            )
        }
        Command::Infer {
            ckpt,
            input,
            out,
            dump_hdr,
        } => cmd_infer(&ckpt, &input, &out, dump_hdr.as_deref()),
        Command::Eval { pairs, report } => cmd_eval(&pairs, &report),
    }
}

fn cmd_gen_data(
    config: Option<&Path>,
    out_dir: &Path,
    scenes: Option<usize>,
    seed: Option<u64>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    apply_overrides(
        &mut cfg,
        &ConfigOverrides {
            scenes,
            data_seed: seed,
            ..Default::default()
        },
    )?;
    let manifest = write_dataset(out_dir, &cfg)?;
    println!(
        "wrote {} triplets ({} scenes) to {}",
        manifest.triplets.len(),
        cfg.data.scenes,
        out_dir.display()
    );
    Ok(())
}

fn cmd_train(
    config: Option<&Path>,
    data_dir: &Path,
    out: &Path,
    pretrain_only: bool,
    resume: Option<&Path>,
    overrides: &ConfigOverrides,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    apply_overrides(&mut cfg, overrides)?;
    let timing = !deterministic_mode()?;
    let data = load_dataset(data_dir)?;
    fs::create_dir_all(out).map_err(|e| Error::io("create run dir", out, e))?;
    write_resolved_config(out, &cfg)?;
    let log_path = out.join("train_log.jsonl");
    let mut log = fs::File::create(&log_path).map_err(|e| Error::io("create log", &log_path, e))?;
    let trainer = Trainer::new(&cfg, timing);
    let spec = cfg.network_spec()?;

    let (mut f1, mut f2, transfer) = match resume {
        Some(ckpt_dir) => {
            if pretrain_only {
                return Err(Error::Invalid(
                    "--resume skips pretraining; combining it with --pretrain-only does nothing"
                        .into(),
                ));
            }
            let mut loaded = load_checkpoint(ckpt_dir)?;
            let f1 = loaded
                .take_network("f1")
                .ok_or_else(|| Error::Checkpoint("resume checkpoint has no f1 network".into()))?;
            let f2 = match loaded.take_network("f2") {
                Some(f2) => f2,
                None => ModelParams::init(&spec, cfg.train.seed + 1, cfg.train.init_sigma)?,
            };
            (f1, Some(f2), loaded.transfer)
        }
        None => {
            let f1 = ModelParams::init(&spec, cfg.train.seed, cfg.train.init_sigma)?;
            (f1, None, cfg.transfer.to_params())
        }
    };

    if resume.is_none() {
        let result = trainer.pretrain(&mut f1, &data, &mut log);
        // Preserve the last good parameters even when a step diverged.
        save_checkpoint(&out.join("pretrain"), &[("f1", &f1)], &transfer)?;
        result?;
        println!("pretraining finished: {}", out.join("pretrain").display());
    }
    if pretrain_only {
        return Ok(());
    }

    let f2 = match f2.take() {
        Some(f2) => f2,
        None => ModelParams::init(&spec, cfg.train.seed + 1, cfg.train.init_sigma)?,
    };
    let mut model = DrhtModel { f1, f2, transfer };
    let result = trainer.joint(&mut model, &data, &mut log);
    save_checkpoint(
        &out.join("joint"),
        &[("f1", &model.f1), ("f2", &model.f2)],
        &model.transfer,
    )?;
    result?;
    println!("joint training finished: {}", out.join("joint").display());
    Ok(())
}

fn write_resolved_config(out: &Path, cfg: &TrainConfig) -> Result<()> {
    let path = out.join("config.json");
    let text = serde_json::to_string_pretty(cfg)
        .map_err(|e| Error::Invalid(format!("config echo failed: {e}")))?;
    fs::write(&path, text).map_err(|e| Error::io("write resolved config", &path, e))?;
    Ok(())
}

fn cmd_infer(ckpt: &Path, input: &Path, out: &Path, dump_hdr: Option<&Path>) -> Result<()> {
    let mut loaded = load_checkpoint(ckpt)?;
    let f1 = loaded
        .take_network("f1")
        .ok_or_else(|| Error::Checkpoint("checkpoint has no f1 network".into()))?;
    let f2 = loaded.take_network("f2").ok_or_else(|| {
        Error::Checkpoint("checkpoint has no f2 network (pretraining checkpoint?)".into())
    })?;
    let mut model = DrhtModel {
        f1,
        f2,
        transfer: loaded.transfer,
    };
    let image = read_ppm(input)?;
    let product = run_inference(&mut model, &image)?;
    write_ppm(out, &product.corrected)?;
    if let Some(hdr_path) = dump_hdr {
        write_pfm(hdr_path, &product.hdr_estimate)?;
    }
    println!("corrected {} -> {}", input.display(), out.display());
    Ok(())
}

fn cmd_eval(pairs: &Path, report_path: &Path) -> Result<()> {
    let (report, failures) = run_eval(pairs)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Eval(format!("report serialization failed: {e}")))?;
    fs::write(report_path, text).map_err(|e| Error::io("write report", report_path, e))?;
    println!(
        "scored {} pair(s), mean psnr {:.2} dB -> {}",
        report.per_image.len() - failures,
        report.mean.psnr,
        report_path.display()
    );
    if failures > 0 {
        return Err(Error::Eval(format!("{failures} pair(s) failed to evaluate")));
    }
    Ok(())
}
