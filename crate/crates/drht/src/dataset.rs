//! On-disk dataset layout.
//!
//! `gen-data` writes one PPM/PFM/PPM file triple per training patch plus a
//! `dataset.json` manifest listing the file names and the exposure offset
//! each input was corrupted with. Regenerating with the same config is
//! byte-identical.

use std::fs;
use std::path::Path;

use drht_core::model::DomainTransferParams;
use drht_core::scene::{make_dataset, TrainingTriplet};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::pfm::{read_pfm, write_pfm};
use crate::ppm::{read_ppm, write_ppm};

pub const MANIFEST_FILE: &str = "dataset.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub patch_width: usize,
    pub patch_height: usize,
    pub seed: u64,
    pub triplets: Vec<TripletEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TripletEntry {
    pub input: String,
    pub hdr: String,
    pub ldr: String,
    pub ev: f64,
}

/// Synthesize the dataset described by `cfg` and write it under `dir`.
pub fn write_dataset(dir: &Path, cfg: &TrainConfig) -> Result<DatasetManifest> {
    let transfer: DomainTransferParams<f32> = cfg.transfer.to_params();
    let triplets = make_dataset::<f32>(&cfg.data.dataset_config(), &transfer)?;
    fs::create_dir_all(dir).map_err(|e| Error::io("create dataset dir", dir, e))?;
    let mut entries = Vec::with_capacity(triplets.len());
    for (i, t) in triplets.iter().enumerate() {
        let input = format!("t{i:04}_in.ppm");
        let hdr = format!("t{i:04}_hdr.pfm");
        let ldr = format!("t{i:04}_gt.ppm");
        write_ppm(&dir.join(&input), &t.input)?;
        write_pfm(&dir.join(&hdr), &t.hdr_gt)?;
        write_ppm(&dir.join(&ldr), &t.ldr_gt)?;
        entries.push(TripletEntry {
            input,
            hdr,
            ldr,
            ev: t.ev,
        });
    }
    let manifest = DatasetManifest {
        patch_width: cfg.data.patch_width,
        patch_height: cfg.data.patch_height,
        seed: cfg.data.seed,
        triplets: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Dataset(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join(MANIFEST_FILE), json)
        .map_err(|e| Error::io("write dataset manifest", dir, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io("read dataset manifest", &path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("manifest parse failed: {e}")))
}

/// Load every triplet referenced by the manifest in `dir`.
pub fn load_dataset(dir: &Path) -> Result<Vec<TrainingTriplet<f32>>> {
    let manifest = read_manifest(dir)?;
    if manifest.triplets.is_empty() {
        return Err(Error::Dataset("manifest lists no triplets".into()));
    }
    let mut out = Vec::with_capacity(manifest.triplets.len());
    for entry in &manifest.triplets {
        if !(-6.0..=3.0).contains(&entry.ev) {
            return Err(Error::Dataset(format!(
                "triplet {} has ev {} outside [-6, 3]",
                entry.input, entry.ev
            )));
        }
        let input = read_ppm(&dir.join(&entry.input))?;
        let hdr_gt = read_pfm(&dir.join(&entry.hdr))?;
        let ldr_gt = read_ppm(&dir.join(&entry.ldr))?;
        if input.width() != hdr_gt.width()
            || input.height() != hdr_gt.height()
            || input.width() != ldr_gt.width()
            || input.height() != ldr_gt.height()
        {
            return Err(Error::Dataset(format!(
                "triplet {} has mismatched dimensions",
                entry.input
            )));
        }
        out.push(TrainingTriplet {
            input,
            hdr_gt,
            ldr_gt,
            ev: entry.ev,
        });
    }
    Ok(out)
}
