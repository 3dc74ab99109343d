//! Pairwise quality evaluation driven by a JSON manifest.
//!
//! The manifest lists `{image, reference}` path pairs (relative paths resolve
//! against the manifest's directory). Unreadable or mismatched pairs are
//! recorded as per-image error entries; the mean covers the scored pairs.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::metrics::{fsim, psnr, ssim, MeanScores, MetricReport, PerImage};
use crate::ppm::read_ppm;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsManifest {
    pub pairs: Vec<PairEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub image: String,
    pub reference: String,
}

/// Returns the report plus the number of failed pairs.
pub fn run_eval(manifest_path: &Path) -> Result<(MetricReport, usize)> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| Error::io("read pairs manifest", manifest_path, e))?;
    let manifest: PairsManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Eval(format!("pairs manifest parse failed: {e}")))?;
    if manifest.pairs.is_empty() {
        return Err(Error::Eval("pairs manifest lists no image pairs".into()));
    }
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut per_image = Vec::with_capacity(manifest.pairs.len());
    let mut sums = MeanScores::default();
    let mut scored = 0usize;
    let mut failures = 0usize;
    for pair in &manifest.pairs {
        match score_pair(base, pair) {
            Ok((p, s, f)) => {
                sums.psnr += p;
                sums.ssim += s;
                sums.fsim += f;
                scored += 1;
                per_image.push(PerImage::Scored {
                    path: pair.image.clone(),
                    psnr: p,
                    ssim: s,
                    fsim: f,
                });
            }
            Err(e) => {
                failures += 1;
                per_image.push(PerImage::Failed {
                    path: pair.image.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    let mean = if scored > 0 {
        MeanScores {
            psnr: sums.psnr / scored as f64,
            ssim: sums.ssim / scored as f64,
            fsim: sums.fsim / scored as f64,
        }
    } else {
        MeanScores::default()
    };
    Ok((MetricReport { per_image, mean }, failures))
}

fn score_pair(base: &Path, pair: &PairEntry) -> Result<(f64, f64, f64)> {
    let image = read_ppm(&base.join(&pair.image))?;
    let reference = read_ppm(&base.join(&pair.reference))?;
    Ok((
        psnr(&image, &reference)?,
        ssim(&image, &reference)?,
        fsim(&image, &reference)?,
    ))
}
