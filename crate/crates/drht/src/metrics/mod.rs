//! Image quality metrics: PSNR, SSIM and FSIM.
//!
//! PSNR runs over all three channels against peak 1.0 and is capped at
//! 99 dB for identical images. SSIM and FSIM operate on luma
//! (0.299 R + 0.587 G + 0.114 B); SSIM uses the standard 11×11 Gaussian
//! window (σ = 1.5) over valid positions, FSIM combines log-Gabor phase
//! congruency with Scharr gradient magnitude.

mod fsim;

pub use fsim::fsim;

use drht_core::scalar::Scalar;
use drht_core::scene::LdrImage;
use serde::Serialize;

use crate::error::{Error, Result};

/// Cap reported for a zero-MSE pair (keeps JSON reports finite).
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4; // (0.01·L)² at L = 1
const SSIM_C2: f64 = 9e-4; // (0.03·L)²

fn check_dims<E: Scalar>(a: &LdrImage<E>, b: &LdrImage<E>, context: &str) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Eval(format!(
            "{context}: image dimensions differ ({}x{} vs {}x{})",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Rec. 601 luma of one image as a row-major `H×W` field.
pub(crate) fn luma<E: Scalar>(img: &LdrImage<E>) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(
                0.299 * img.pixel(0, y, x).to_f64()
                    + 0.587 * img.pixel(1, y, x).to_f64()
                    + 0.114 * img.pixel(2, y, x).to_f64(),
            );
        }
    }
    out
}

/// Peak signal-to-noise ratio in dB against peak 1.0. Unlike the training
/// loss this mean squared error carries no ½ factor.
pub fn psnr<E: Scalar>(a: &LdrImage<E>, b: &LdrImage<E>) -> Result<f64> {
    check_dims(a, b, "psnr")?;
    let mut acc = 0.0f64;
    for (&av, &bv) in a.data().iter().zip(b.data()) {
        let d = av.to_f64() - bv.to_f64();
        acc += d * d;
    }
    let mse = acc / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable valid-mode Gaussian filter of a `H×W` field; output is
/// `(H−10)×(W−10)`.
fn gaussian_valid(field: &[f64], h: usize, w: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * field[y * w + x + k];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let oh = h - SSIM_WINDOW + 1;
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * horiz[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Structural similarity on luma, mean over valid window positions.
pub fn ssim<E: Scalar>(a: &LdrImage<E>, b: &LdrImage<E>) -> Result<f64> {
    check_dims(a, b, "ssim")?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Eval(format!(
            "ssim: image {w}x{h} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    let la = luma(a);
    let lb = luma(b);
    let kernel = gaussian_kernel();
    let aa: Vec<f64> = la.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = lb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();
    let mu_a = gaussian_valid(&la, h, w, &kernel);
    let mu_b = gaussian_valid(&lb, h, w, &kernel);
    let e_aa = gaussian_valid(&aa, h, w, &kernel);
    let e_bb = gaussian_valid(&bb, h, w, &kernel);
    let e_ab = gaussian_valid(&ab, h, w, &kernel);
    let mut acc = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        acc += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(acc / mu_a.len() as f64)
}

/// Quality report as emitted by `eval`: one row per image pair plus the
/// arithmetic mean over the successfully evaluated pairs.
#[derive(Debug, Serialize)]
pub struct MetricReport {
    pub per_image: Vec<PerImage>,
    pub mean: MeanScores,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum PerImage {
    Scored {
        path: String,
        psnr: f64,
        ssim: f64,
        fsim: f64,
    },
    Failed {
        path: String,
        error: String,
    },
}

#[derive(Debug, Serialize, Default)]
pub struct MeanScores {
    pub psnr: f64,
    pub ssim: f64,
    pub fsim: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(w: usize, h: usize, v: f32) -> LdrImage<f32> {
        LdrImage::from_planar(w, h, vec![v; 3 * w * h]).unwrap()
    }

    fn textured(w: usize, h: usize, seed: u64) -> LdrImage<f32> {
        let mut rng = drht_core::rng::SeededRng::new(seed);
        let data = (0..3 * w * h).map(|_| rng.uniform(0.0, 1.0) as f32).collect();
        LdrImage::from_planar(w, h, data).unwrap()
    }

    fn flip_h(img: &LdrImage<f32>) -> LdrImage<f32> {
        let (w, h) = (img.width(), img.height());
        let mut data = vec![0.0f32; 3 * w * h];
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    data[(c * h + y) * w + x] = img.pixel(c, y, w - 1 - x);
                }
            }
        }
        LdrImage::from_planar(w, h, data).unwrap()
    }

    fn constant64(w: usize, h: usize, v: f64) -> LdrImage<f64> {
        LdrImage::from_planar(w, h, vec![v; 3 * w * h]).unwrap()
    }

    #[test]
    fn psnr_analytic_values() {
        let a = constant64(16, 16, 0.5);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let b = constant64(16, 16, 0.6);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let c = constant64(16, 16, 0.0);
        let d = constant64(16, 16, 0.5);
        assert!((psnr(&c, &d).unwrap() - 6.020599913279624).abs() < 1e-9);
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let base = textured(16, 16, 4);
        let mut prev = f64::INFINITY;
        for amp in [0.01f32, 0.02, 0.05, 0.1] {
            let noisy_data: Vec<f32> = base
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| (v + if i % 2 == 0 { amp } else { -amp }).clamp(0.0, 1.0))
                .collect();
            let noisy = LdrImage::from_planar(16, 16, noisy_data).unwrap();
            let p = psnr(&base, &noisy).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn psnr_rejects_dimension_mismatch() {
        let a = constant(16, 16, 0.5);
        let b = constant(16, 8, 0.5);
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn ssim_identity_and_constant_pair() {
        let a = textured(24, 24, 9);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        // Constant 0.5 vs 0.25: zero-variance images make the structure term
        // exactly 1, leaving the luminance ratio.
        let b = constant(16, 16, 0.5);
        let c = constant(16, 16, 0.25);
        let expected = (2.0 * 0.125 + SSIM_C1) / (0.3125 + SSIM_C1);
        assert!((ssim(&b, &c).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn ssim_matches_naive_window_oracle() {
        // Direct per-window double loop with the explicit 2-D kernel.
        let kernel = gaussian_kernel();
        for seed in 0..16 {
            let a = textured(20, 18, seed);
            let b = textured(20, 18, seed + 100);
            let la = luma(&a);
            let lb = luma(&b);
            let (w, h) = (20usize, 18usize);
            let mut acc = 0.0;
            let mut count = 0.0;
            for y0 in 0..=h - SSIM_WINDOW {
                for x0 in 0..=w - SSIM_WINDOW {
                    let (mut ma, mut mb) = (0.0, 0.0);
                    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
                    for dy in 0..SSIM_WINDOW {
                        for dx in 0..SSIM_WINDOW {
                            let wgt = kernel[dy] * kernel[dx];
                            let av = la[(y0 + dy) * w + x0 + dx];
                            let bv = lb[(y0 + dy) * w + x0 + dx];
                            ma += wgt * av;
                            mb += wgt * bv;
                            saa += wgt * av * av;
                            sbb += wgt * bv * bv;
                            sab += wgt * av * bv;
                        }
                    }
                    let va = saa - ma * ma;
                    let vb = sbb - mb * mb;
                    let cov = sab - ma * mb;
                    acc += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                    count += 1.0;
                }
            }
            let oracle = acc / count;
            let got = ssim(&a, &b).unwrap();
            assert!((got - oracle).abs() < 1e-9, "seed {seed}: {got} vs {oracle}");
        }
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let a = textured(16, 16, 1);
        let b = textured(16, 16, 2);
        let ab = ssim(&a, &b).unwrap();
        let ba = ssim(&b, &a).unwrap();
        assert_eq!(ab, ba);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_rejects_images_smaller_than_the_window() {
        let a = constant(8, 8, 0.5);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn metrics_are_flip_invariant() {
        let a = textured(32, 32, 21);
        let b = textured(32, 32, 22);
        let (fa, fb) = (flip_h(&a), flip_h(&b));
        assert!((psnr(&a, &b).unwrap() - psnr(&fa, &fb).unwrap()).abs() < 1e-9);
        assert!((ssim(&a, &b).unwrap() - ssim(&fa, &fb).unwrap()).abs() < 1e-9);
        assert!((fsim(&a, &b).unwrap() - fsim(&fa, &fb).unwrap()).abs() < 1e-9);
    }
}
