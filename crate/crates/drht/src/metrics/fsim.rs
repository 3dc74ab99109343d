//! Feature similarity index.
//!
//! Computed on luma scaled to 0–255. Phase congruency comes from a log-Gabor
//! filter bank (4 scales × 4 orientations, minimum wavelength 6, scale
//! multiplier 2, σ_f = 0.55, angular σ = (π/4)/1.2) applied in the frequency
//! domain; gradient magnitude uses the Scharr operator. Per pixel the two
//! similarity terms are combined and weighted by the larger phase congruency.
//! Noise compensation of the original phase-congruency formulation is
//! omitted, so values are a self-consistent reference guarded by frozen
//! regression fixtures rather than a bit-match to other implementations.

use drht_core::scalar::Scalar;
use drht_core::scene::LdrImage;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{check_dims, luma};
use crate::error::{Error, Result};

const NSCALE: usize = 4;
const NORIENT: usize = 4;
const MIN_WAVELENGTH: f64 = 6.0;
const MULT: f64 = 2.0;
const SIGMA_ONF: f64 = 0.55;
const DTHETA_ON_SIGMA: f64 = 1.2;
const PC_EPS: f64 = 1e-4;
const T1: f64 = 0.85; // phase-congruency similarity constant
const T2: f64 = 160.0; // gradient similarity constant (0–255 range)

pub fn fsim<E: Scalar>(a: &LdrImage<E>, b: &LdrImage<E>) -> Result<f64> {
    check_dims(a, b, "fsim")?;
    let (w, h) = (a.width(), a.height());
    if w < 32 || h < 32 {
        return Err(Error::Eval(format!(
            "fsim: image {w}x{h} too small for the filter bank (need at least 32x32)"
        )));
    }
    let la: Vec<f64> = luma(a).iter().map(|v| v * 255.0).collect();
    let lb: Vec<f64> = luma(b).iter().map(|v| v * 255.0).collect();

    let mut planner = FftPlanner::new();
    let bank = LogGaborBank::new(h, w);
    let pc1 = bank.phase_congruency(&la, h, w, &mut planner);
    let pc2 = bank.phase_congruency(&lb, h, w, &mut planner);
    let g1 = scharr_magnitude(&la, h, w);
    let g2 = scharr_magnitude(&lb, h, w);

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..h * w {
        let s_pc = (2.0 * pc1[i] * pc2[i] + T1) / (pc1[i] * pc1[i] + pc2[i] * pc2[i] + T1);
        let s_g = (2.0 * g1[i] * g2[i] + T2) / (g1[i] * g1[i] + g2[i] * g2[i] + T2);
        let pcm = pc1[i].max(pc2[i]);
        num += s_pc * s_g * pcm;
        den += pcm;
    }
    if den == 0.0 {
        // Both images are featureless; nothing distinguishes them.
        return Ok(1.0);
    }
    Ok(num / den)
}

/// Precomputed log-Gabor transfer functions on the FFT grid.
struct LogGaborBank {
    /// `filters[o][s]` is a real transfer function over the `h×w` spectrum.
    filters: Vec<Vec<Vec<f64>>>,
}

impl LogGaborBank {
    fn new(h: usize, w: usize) -> Self {
        // Normalized frequency coordinates in cycles per pixel.
        let freq = |idx: usize, n: usize| -> f64 {
            let half = (n + 1) / 2;
            if idx < half {
                idx as f64 / n as f64
            } else {
                idx as f64 / n as f64 - 1.0
            }
        };
        let theta_sigma = (core::f64::consts::PI / NORIENT as f64) / DTHETA_ON_SIGMA;
        let log_sigma = SIGMA_ONF.ln();
        let mut filters =
            vec![vec![vec![0.0; h * w]; NSCALE]; NORIENT];
        for y in 0..h {
            for x in 0..w {
                // The Nyquist bin of an even grid stands for ±0.5 cycles at
                // once; an oriented lobe cannot mirror there, so it is
                // excluded to keep the bank exactly closed under flips.
                if (w % 2 == 0 && x == w / 2) || (h % 2 == 0 && y == h / 2) {
                    continue;
                }
                let v = freq(y, h);
                let u = freq(x, w);
                let radius = (u * u + v * v).sqrt();
                let theta = v.atan2(u);
                let (sin_t, cos_t) = theta.sin_cos();
                for (o, per_orient) in filters.iter_mut().enumerate() {
                    let angle = o as f64 * core::f64::consts::PI / NORIENT as f64;
                    // Angular distance on the circle.
                    let ds = sin_t * angle.cos() - cos_t * angle.sin();
                    let dc = cos_t * angle.cos() + sin_t * angle.sin();
                    let dtheta = ds.atan2(dc);
                    let spread = (-dtheta * dtheta / (2.0 * theta_sigma * theta_sigma)).exp();
                    for (s, filter) in per_orient.iter_mut().enumerate() {
                        let wavelength = MIN_WAVELENGTH * MULT.powi(s as i32);
                        let f0 = 1.0 / wavelength;
                        let radial = if radius == 0.0 {
                            0.0 // kill the DC component
                        } else {
                            let r = (radius / f0).ln();
                            (-r * r / (2.0 * log_sigma * log_sigma)).exp()
                        };
                        filter[y * w + x] = radial * spread;
                    }
                }
            }
        }
        Self { filters }
    }

    /// Phase congruency: per orientation, the magnitude of the summed
    /// quadrature responses over scales, normalized by the total response
    /// amplitude.
    fn phase_congruency(
        &self,
        field: &[f64],
        h: usize,
        w: usize,
        planner: &mut FftPlanner<f64>,
    ) -> Vec<f64> {
        let mut spectrum: Vec<Complex<f64>> =
            field.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft2(&mut spectrum, h, w, planner, false);

        let mut energy = vec![0.0; h * w];
        let mut amplitude = vec![0.0; h * w];
        let mut filtered = vec![Complex::new(0.0, 0.0); h * w];
        for per_orient in &self.filters {
            let mut sum_even = vec![0.0; h * w];
            let mut sum_odd = vec![0.0; h * w];
            for filter in per_orient {
                for i in 0..h * w {
                    filtered[i] = spectrum[i] * filter[i];
                }
                fft2(&mut filtered, h, w, planner, true);
                for i in 0..h * w {
                    sum_even[i] += filtered[i].re;
                    sum_odd[i] += filtered[i].im;
                    amplitude[i] += filtered[i].norm();
                }
            }
            for i in 0..h * w {
                energy[i] += (sum_even[i] * sum_even[i] + sum_odd[i] * sum_odd[i]).sqrt();
            }
        }
        (0..h * w)
            .map(|i| energy[i] / (amplitude[i] + PC_EPS))
            .collect()
    }
}

/// In-place 2-D FFT (rows then columns); the inverse is normalized by 1/(h·w).
fn fft2(data: &mut [Complex<f64>], h: usize, w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
    if inverse {
        let norm = 1.0 / (h * w) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// Scharr gradient magnitude with zero padding.
fn scharr_magnitude(field: &[f64], h: usize, w: usize) -> Vec<f64> {
    const KX: [[f64; 3]; 3] = [[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]];
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut gx = 0.0;
            let mut gy = 0.0;
            for dy in 0..3 {
                for dx in 0..3 {
                    let sy = y as isize + dy as isize - 1;
                    let sx = x as isize + dx as isize - 1;
                    if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                        continue;
                    }
                    let v = field[sy as usize * w + sx as usize];
                    gx += KX[dy][dx] * v;
                    gy += KX[dx][dy] * v;
                }
            }
            out[y * w + x] = ((gx / 16.0).powi(2) + (gy / 16.0).powi(2)).sqrt();
        }
    }
    out
}
