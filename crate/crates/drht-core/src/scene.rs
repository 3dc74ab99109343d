//! Synthetic radiance scenes and the exposure corruption model.
//!
//! Training needs triplets of (corrupted LDR input, ground-truth HDR
//! radiance, ground-truth LDR target). Scenes are procedural: a low-frequency
//! sky gradient with mid-frequency texture, one to three high-intensity light
//! blobs that clip under normal exposure, and a dark structural region that
//! drops below display precision — so both exposure failure modes exist in
//! every scene. The corrupted input applies the camera model
//! `I = clip((S·2^ev)^g · contrast)` with an exposure offset drawn from
//! [−6, 3] stops; the LDR target is a deterministic log tone curve that keeps
//! detail at both ends.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::model::DomainTransferParams;
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::Result;

/// Linear-light radiance image, three planar channels, values in `[0, s_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage<E> {
    width: usize,
    height: usize,
    data: Vec<E>,
}

/// Display-referred image, three planar channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrImage<E> {
    width: usize,
    height: usize,
    data: Vec<E>,
}

macro_rules! image_common {
    ($name:ident) => {
        impl<E: Scalar> $name<E> {
            pub fn width(&self) -> usize {
                self.width
            }

            pub fn height(&self) -> usize {
                self.height
            }

            /// Planar CHW buffer of length `3·height·width`.
            pub fn data(&self) -> &[E] {
                &self.data
            }

            pub fn pixel(&self, channel: usize, y: usize, x: usize) -> E {
                self.data[(channel * self.height + y) * self.width + x]
            }

            /// View as a `[1, 3, H, W]` tensor for the networks.
            pub fn to_tensor(&self) -> Tensor<E> {
                Tensor::from_vec(&[1, 3, self.height, self.width], self.data.clone())
                    .expect("image buffer length is consistent")
            }

            /// Copy out an aligned window.
            pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
                if x0 + w > self.width || y0 + h > self.height {
                    return Err(Error::InvalidArgument {
                        context: "crop",
                        message: String::from("window exceeds image bounds"),
                    });
                }
                let mut data = Vec::with_capacity(3 * w * h);
                for c in 0..3 {
                    for y in y0..y0 + h {
                        let base = (c * self.height + y) * self.width + x0;
                        data.extend_from_slice(&self.data[base..base + w]);
                    }
                }
                Ok(Self {
                    width: w,
                    height: h,
                    data,
                })
            }
        }
    };
}

image_common!(HdrImage);
image_common!(LdrImage);

impl<E: Scalar> HdrImage<E> {
    /// Validates finiteness and non-negativity.
    pub fn from_planar(width: usize, height: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::InvalidArgument {
                context: "HdrImage",
                message: String::from("buffer length must be 3*width*height"),
            });
        }
        if data.iter().any(|&v| !v.is_finite() || v < E::ZERO) {
            return Err(Error::NonFinite {
                context: String::from("HDR image data (negative or non-finite radiance)"),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_tensor(t: &Tensor<E>) -> Result<Self> {
        let s = t.shape().to_vec();
        match s.as_slice() {
            [1, 3, h, w] | [3, h, w] => Self::from_planar(*w, *h, t.data().to_vec()),
            _ => Err(Error::ShapeMismatch {
                context: "HdrImage::from_tensor",
                expected: alloc::vec![3, 0, 0],
                found: s,
            }),
        }
    }
}

impl<E: Scalar> LdrImage<E> {
    /// Validates finiteness and the `[0, 1]` range.
    pub fn from_planar(width: usize, height: usize, data: Vec<E>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::InvalidArgument {
                context: "LdrImage",
                message: String::from("buffer length must be 3*width*height"),
            });
        }
        if data
            .iter()
            .any(|&v| !v.is_finite() || v < E::ZERO || v > E::ONE)
        {
            return Err(Error::NonFinite {
                context: String::from("LDR image data (outside [0,1] or non-finite)"),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_tensor(t: &Tensor<E>) -> Result<Self> {
        let s = t.shape().to_vec();
        match s.as_slice() {
            [1, 3, h, w] | [3, h, w] => Self::from_planar(*w, *h, t.data().to_vec()),
            _ => Err(Error::ShapeMismatch {
                context: "LdrImage::from_tensor",
                expected: alloc::vec![3, 0, 0],
                found: s,
            }),
        }
    }
}

/// Camera model used to corrupt scenes: a power-law response raised to
/// `crf_gamma` after scaling by `2^ev`, followed by a multiplicative contrast
/// perturbation and clipping.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExposureSimulator {
    pub crf_gamma: f64,
    pub ev_min: f64,
    pub ev_max: f64,
    pub contrast_min: f64,
    pub contrast_max: f64,
}

impl Default for ExposureSimulator {
    fn default() -> Self {
        Self {
            crf_gamma: 1.0 / 2.2,
            ev_min: -6.0,
            ev_max: 3.0,
            contrast_min: 0.8,
            contrast_max: 1.2,
        }
    }
}

impl ExposureSimulator {
    pub fn validate(&self) -> Result<()> {
        let ok = self.crf_gamma > 0.0
            && self.ev_min >= -6.0
            && self.ev_max <= 3.0
            && self.ev_min <= self.ev_max
            && self.contrast_min > 0.0
            && self.contrast_min <= self.contrast_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument {
                context: "exposure simulator",
                message: String::from("ev range must sit inside [-6,3] and contrast must be positive"),
            })
        }
    }
}

/// One training record; all three images share dimensions and `ev` is the
/// exposure offset (stops) applied to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTriplet<E> {
    pub input: LdrImage<E>,
    pub hdr_gt: HdrImage<E>,
    pub ldr_gt: LdrImage<E>,
    pub ev: f64,
}

/// Procedural radiance field, deterministic per seed. Scenes always contain
/// at least 1% of pixels above radiance 1 (the blob neighborhood) and at
/// least 1% below 0.01 (the dark structure), so both clipping directions can
/// be exercised by the exposure model.
pub fn generate_scene<E: Scalar>(
    seed: u64,
    width: usize,
    height: usize,
    s_max: f64,
) -> Result<HdrImage<E>> {
    if width < 16 || height < 16 {
        return Err(Error::InvalidArgument {
            context: "generate_scene",
            message: String::from("scene dimensions must be at least 16x16"),
        });
    }
    let mut rng = SeededRng::new(seed);
    let (wf, hf) = (width as f64, height as f64);

    // Sky gradient: random direction, per-channel tint.
    let angle = rng.uniform(0.0, core::f64::consts::TAU);
    let (gx, gy) = (libm::cos(angle), libm::sin(angle));
    let low = rng.uniform(0.02, 0.2);
    let high = rng.uniform(0.5, 2.5);
    let tint: [f64; 3] = [
        rng.uniform(0.7, 1.3),
        rng.uniform(0.7, 1.3),
        rng.uniform(0.7, 1.3),
    ];

    // Mid-frequency texture: a few oriented sinusoids.
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.uniform(2.0, 6.0),
                rng.uniform(2.0, 6.0),
                rng.uniform(0.0, core::f64::consts::TAU),
                rng.uniform(0.05, 0.2),
            )
        })
        .collect();

    // Dark structure: a rectangle in the bottom band multiplying radiance
    // down below display precision. At least 4% of the image area.
    let dark_w = (rng.uniform(0.25, 0.45) * wf) as usize;
    let dark_h = (rng.uniform(0.2, 0.25) * hf).max(1.0) as usize;
    let dark_x0 = rng.uniform_usize(width - dark_w);
    let dark_y0 = height - dark_h;
    let dark_factor = rng.uniform(0.0005, 0.002);

    // Light blobs: centers confined to the top band so their tails cannot
    // re-brighten the dark structure. Blob 0 is guaranteed hot.
    let n_blobs = 1 + rng.uniform_usize(3);
    let min_dim = width.min(height) as f64;
    let blobs: Vec<(f64, f64, f64, f64)> = (0..n_blobs)
        .map(|i| {
            let cx = rng.uniform(0.1, 0.9) * wf;
            let cy = rng.uniform(0.05, 0.35) * hf;
            let sigma = rng.uniform(min_dim / 24.0, min_dim / 12.0);
            let peak = if i == 0 {
                rng.uniform((s_max / 4.0).max(4.0), s_max)
            } else {
                rng.uniform(1.0, s_max / 2.0)
            };
            (cx, cy, sigma, peak)
        })
        .collect();

    let mut data = Vec::with_capacity(3 * width * height);
    for c in 0..3 {
        for y in 0..height {
            for x in 0..width {
                let (xf, yf) = (x as f64 / wf, y as f64 / hf);
                let t = 0.5 + 0.5 * (gx * (xf - 0.5) + gy * (yf - 0.5));
                let mut v = (low + (high - low) * t) * tint[c];
                let mut tex = 0.0;
                for &(fx, fy, phase, amp) in &waves {
                    tex += amp
                        * libm::sin(core::f64::consts::TAU * (fx * xf + fy * yf) + phase + c as f64);
                }
                v *= (1.0 + tex).max(0.05);
                if y >= dark_y0 && x >= dark_x0 && x < dark_x0 + dark_w {
                    v *= dark_factor;
                }
                for &(cx, cy, sigma, peak) in &blobs {
                    let d2 = (x as f64 - cx) * (x as f64 - cx) + (y as f64 - cy) * (y as f64 - cy);
                    v += peak * libm::exp(-d2 / (2.0 * sigma * sigma));
                }
                data.push(E::from_f64(v.clamp(0.0, s_max)));
            }
        }
    }
    HdrImage::from_planar(width, height, data)
}

/// Expose a scene at `ev` stops with an explicit contrast factor.
pub fn simulate_exposure_with_contrast<E: Scalar>(
    scene: &HdrImage<E>,
    ev: f64,
    contrast: f64,
    sim: &ExposureSimulator,
) -> Result<LdrImage<E>> {
    sim.validate()?;
    if ev < sim.ev_min || ev > sim.ev_max {
        return Err(Error::InvalidArgument {
            context: "simulate_exposure",
            message: alloc::format!(
                "ev {ev} outside simulator range [{}, {}]",
                sim.ev_min,
                sim.ev_max
            ),
        });
    }
    let gain = libm::exp2(ev);
    let data = scene
        .data()
        .iter()
        .map(|&s| {
            let exposed = libm::pow(s.to_f64() * gain, sim.crf_gamma) * contrast;
            E::from_f64(exposed.clamp(0.0, 1.0))
        })
        .collect();
    LdrImage::from_planar(scene.width(), scene.height(), data)
}

/// Expose a scene at `ev` stops, drawing the contrast factor from the
/// simulator's range.
pub fn simulate_exposure<E: Scalar>(
    scene: &HdrImage<E>,
    ev: f64,
    sim: &ExposureSimulator,
    rng: &mut SeededRng,
) -> Result<LdrImage<E>> {
    let contrast = rng.uniform(sim.contrast_min, sim.contrast_max);
    simulate_exposure_with_contrast(scene, ev, contrast, sim)
}

/// Deterministic well-exposed tone mapping used as the ground-truth LDR: the
/// same normalized log curve the domain transfer applies after inverse gamma,
/// so a perfect HDR estimate reproduces this target exactly.
pub fn reference_ldr<E: Scalar>(
    scene: &HdrImage<E>,
    transfer: &DomainTransferParams<E>,
) -> LdrImage<E> {
    let data = scene
        .data()
        .iter()
        .map(|&s| transfer.normalize_log_radiance(s))
        .collect();
    LdrImage::from_planar(scene.width(), scene.height(), data)
        .expect("log curve output is inside [0,1]")
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetConfig {
    pub scenes: usize,
    pub scene_width: usize,
    pub scene_height: usize,
    pub patch_width: usize,
    pub patch_height: usize,
    pub seed: u64,
    pub sim: ExposureSimulator,
}

/// Generate `scenes` scenes, corrupt each at one sampled exposure/contrast,
/// tone-map the target, and cut all three images into aligned
/// patch-size-strided tiles. Deterministic per seed.
pub fn make_dataset<E: Scalar>(
    cfg: &DatasetConfig,
    transfer: &DomainTransferParams<E>,
) -> Result<Vec<TrainingTriplet<E>>> {
    cfg.sim.validate()?;
    if cfg.scenes == 0 {
        return Err(Error::InvalidArgument {
            context: "make_dataset",
            message: String::from("empty dataset requested"),
        });
    }
    if cfg.patch_width > cfg.scene_width || cfg.patch_height > cfg.scene_height {
        return Err(Error::InvalidArgument {
            context: "make_dataset",
            message: String::from("patch larger than scene"),
        });
    }
    let s_max = transfer.s_max.to_f64();
    let mut sampler = SeededRng::with_stream(cfg.seed, 1);
    let mut triplets = Vec::new();
    for i in 0..cfg.scenes {
        let scene_seed = cfg.seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let scene = generate_scene::<E>(scene_seed, cfg.scene_width, cfg.scene_height, s_max)?;
        let ev = sampler.uniform(cfg.sim.ev_min, cfg.sim.ev_max);
        let input = simulate_exposure(&scene, ev, &cfg.sim, &mut sampler)?;
        let ldr_gt = reference_ldr(&scene, transfer);
        for ty in 0..cfg.scene_height / cfg.patch_height {
            for tx in 0..cfg.scene_width / cfg.patch_width {
                let (x0, y0) = (tx * cfg.patch_width, ty * cfg.patch_height);
                triplets.push(TrainingTriplet {
                    input: input.crop(x0, y0, cfg.patch_width, cfg.patch_height)?,
                    hdr_gt: scene.crop(x0, y0, cfg.patch_width, cfg.patch_height)?,
                    ldr_gt: ldr_gt.crop(x0, y0, cfg.patch_width, cfg.patch_height)?,
                    ev,
                });
            }
        }
    }
    Ok(triplets)
}
