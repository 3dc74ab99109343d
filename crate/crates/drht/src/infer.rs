//! Single-image inference through the full correction pipeline.
//!
//! Inputs whose spatial size is not a multiple of the encoder's downsampling
//! factor are reflect-padded (edge not repeated) at the bottom and right,
//! run through the networks, and cropped back.

use drht_core::graph::Graph;
use drht_core::model::DrhtModel;
use drht_core::scene::{HdrImage, LdrImage};
use drht_core::tensor::Tensor;

use crate::error::{Error, Result};

/// Corrected LDR output plus the expanded HDR estimate `(max(ŝ,0)/α)^(1/γ)`.
pub struct InferenceProduct {
    pub corrected: LdrImage<f32>,
    pub hdr_estimate: HdrImage<f32>,
}

pub fn run_inference(model: &mut DrhtModel<f32>, input: &LdrImage<f32>) -> Result<InferenceProduct> {
    let (w, h) = (input.width(), input.height());
    let factor = model.f1.spec().downsample_factor();
    let (ph, pw) = (h.next_multiple_of(factor), w.next_multiple_of(factor));
    if ph - h >= h || pw - w >= w {
        return Err(Error::Invalid(format!(
            "image {w}x{h} too small to reflect-pad to a multiple of {factor}"
        )));
    }
    let padded = reflect_pad(input, ph, pw);
    let mut g = Graph::new();
    let x = g.leaf(padded);
    let fwd = model.forward_infer(&mut g, x)?;
    let corrected = crop_tensor(g.value(fwd.i_ldr), ph, pw, h, w);
    let s_hat = crop_tensor(g.value(fwd.s_hat), ph, pw, h, w);
    let expanded = s_hat.map(|v| model.transfer.expand(v));
    Ok(InferenceProduct {
        corrected: LdrImage::from_planar(w, h, corrected.into_data())?,
        hdr_estimate: HdrImage::from_planar(w, h, expanded.into_data())?,
    })
}

fn reflect_pad(img: &LdrImage<f32>, ph: usize, pw: usize) -> Tensor<f32> {
    let (w, h) = (img.width(), img.height());
    let mut data = Vec::with_capacity(3 * ph * pw);
    for c in 0..3 {
        for y in 0..ph {
            let sy = if y < h { y } else { 2 * h - 2 - y };
            for x in 0..pw {
                let sx = if x < w { x } else { 2 * w - 2 - x };
                data.push(img.pixel(c, sy, sx));
            }
        }
    }
    Tensor::from_vec(&[1, 3, ph, pw], data).expect("padded buffer is consistent")
}

fn crop_tensor(t: &Tensor<f32>, ph: usize, pw: usize, h: usize, w: usize) -> Tensor<f32> {
    let mut data = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        for y in 0..h {
            let base = (c * ph + y) * pw;
            data.extend_from_slice(&t.data()[base..base + w]);
        }
    }
    Tensor::from_vec(&[3, h, w], data).expect("crop bounds checked")
}

#[cfg(test)]
mod tests {
    use super::*;
    use drht_core::model::{DomainTransferParams, ModelParams, NetworkSpec};

    fn zero_model() -> DrhtModel<f32> {
        let spec = NetworkSpec::tiny();
        DrhtModel {
            f1: ModelParams::zeroed(&spec).unwrap(),
            f2: ModelParams::zeroed(&spec).unwrap(),
            transfer: DomainTransferParams::default(),
        }
    }

    #[test]
    fn zero_model_applies_the_domain_transfer() {
        let mut model = zero_model();
        let data: Vec<f32> = (0..3 * 16 * 16).map(|i| (i % 97) as f32 / 96.0).collect();
        let input = LdrImage::from_planar(16, 16, data).unwrap();
        let out = run_inference(&mut model, &input).unwrap();
        for (&got, &x) in out.corrected.data().iter().zip(input.data()) {
            assert_eq!(got, model.transfer.apply_scalar(x));
        }
        // The dumped HDR estimate expands the identity prediction.
        for (&got, &x) in out.hdr_estimate.data().iter().zip(input.data()) {
            assert_eq!(got, model.transfer.expand(x));
        }
    }

    #[test]
    fn non_divisible_input_is_padded_and_cropped_back() {
        let mut model = zero_model();
        let (w, h) = (18usize, 13usize);
        let data: Vec<f32> = (0..3 * w * h).map(|i| (i % 31) as f32 / 30.0).collect();
        let input = LdrImage::from_planar(w, h, data).unwrap();
        let out = run_inference(&mut model, &input).unwrap();
        assert_eq!(out.corrected.width(), w);
        assert_eq!(out.corrected.height(), h);
        // Zero model is pointwise, so padding cannot leak into the crop.
        for (&got, &x) in out.corrected.data().iter().zip(input.data()) {
            assert_eq!(got, model.transfer.apply_scalar(x));
        }
    }

    #[test]
    fn output_is_always_inside_unit_range() {
        let spec = NetworkSpec::tiny();
        let mut model = DrhtModel {
            f1: ModelParams::init(&spec, 77, 0.02).unwrap(),
            f2: ModelParams::init(&spec, 78, 0.02).unwrap(),
            transfer: DomainTransferParams::default(),
        };
        let data: Vec<f32> = (0..3 * 32 * 32).map(|i| (i % 53) as f32 / 52.0).collect();
        let input = LdrImage::from_planar(32, 32, data).unwrap();
        let out = run_inference(&mut model, &input).unwrap();
        assert!(out
            .corrected
            .data()
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v)));
    }
}
