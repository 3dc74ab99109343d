//! Checkpoint directory format.
//!
//! A checkpoint is a directory holding `manifest.json` and `params.bin`. The
//! manifest records the format version, each network's name and spec, the
//! domain-transfer constants, and an ordered list of tensor entries
//! `{name, shape, byte_offset, byte_len}`. `params.bin` is the concatenation
//! of all tensors as little-endian 32-bit floats in manifest order, so a
//! save → load → save cycle is byte-identical.

use std::fs;
use std::path::Path;

use drht_core::model::{weight_shape, DomainTransferParams, ModelParams, NetworkSpec};
use drht_core::tensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    networks: Vec<NetworkEntry>,
    transfer: TransferEntry,
    entries: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkEntry {
    name: String,
    spec: NetworkSpec,
}

#[derive(Debug, Serialize, Deserialize, Clone, Copy)]
pub struct TransferEntry {
    pub alpha: f64,
    pub gamma: f64,
    pub delta: f64,
    pub s_max: f64,
}

impl TransferEntry {
    pub fn from_params(p: &DomainTransferParams<f32>) -> Self {
        Self {
            alpha: p.alpha as f64,
            gamma: p.gamma as f64,
            delta: p.delta as f64,
            s_max: p.s_max as f64,
        }
    }

    pub fn to_params(self) -> DomainTransferParams<f32> {
        DomainTransferParams {
            alpha: self.alpha as f32,
            gamma: self.gamma as f32,
            delta: self.delta as f32,
            s_max: self.s_max as f32,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    byte_offset: u64,
    byte_len: u64,
}

/// Per-layer tensor slots in checkpoint order.
const SLOTS: [&str; 6] = [
    "weight",
    "bias",
    "bn_gamma",
    "bn_beta",
    "bn_running_mean",
    "bn_running_var",
];

fn layer_slices<'a>(
    params: &'a ModelParams<f32>,
    layer: usize,
) -> Vec<(&'static str, Vec<usize>, &'a [f32])> {
    let l = &params.layers()[layer];
    let mut out = vec![
        ("weight", l.weight.shape().to_vec(), l.weight.data()),
        ("bias", l.bias.shape().to_vec(), l.bias.data()),
    ];
    if let Some(bn) = &l.bn {
        let c = bn.gamma.len();
        out.push(("bn_gamma", vec![c], bn.gamma.data()));
        out.push(("bn_beta", vec![c], bn.beta.data()));
        out.push(("bn_running_mean", vec![c], bn.running_mean.as_slice()));
        out.push(("bn_running_var", vec![c], bn.running_var.as_slice()));
    }
    out
}

pub fn save_checkpoint(
    dir: &Path,
    networks: &[(&str, &ModelParams<f32>)],
    transfer: &DomainTransferParams<f32>,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io("create checkpoint dir", dir, e))?;
    let mut entries = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    for (net_name, params) in networks {
        let spec = params.spec();
        for layer in 0..params.layers().len() {
            for (slot, shape, data) in layer_slices(params, layer) {
                let byte_offset = payload.len() as u64;
                for v in data {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
                entries.push(TensorEntry {
                    name: format!("{net_name}.{}.{slot}", spec.layer_name(layer)),
                    shape,
                    byte_offset,
                    byte_len: payload.len() as u64 - byte_offset,
                });
            }
        }
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        networks: networks
            .iter()
            .map(|(name, params)| NetworkEntry {
                name: (*name).to_string(),
                spec: params.spec().clone(),
            })
            .collect(),
        transfer: TransferEntry::from_params(transfer),
        entries,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Checkpoint(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join(MANIFEST_FILE), manifest_json)
        .map_err(|e| Error::io("write manifest", dir, e))?;
    fs::write(dir.join(PARAMS_FILE), payload)
        .map_err(|e| Error::io("write params", dir, e))?;
    Ok(())
}

#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub networks: Vec<(String, ModelParams<f32>)>,
    pub transfer: DomainTransferParams<f32>,
}

impl LoadedCheckpoint {
    pub fn network(&self, name: &str) -> Option<&ModelParams<f32>> {
        self.networks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p)
    }

    pub fn take_network(&mut self, name: &str) -> Option<ModelParams<f32>> {
        let idx = self.networks.iter().position(|(n, _)| n == name)?;
        Some(self.networks.remove(idx).1)
    }
}

pub fn load_checkpoint(dir: &Path) -> Result<LoadedCheckpoint> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_text =
        fs::read_to_string(&manifest_path).map_err(|e| Error::io("read manifest", &manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::Checkpoint(format!("manifest parse failed: {e}")))?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {} (expected {CHECKPOINT_VERSION})",
            manifest.version
        )));
    }
    let payload_path = dir.join(PARAMS_FILE);
    let payload = fs::read(&payload_path).map_err(|e| Error::io("read params", &payload_path, e))?;

    let read_entry = |name: &str, expected_shape: &[usize]| -> Result<Vec<f32>> {
        let entry = manifest
            .entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor entry {name}")))?;
        if entry.shape != expected_shape {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {:?}, spec requires {:?}",
                entry.shape, expected_shape
            )));
        }
        let count: usize = expected_shape.iter().product();
        if entry.byte_len as usize != count * 4 {
            return Err(Error::Checkpoint(format!(
                "tensor {name} length {} disagrees with shape {:?}",
                entry.byte_len, entry.shape
            )));
        }
        let start = entry.byte_offset as usize;
        let end = start + entry.byte_len as usize;
        if end > payload.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} extends past the payload ({end} > {})",
                payload.len()
            )));
        }
        Ok(payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };

    let mut networks = Vec::new();
    for net in &manifest.networks {
        net.spec
            .validate()
            .map_err(|e| Error::Checkpoint(format!("network {}: {e}", net.name)))?;
        let mut params = ModelParams::<f32>::zeroed(&net.spec)?;
        let depth = net.spec.depth();
        let layer_specs: Vec<_> = net
            .spec
            .encoder
            .iter()
            .chain(net.spec.decoder.iter())
            .cloned()
            .collect();
        for (layer, l_spec) in layer_specs.iter().enumerate() {
            let lname = net.spec.layer_name(layer);
            debug_assert!(layer < 2 * depth);
            let slot_name = |slot: &str| format!("{}.{lname}.{slot}", net.name);
            let target = &mut params.layers_mut()[layer];
            let wshape = weight_shape(l_spec);
            target.weight =
                Tensor::from_vec(&wshape, read_entry(&slot_name(SLOTS[0]), &wshape)?)?;
            target.bias = Tensor::from_vec(
                &[l_spec.out_channels],
                read_entry(&slot_name(SLOTS[1]), &[l_spec.out_channels])?,
            )?;
            if let Some(bn) = &mut target.bn {
                let c = [l_spec.out_channels];
                bn.gamma = Tensor::from_vec(&c, read_entry(&slot_name(SLOTS[2]), &c)?)?;
                bn.beta = Tensor::from_vec(&c, read_entry(&slot_name(SLOTS[3]), &c)?)?;
                bn.running_mean = read_entry(&slot_name(SLOTS[4]), &c)?;
                bn.running_var = read_entry(&slot_name(SLOTS[5]), &c)?;
            }
        }
        networks.push((net.name.clone(), params));
    }
    Ok(LoadedCheckpoint {
        networks,
        transfer: manifest.transfer.to_params(),
    })
}
