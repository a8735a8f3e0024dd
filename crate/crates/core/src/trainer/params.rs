use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Branch, Dense, Mlp};
use super::train::TrainedEncoders;
use crate::decoupling::sidecar_path;
use crate::error::{Error, Result};
use crate::io::{read_pmm_file, write_pmm_file, PmmRaster};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    /// e.g. `h.encoder.0.weight`
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the flat parameter raster.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub activation: Activation,
    pub activate_last: bool,
    pub layers: usize,
}

/// JSON sidecar describing how the flat parameter raster splits into tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamManifest {
    pub networks: Vec<NetworkEntry>,
    pub tensors: Vec<TensorEntry>,
    pub total: usize,
}

fn networks(enc: &TrainedEncoders) -> [(&'static str, &Mlp); 4] {
    [
        ("h.encoder", &enc.h.encoder),
        ("h.projector", &enc.h.projector),
        ("p.encoder", &enc.p.encoder),
        ("p.projector", &enc.p.projector),
    ]
}

/// Writes all parameters as a single-channel PMM row (`f32`) plus a `.json` manifest.
pub fn save_params(path: &Path, enc: &TrainedEncoders) -> Result<ParamManifest> {
    let mut data = Vec::new();
    let mut tensors = Vec::new();
    let mut nets = Vec::new();
    for (name, mlp) in networks(enc) {
        nets.push(NetworkEntry {
            name: name.to_string(),
            activation: mlp.activation,
            activate_last: mlp.activate_last,
            layers: mlp.layers.len(),
        });
        for (l, layer) in mlp.layers.iter().enumerate() {
            tensors.push(TensorEntry {
                name: format!("{name}.{l}.weight"),
                shape: layer.weight.shape().to_vec(),
                offset: data.len(),
            });
            data.extend(layer.weight.iter().map(|&v| v as f32));
            tensors.push(TensorEntry { name: format!("{name}.{l}.bias"), shape: vec![layer.bias.len()], offset: data.len() });
            data.extend(layer.bias.iter().map(|&v| v as f32));
        }
    }
    let manifest = ParamManifest { networks: nets, tensors, total: data.len() };
    let raster = PmmRaster::new(data.len() as u32, 1, 1, data)?;
    write_pmm_file(path, &raster)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn tensor<'a>(manifest: &ParamManifest, data: &'a [f32], name: &str, rank: usize) -> Result<(&'a [f32], Vec<usize>)> {
    let entry = manifest
        .tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::Format(format!("parameter manifest lacks tensor {name}")))?;
    if entry.shape.len() != rank {
        return Err(Error::Format(format!("tensor {name} has rank {}, expected {rank}", entry.shape.len())));
    }
    let len: usize = entry.shape.iter().product();
    let slice = data
        .get(entry.offset..entry.offset + len)
        .ok_or_else(|| Error::Format(format!("tensor {name} extends past the parameter raster")))?;
    Ok((slice, entry.shape.clone()))
}

fn load_mlp(manifest: &ParamManifest, data: &[f32], net: &NetworkEntry) -> Result<Mlp> {
    let mut layers = Vec::with_capacity(net.layers);
    for l in 0..net.layers {
        let (w, shape) = tensor(manifest, data, &format!("{}.{l}.weight", net.name), 2)?;
        let (b, bshape) = tensor(manifest, data, &format!("{}.{l}.bias", net.name), 1)?;
        if bshape[0] != shape[1] {
            return Err(Error::Format(format!("bias of {}.{l} does not match its weight", net.name)));
        }
        if let Some(prev) = layers.last().map(|d: &Dense| d.bias.len()) {
            if prev != shape[0] {
                return Err(Error::Format(format!("layer {}.{l} input width does not chain", net.name)));
            }
        }
        let weight = Array2::from_shape_vec((shape[0], shape[1]), w.iter().map(|&v| f64::from(v)).collect())
            .map_err(|e| Error::Format(e.to_string()))?;
        let bias = Array1::from_iter(b.iter().map(|&v| f64::from(v)));
        layers.push(Dense { weight, bias });
    }
    Ok(Mlp { layers, activation: net.activation, activate_last: net.activate_last })
}

/// Inverse of [`save_params`]. Values come back rounded to `f32`.
pub fn load_params(path: &Path) -> Result<TrainedEncoders> {
    let raster = read_pmm_file(path)?;
    let manifest: ParamManifest = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if raster.channels != 1 || raster.height != 1 || raster.data.len() != manifest.total {
        return Err(Error::Format("parameter raster does not match its manifest".into()));
    }
    let find = |name: &str| {
        manifest
            .networks
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| Error::Format(format!("parameter manifest lacks network {name}")))
            .and_then(|n| load_mlp(&manifest, &raster.data, n))
    };
    Ok(TrainedEncoders {
        h: Branch { encoder: find("h.encoder")?, projector: find("h.projector")? },
        p: Branch { encoder: find("p.encoder")?, projector: find("p.projector")? },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{build_branches, EncoderSpec};

    #[test]
    fn roundtrip_to_f32_precision() {
        let spec = EncoderSpec { encoder_widths: vec![6, 5], projector_widths: [7, 7, 8], ..EncoderSpec::default() };
        let enc = build_branches(4, 3, &spec, &spec);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.pmm");
        let manifest = save_params(&path, &enc).unwrap();
        assert_eq!(manifest.tensors.len(), 2 * 2 * 5);
        let back = load_params(&path).unwrap();
        for (a, b) in [(&enc.h.encoder, &back.h.encoder), (&enc.p.projector, &back.p.projector)] {
            assert_eq!(a.activation, b.activation);
            assert_eq!(a.activate_last, b.activate_last);
            for (x, y) in a.params_flat().iter().zip(b.params_flat()) {
                assert_eq!((*x as f32) as f64, y);
            }
        }
    }

    #[test]
    fn truncated_manifest_is_rejected() {
        let spec = EncoderSpec { encoder_widths: vec![3], projector_widths: [3, 3, 4], ..EncoderSpec::default() };
        let enc = build_branches(2, 2, &spec, &spec);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.pmm");
        let mut manifest = save_params(&path, &enc).unwrap();
        manifest.tensors.pop();
        fs::write(sidecar_path(&path), serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(load_params(&path), Err(Error::Format(_))));
    }
}
