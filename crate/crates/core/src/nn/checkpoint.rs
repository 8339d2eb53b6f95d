//! Portable checkpoint files.
//!
//! Layout:
//!
//! | offset     | size | content                                   |
//! |------------|------|-------------------------------------------|
//! | 0          | 8    | magic `HSMCKPT1`                          |
//! | 8          | 8    | header length `H`, u64 little-endian      |
//! | 16         | H    | UTF-8 JSON header                         |
//! | 16 + H     | …    | parameters, IEEE-754 f64 little-endian    |
//!
//! The header lists the networks in payload order with their layer specs.
//! Parameters follow network by network, layer by layer: the `out × in`
//! weight matrix in row-major order, then the `out` biases.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Dense, LayerSpec, Network};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HSMCKPT1";
const FORMAT: &str = "hsmcfl-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub networks: Vec<(String, Network)>,
    /// Free-form annotations (dimensions, training config).
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&Network> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, net)| net)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    dtype: String,
    byte_order: String,
    payload_len: u64,
    networks: Vec<NetworkHeader>,
    #[serde(default)]
    metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct NetworkHeader {
    name: String,
    layers: Vec<LayerSpec>,
}

pub fn encode_checkpoint(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    for (_, net) in &ckpt.networks {
        for layer in net.layers() {
            for x in layer.weights.as_slice().iter().chain(&layer.bias) {
                payload.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    let header = Header {
        format: FORMAT.into(),
        version: 1,
        dtype: "f64".into(),
        byte_order: "little".into(),
        payload_len: payload.len() as u64,
        networks: ckpt
            .networks
            .iter()
            .map(|(name, net)| NetworkHeader {
                name: name.clone(),
                layers: net.specs(),
            })
            .collect(),
        metadata: ckpt.metadata.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("missing magic"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    if body.len() < hlen {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..hlen])?;
    if header.format != FORMAT || header.version != 1 {
        return Err(bad("unsupported format or version"));
    }
    if header.dtype != "f64" || header.byte_order != "little" {
        return Err(bad("unsupported dtype or byte order"));
    }
    let payload = &body[hlen..];
    if payload.len() as u64 != header.payload_len {
        return Err(bad("payload length does not match header"));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut networks = Vec::with_capacity(header.networks.len());
    for nh in header.networks {
        let mut layers = Vec::with_capacity(nh.layers.len());
        for spec in nh.layers {
            let w: Vec<f64> = values.by_ref().take(spec.in_dim * spec.out_dim).collect();
            let b: Vec<f64> = values.by_ref().take(spec.out_dim).collect();
            if w.len() != spec.in_dim * spec.out_dim || b.len() != spec.out_dim {
                return Err(bad("payload shorter than layer specs"));
            }
            layers.push(Dense {
                spec,
                weights: Matrix::from_vec(spec.out_dim, spec.in_dim, w),
                bias: b,
            });
        }
        networks.push((nh.name, Network::new(layers)?));
    }
    if values.next().is_some() {
        return Err(bad("payload longer than layer specs"));
    }
    Ok(Checkpoint {
        networks,
        metadata: header.metadata,
    })
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ckpt)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
