//! Binary weight files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `INRFORT1`                        |
//! | 8      | 4    | `in_dim` (u32)                          |
//! | 12     | 4    | `out_dim` (u32)                         |
//! | 16     | 4    | `hidden_width` (u32)                    |
//! | 20     | 4    | `hidden_layers` (u32)                   |
//! | 24     | 8    | `omega_first` (f64)                     |
//! | 32     | 8    | `omega_hidden` (f64)                    |
//! | 40     | 1    | dtype: 4 = f32, 8 = f64                 |
//! | 41     | d*s  | parameters in flatten order             |
//! | end-8  | 8    | FNV-1a 64 of every preceding byte (u64) |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{MlpParams, SirenConfig};

pub const MAGIC: &[u8; 8] = b"INRFORT1";
const HEADER_LEN: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightDtype {
    F32,
    F64,
}

impl WeightDtype {
    fn size(&self) -> usize {
        match self {
            WeightDtype::F32 => 4,
            WeightDtype::F64 => 8,
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf29ce484222325, |h, &b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

pub fn encode_weights(params: &MlpParams, dtype: WeightDtype) -> Vec<u8> {
    let c = &params.config;
    let theta = params.flatten();
    let mut out = Vec::with_capacity(HEADER_LEN + theta.len() * dtype.size() + 8);
    out.extend_from_slice(MAGIC);
    for dim in [c.in_dim, c.out_dim, c.hidden_width, c.hidden_layers] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&c.omega_first.to_le_bytes());
    out.extend_from_slice(&c.omega_hidden.to_le_bytes());
    out.push(dtype.size() as u8);
    for v in theta {
        match dtype {
            WeightDtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            WeightDtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    let checksum = fnv1a64(&out);
    out.extend_from_slice(&checksum.to_le_bytes());
    out
}

pub fn decode_weights(bytes: &[u8], path: &Path) -> Result<MlpParams> {
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < HEADER_LEN + 8 {
        return Err(truncated(HEADER_LEN + 8));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let config = SirenConfig {
        in_dim: u32_at(8),
        out_dim: u32_at(12),
        hidden_width: u32_at(16),
        hidden_layers: u32_at(20),
        omega_first: f64_at(24),
        omega_hidden: f64_at(32),
    };
    let dtype = match bytes[40] {
        4 => WeightDtype::F32,
        8 => WeightDtype::F64,
        other => {
            return Err(Error::MalformedHeader {
                path: path.to_path_buf(),
                reason: format!("unknown dtype flag {other}"),
            })
        }
    };
    config.validate().map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let d = config.param_count();
    let expected = HEADER_LEN + d * dtype.size() + 8;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("{} trailing bytes after checksum", bytes.len() - expected),
        });
    }
    let body = &bytes[..expected - 8];
    let stored = u64::from_le_bytes(bytes[expected - 8..].try_into().unwrap());
    let computed = fnv1a64(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    let payload = &body[HEADER_LEN..];
    let theta: Vec<f64> = match dtype {
        WeightDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        WeightDtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    MlpParams::unflatten(config, &theta)
}

pub fn save_weights(params: &MlpParams, path: &Path, dtype: WeightDtype) -> Result<()> {
    fs::write(path, encode_weights(params, dtype)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<MlpParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes, path)
}
