//! RIFF/WAVE, PCM 16-bit mono.
//!
//! Sample `s` maps to `s / 32768`. Unknown chunks are skipped, honoring the
//! RIFF pad byte after odd-sized chunks.

use std::fs;
use std::path::Path;

use crate::data::{CoordinateDataset, Modality};
use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcmMono16 {
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn decode_wav(bytes: &[u8], path: &Path) -> Result<PcmMono16> {
    let chunk_err = |reason: String| Error::MalformedChunk {
        path: path.to_path_buf(),
        reason,
    };
    let unsupported = |reason: String| Error::UnsupportedAudio {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(chunk_err("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut sample_rate = None;
    let mut data = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                chunk_err(format!(
                    "chunk '{}' declares {size} bytes past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(chunk_err(format!("fmt chunk too short ({} bytes)", body.len())));
                }
                let format = u16_at(body, 0);
                let channels = u16_at(body, 2);
                let bits = u16_at(body, 14);
                if format != 1 {
                    return Err(unsupported(format!("format tag {format} is not PCM")));
                }
                if channels != 1 {
                    return Err(unsupported(format!("{channels} channels, expected mono")));
                }
                if bits != 16 {
                    return Err(unsupported(format!("{bits}-bit samples, expected 16")));
                }
                sample_rate = Some(u32_at(body, 4));
            }
            b"data" => {
                if !body.len().is_multiple_of(2) {
                    return Err(chunk_err("odd-length 16-bit data chunk".into()));
                }
                data = Some(body);
            }
            _ => {}
        }
        pos = body_end + (size & 1);
    }
    let sample_rate = sample_rate.ok_or_else(|| chunk_err("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| chunk_err("missing data chunk".into()))?;
    if data.is_empty() {
        return Err(chunk_err("empty data chunk".into()));
    }
    Ok(PcmMono16 {
        sample_rate,
        samples: data.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect(),
    })
}

pub fn encode_wav(pcm: &PcmMono16) -> Vec<u8> {
    let data_len = (pcm.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&pcm.sample_rate.to_le_bytes());
    out.extend_from_slice(&(pcm.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &pcm.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn sample_to_unit(s: i16) -> f64 {
    s as f64 / 32768.0
}

/// Clamps onto the int16 range after scaling by 32768, rounding half up.
pub fn unit_to_sample(v: f64) -> i16 {
    let v = if v.is_nan() { 0.0 } else { v };
    (v * 32768.0 + 0.5).floor().clamp(-32768.0, 32767.0) as i16
}

pub fn load_audio_wav(path: &Path) -> Result<CoordinateDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let pcm = decode_wav(&bytes, path)?;
    let n = pcm.samples.len();
    let targets = Matrix::from_vec(n, 1, pcm.samples.iter().map(|&s| sample_to_unit(s)).collect())?;
    CoordinateDataset::on_grid(
        vec![n],
        targets,
        Modality::Audio {
            sample_rate: pcm.sample_rate,
        },
    )
}

/// Writes a single-column `outputs` matrix as PCM16 mono.
pub fn save_audio_wav(outputs: &Matrix, sample_rate: u32, path: &Path) -> Result<()> {
    if outputs.cols() != 1 {
        return Err(Error::shape("save_audio_wav", "1 channel", outputs.shape_str()));
    }
    let pcm = PcmMono16 {
        sample_rate,
        samples: outputs.as_slice().iter().map(|&v| unit_to_sample(v)).collect(),
    };
    fs::write(path, encode_wav(&pcm)).map_err(|e| Error::io(path, e))
}
