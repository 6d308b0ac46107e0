//! Deterministic synthetic signals for tests, demos and the acceptance suite.
//!
//! Every generator quantizes its output onto the grid of the matching file
//! format (8-bit for images and video, 16-bit for audio), so saving and
//! reloading a synthetic signal is lossless.

use crate::data::pnm::{byte_to_unit, unit_to_byte};
use crate::data::wav::{sample_to_unit, unit_to_sample};
use crate::data::{CoordinateDataset, Modality};
use crate::math::Matrix;

fn smoothstep_edge(dist: f64, width: f64) -> f64 {
    1.0 / (1.0 + (dist / width).exp())
}

fn quantize8(v: f64) -> f64 {
    byte_to_unit(unit_to_byte(v))
}

/// Linear ramp from black (top-left) to white (bottom-right).
pub fn gradient_image(h: usize, w: usize) -> CoordinateDataset {
    let mut data = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let t = (r + c) as f64 / ((h + w).saturating_sub(2).max(1)) as f64;
            data.push(quantize8(2.0 * t - 1.0));
        }
    }
    let targets = Matrix::from_vec(h * w, 1, data).expect("sized above");
    CoordinateDataset::on_grid(vec![h, w], targets, Modality::ImageGray).expect("valid grid")
}

/// Intensity in `[0, 1]` of a small still-life: shaded background, three soft
/// disks and a striped band. `channel` shifts the shading for color variants.
fn scene_value(y: f64, x: f64, channel: usize) -> f64 {
    let phase = channel as f64 * 0.7;
    let mut v = 0.35 + 0.25 * x * y + 0.1 * (2.0 * x + phase).sin();
    let disks = [
        (-0.35, -0.3, 0.32, 0.45 + 0.1 * channel as f64),
        (0.4, 0.25, 0.25, -0.35),
        (0.1, 0.55, 0.18, 0.3 - 0.15 * channel as f64),
    ];
    for (cy, cx, radius, amp) in disks {
        let dist = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt() - radius;
        v += amp * smoothstep_edge(dist, 0.03);
    }
    let band = smoothstep_edge((y + 0.65).abs() - 0.12, 0.03);
    v += 0.15 * band * (9.0 * x + phase).sin();
    v.clamp(0.0, 1.0)
}

fn scene(h: usize, w: usize, channels: usize) -> Matrix {
    let coord = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        }
    };
    let mut data = Vec::with_capacity(h * w * channels);
    for r in 0..h {
        for c in 0..w {
            for ch in 0..channels {
                let v = scene_value(coord(r, h), coord(c, w), ch);
                data.push(quantize8(2.0 * v - 1.0));
            }
        }
    }
    Matrix::from_vec(h * w, channels, data).expect("sized above")
}

/// Grayscale still-life with smooth shading, soft edges and a striped band.
pub fn scene_gray(h: usize, w: usize) -> CoordinateDataset {
    CoordinateDataset::on_grid(vec![h, w], scene(h, w, 1), Modality::ImageGray).expect("valid grid")
}

/// RGB version of [`scene_gray`].
pub fn scene_rgb(h: usize, w: usize) -> CoordinateDataset {
    CoordinateDataset::on_grid(vec![h, w], scene(h, w, 3), Modality::ImageRgb).expect("valid grid")
}

/// Two-partial tone (220 Hz and 330 Hz) with a slow amplitude envelope.
pub fn tone_audio(samples: usize, sample_rate: u32) -> CoordinateDataset {
    let data = (0..samples)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            let env = 0.6 + 0.3 * (std::f64::consts::TAU * 1.5 * t).sin();
            let v = env
                * (0.6 * (std::f64::consts::TAU * 220.0 * t).sin() + 0.3 * (std::f64::consts::TAU * 330.0 * t).sin());
            sample_to_unit(unit_to_sample(v))
        })
        .collect();
    let targets = Matrix::from_vec(samples, 1, data).expect("sized above");
    CoordinateDataset::on_grid(vec![samples], targets, Modality::Audio { sample_rate }).expect("valid grid")
}

/// A soft disk drifting left to right over a shaded background.
pub fn drifting_disk_video(frames: usize, h: usize, w: usize) -> CoordinateDataset {
    let coord = |i: usize, n: usize| {
        if n == 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (n - 1) as f64
        }
    };
    let mut data = Vec::with_capacity(frames * h * w * 3);
    for f in 0..frames {
        let cx = -0.5 + coord(f, frames) * 0.4;
        for r in 0..h {
            for c in 0..w {
                let (y, x) = (coord(r, h), coord(c, w));
                let disk = smoothstep_edge(((y - 0.1).powi(2) + (x - cx).powi(2)).sqrt() - 0.35, 0.05);
                for ch in 0..3 {
                    let base = 0.3 + 0.2 * y + 0.1 * ch as f64;
                    let v = (base + (0.5 - 0.2 * ch as f64) * disk).clamp(0.0, 1.0);
                    data.push(quantize8(2.0 * v - 1.0));
                }
            }
        }
    }
    let targets = Matrix::from_vec(frames * h * w, 3, data).expect("sized above");
    CoordinateDataset::on_grid(vec![frames, h, w], targets, Modality::Video).expect("valid grid")
}
