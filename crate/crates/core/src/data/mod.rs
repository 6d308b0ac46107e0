//! Signal ingestion into coordinate datasets, reconstruction export and
//! weight-file serialization.

mod dataset;
pub mod pnm;
pub mod synth;
pub mod video;
pub mod wav;
pub mod weights;

pub use dataset::{make_coord_grid, CoordinateDataset, Modality};
pub use pnm::{load_image, save_image, ImageFormat};
pub use video::{load_video_frames, save_video_frames};
pub use wav::{load_audio_wav, save_audio_wav};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WeightDtype};

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::math::Matrix;

/// Loads a signal, picking the modality from the path: a directory is a video,
/// `.pgm`/`.ppm` an image and `.wav` audio.
pub fn load_signal(path: &Path) -> Result<CoordinateDataset> {
    if path.is_dir() {
        return load_video_frames(path);
    }
    if let Some(format) = ImageFormat::from_path(path) {
        return load_image(path, format);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("wav") => load_audio_wav(path),
        _ if !path.exists() => Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        )),
        _ => Err(Error::InvalidArgument(format!(
            "cannot infer modality of {} (expected .pgm, .ppm, .wav or a frame directory)",
            path.display()
        ))),
    }
}

/// Writes `outputs` in the native format of `modality`. `stem` gets the
/// matching extension; videos become a directory named `stem`.
pub fn save_reconstruction(outputs: &Matrix, shape: &[usize], modality: Modality, stem: &Path) -> Result<PathBuf> {
    match modality {
        Modality::ImageGray => {
            let path = stem.with_extension("pgm");
            save_image(outputs, shape, &path, ImageFormat::Pgm)?;
            Ok(path)
        }
        Modality::ImageRgb => {
            let path = stem.with_extension("ppm");
            save_image(outputs, shape, &path, ImageFormat::Ppm)?;
            Ok(path)
        }
        Modality::Audio { sample_rate } => {
            let path = stem.with_extension("wav");
            save_audio_wav(outputs, sample_rate, &path)?;
            Ok(path)
        }
        Modality::Video => {
            save_video_frames(outputs, shape, stem)?;
            Ok(stem.to_path_buf())
        }
    }
}
