//! Videos as directories of same-size PPM frames.
//!
//! Frames are taken in lexicographic file-name order. Coordinates are
//! `(t, y, x)` over `[T, H, W]`, time-major.

use std::fs;
use std::path::{Path, PathBuf};

use crate::data::pnm::{encode_pnm, outputs_to_raster, raster_to_targets, read_raster, ImageFormat};
use crate::data::{CoordinateDataset, Modality};
use crate::error::{Error, Result};
use crate::math::Matrix;

fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && ImageFormat::from_path(&path) == Some(ImageFormat::Ppm) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub fn load_video_frames(dir: &Path) -> Result<CoordinateDataset> {
    let paths = frame_paths(dir)?;
    let Some(first) = paths.first() else {
        return Err(Error::NoFrames(dir.to_path_buf()));
    };
    let first = read_raster(first)?;
    let (h, w) = (first.height, first.width);
    let mut data = Vec::with_capacity(paths.len() * h * w * 3);
    for path in &paths {
        let raster = read_raster(path)?;
        if raster.format != ImageFormat::Ppm {
            return Err(Error::MalformedHeader {
                path: path.clone(),
                reason: "video frames must be P6".into(),
            });
        }
        if (raster.height, raster.width) != (h, w) {
            return Err(Error::InconsistentFrames {
                path: path.clone(),
                expected: format!("{w}x{h}"),
                found: format!("{}x{}", raster.width, raster.height),
            });
        }
        data.extend_from_slice(raster_to_targets(&raster).as_slice());
    }
    let t = paths.len();
    let targets = Matrix::from_vec(t * h * w, 3, data)?;
    CoordinateDataset::on_grid(vec![t, h, w], targets, Modality::Video)
}

/// Writes `frame_0000.ppm`, `frame_0001.ppm`, ... into `dir` (created if needed).
pub fn save_video_frames(outputs: &Matrix, shape: &[usize], dir: &Path) -> Result<()> {
    let [t, h, w] = shape else {
        return Err(Error::InvalidArgument(format!(
            "video shape must be [T, H, W], got {shape:?}"
        )));
    };
    if outputs.rows() != t * h * w {
        return Err(Error::shape(
            "save_video_frames",
            format!("{} rows", t * h * w),
            outputs.shape_str(),
        ));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let per_frame = h * w;
    for f in 0..*t {
        let rows: Vec<usize> = (f * per_frame..(f + 1) * per_frame).collect();
        let raster = outputs_to_raster(&outputs.select_rows(&rows), *h, *w, ImageFormat::Ppm)?;
        let path = dir.join(format!("frame_{f:04}.ppm"));
        fs::write(&path, encode_pnm(&raster)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::pnm::Raster;
    use crate::data::{load_image, save_image};

    fn write_frame(dir: &Path, name: &str, w: usize, h: usize, fill: impl Fn(usize) -> u8) {
        let raster = Raster {
            format: ImageFormat::Ppm,
            width: w,
            height: h,
            pixels: (0..w * h * 3).map(fill).collect(),
        };
        fs::write(dir.join(name), encode_pnm(&raster)).unwrap();
    }

    #[test]
    fn single_frame_has_zero_time() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "a.ppm", 2, 2, |i| i as u8);
        let ds = load_video_frames(dir.path()).unwrap();
        assert_eq!(ds.shape, vec![1, 2, 2]);
        assert!((0..ds.len()).all(|r| ds.coords.get(r, 0) == 0.0));
        assert_eq!(ds.modality, Modality::Video);
    }

    #[test]
    fn two_pixel_frames() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "f1.ppm", 1, 1, |_| 0);
        write_frame(dir.path(), "f0.ppm", 1, 1, |_| 255);
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let ds = load_video_frames(dir.path()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.coords.row(0), &[-1.0, 0.0, 0.0]);
        assert_eq!(ds.coords.row(1), &[1.0, 0.0, 0.0]);
        // f0 sorts first.
        assert_eq!(ds.targets.row(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn errors() {
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_video_frames(empty.path()), Err(Error::NoFrames(_))));
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path(), "a.ppm", 2, 2, |_| 0);
        write_frame(dir.path(), "b.ppm", 3, 2, |_| 0);
        assert!(matches!(
            load_video_frames(dir.path()),
            Err(Error::InconsistentFrames { .. })
        ));
        assert!(matches!(
            load_video_frames(&dir.path().join("nope")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn slices_match_per_frame_loads() {
        let dir = tempfile::tempdir().unwrap();
        for f in 0..5 {
            write_frame(dir.path(), &format!("frame_{f}.ppm"), 4, 3, |i| (i * 7 + f * 40) as u8);
        }
        let ds = load_video_frames(dir.path()).unwrap();
        assert_eq!(ds.len(), 5 * 12);
        for f in 0..5 {
            let img = load_image(&dir.path().join(format!("frame_{f}.ppm")), ImageFormat::Ppm).unwrap();
            for r in 0..12 {
                assert_eq!(ds.targets.row(f * 12 + r), img.targets.row(r));
                assert_eq!(&ds.coords.row(f * 12 + r)[1..], img.coords.row(r));
            }
        }

        let out = tempfile::tempdir().unwrap();
        save_video_frames(&ds.targets, &ds.shape, out.path()).unwrap();
        assert_eq!(load_video_frames(out.path()).unwrap(), ds);
        let tmp = out.path().join("x.ppm");
        save_image(
            &ds.targets.select_rows(&(0..12).collect::<Vec<_>>()),
            &[3, 4],
            &tmp,
            ImageFormat::Ppm,
        )
        .unwrap();
    }
}
