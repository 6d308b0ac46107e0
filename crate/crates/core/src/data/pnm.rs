//! Binary PGM (`P5`) and PPM (`P6`) with maxval 255.
//!
//! Pixel byte `v` maps to the target `2v/255 - 1`; on export a value is clamped
//! to `[-1, 1]` and written as `floor((v + 1) * 255 / 2 + 0.5)`.

use std::fs;
use std::path::Path;

use crate::data::{CoordinateDataset, Modality};
use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Ppm,
}

impl ImageFormat {
    pub fn channels(&self) -> usize {
        match self {
            ImageFormat::Pgm => 1,
            ImageFormat::Ppm => 3,
        }
    }

    fn magic(&self) -> &'static [u8; 2] {
        match self {
            ImageFormat::Pgm => b"P5",
            ImageFormat::Ppm => b"P6",
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Ppm => "ppm",
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "ppm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }
}

/// Decoded 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub format: ImageFormat,
    pub width: usize,
    pub height: usize,
    /// Interleaved samples, row-major.
    pub pixels: Vec<u8>,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok()?.parse().ok()
    }
}

pub fn decode_pnm(bytes: &[u8], path: &Path) -> Result<Raster> {
    let malformed = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let format = match bytes.get(..2) {
        Some(b"P5") => ImageFormat::Pgm,
        Some(b"P6") => ImageFormat::Ppm,
        _ => return Err(malformed("expected magic P5 or P6")),
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number().ok_or_else(|| malformed("missing width"))? as usize;
    let height = cur.number().ok_or_else(|| malformed("missing height"))? as usize;
    let maxval = cur.number().ok_or_else(|| malformed("missing maxval"))?;
    if width == 0 || height == 0 {
        return Err(malformed("zero image dimension"));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval {
            path: path.to_path_buf(),
            maxval,
        });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(malformed("missing whitespace after maxval")),
    }
    let expected = width * height * format.channels();
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    Ok(Raster {
        format,
        width,
        height,
        pixels: payload[..expected].to_vec(),
    })
}

pub fn encode_pnm(raster: &Raster) -> Vec<u8> {
    let mut out = Vec::with_capacity(raster.pixels.len() + 20);
    out.extend_from_slice(raster.format.magic());
    out.extend_from_slice(format!("\n{} {}\n255\n", raster.width, raster.height).as_bytes());
    out.extend_from_slice(&raster.pixels);
    out
}

pub fn read_raster(path: &Path) -> Result<Raster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&bytes, path)
}

/// Loads a PGM/PPM image as a coordinate dataset over `[H, W]`.
///
/// `format` must match the file's magic number.
pub fn load_image(path: &Path, format: ImageFormat) -> Result<CoordinateDataset> {
    let raster = read_raster(path)?;
    if raster.format != format {
        return Err(Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: format!("expected {} file", format.extension()),
        });
    }
    raster_to_dataset(&raster)
}

pub(crate) fn raster_to_targets(raster: &Raster) -> Matrix {
    let data = raster.pixels.iter().map(|&v| byte_to_unit(v)).collect();
    Matrix::from_vec(raster.width * raster.height, raster.format.channels(), data)
        .expect("payload length checked on decode")
}

fn raster_to_dataset(raster: &Raster) -> Result<CoordinateDataset> {
    let modality = match raster.format {
        ImageFormat::Pgm => Modality::ImageGray,
        ImageFormat::Ppm => Modality::ImageRgb,
    };
    CoordinateDataset::on_grid(vec![raster.height, raster.width], raster_to_targets(raster), modality)
}

pub fn byte_to_unit(v: u8) -> f64 {
    2.0 * v as f64 / 255.0 - 1.0
}

/// Clamps to `[-1, 1]` and rounds half up onto the 8-bit grid.
pub fn unit_to_byte(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    ((v + 1.0) * 255.0 / 2.0 + 0.5).floor() as u8
}

pub(crate) fn outputs_to_raster(outputs: &Matrix, height: usize, width: usize, format: ImageFormat) -> Result<Raster> {
    if outputs.rows() != height * width || outputs.cols() != format.channels() {
        return Err(Error::shape(
            "save_image",
            format!("{}x{}", height * width, format.channels()),
            outputs.shape_str(),
        ));
    }
    Ok(Raster {
        format,
        width,
        height,
        pixels: outputs.as_slice().iter().map(|&v| unit_to_byte(v)).collect(),
    })
}

/// Writes `outputs` (`H*W x channels`, values in `[-1, 1]`) as a binary PGM/PPM.
pub fn save_image(outputs: &Matrix, shape: &[usize], path: &Path, format: ImageFormat) -> Result<()> {
    let [height, width] = shape else {
        return Err(Error::InvalidArgument(format!(
            "image shape must be [H, W], got {shape:?}"
        )));
    };
    let raster = outputs_to_raster(outputs, *height, *width, format)?;
    fs::write(path, encode_pnm(&raster)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn single_pixel_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let white = write(dir.path(), "w.pgm", b"P5 1 1 255 \xff");
        let black = write(dir.path(), "b.pgm", b"P5\n1 1\n255\n\x00");
        assert_eq!(load_image(&white, ImageFormat::Pgm).unwrap().targets.as_slice(), &[1.0]);
        let ds = load_image(&black, ImageFormat::Pgm).unwrap();
        assert_eq!(ds.targets.as_slice(), &[-1.0]);
        assert_eq!(ds.coords.as_slice(), &[0.0, 0.0]);
        assert_eq!(ds.modality, Modality::ImageGray);
    }

    #[test]
    fn header_comments_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "c.pgm", b"P5\n# made by hand\n2 1\n255\n\x00\xff");
        assert_eq!(load_image(&p, ImageFormat::Pgm).unwrap().shape, vec![1, 2]);
    }

    #[test]
    fn distinct_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad_magic = write(dir.path(), "a.pgm", b"P2 1 1 255 \x00");
        let truncated = write(dir.path(), "b.ppm", b"P6 2 2 255 \x00\x01\x02");
        let maxval = write(dir.path(), "c.pgm", b"P5 1 1 65535 \x00\x00");
        let no_dims = write(dir.path(), "d.pgm", b"P5 x");
        assert!(matches!(
            load_image(&bad_magic, ImageFormat::Pgm),
            Err(Error::MalformedHeader { .. })
        ));
        assert!(matches!(
            load_image(&truncated, ImageFormat::Ppm),
            Err(Error::Truncated {
                expected: 12,
                found: 3,
                ..
            })
        ));
        assert!(matches!(
            load_image(&maxval, ImageFormat::Pgm),
            Err(Error::UnsupportedMaxval { maxval: 65535, .. })
        ));
        assert!(matches!(
            load_image(&no_dims, ImageFormat::Pgm),
            Err(Error::MalformedHeader { .. })
        ));
        assert!(matches!(
            load_image(&dir.path().join("missing.pgm"), ImageFormat::Pgm),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn byte_mapping_endpoints() {
        assert_eq!(unit_to_byte(-1.0), 0);
        assert_eq!(unit_to_byte(1.0), 255);
        assert_eq!(unit_to_byte(0.0), 128);
        assert_eq!(unit_to_byte(7.0), 255);
        assert_eq!(unit_to_byte(-3.0), 0);
        for b in 0..=255u8 {
            assert_eq!(unit_to_byte(byte_to_unit(b)), b);
        }
    }

    #[test]
    fn ppm_roundtrip_2x2() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = (0..12).map(|i| (i * 23) as u8).collect();
        let mut file = b"P6\n2 2\n255\n".to_vec();
        file.extend_from_slice(&bytes);
        let src = write(dir.path(), "in.ppm", &file);
        let ds = load_image(&src, ImageFormat::Ppm).unwrap();
        assert_eq!(ds.modality, Modality::ImageRgb);
        let dst = dir.path().join("out.ppm");
        save_image(&ds.targets, &ds.shape, &dst, ImageFormat::Ppm).unwrap();
        assert_eq!(fs::read(&dst).unwrap(), file);
        assert_eq!(load_image(&dst, ImageFormat::Ppm).unwrap(), ds);
    }

    #[test]
    fn save_rejects_bad_shape() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::zeros(3, 1);
        assert!(save_image(&m, &[2, 2], &dir.path().join("x.pgm"), ImageFormat::Pgm).is_err());
        assert!(matches!(
            save_image(
                &Matrix::zeros(1, 1),
                &[1, 1],
                &dir.path().join("no/such/dir.pgm"),
                ImageFormat::Pgm
            ),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn load_save_quantizes(seed in any::<u64>(), h in 1usize..6, w in 1usize..6) {
            let dir = tempfile::tempdir().unwrap();
            let mut rng = Rng::new(seed);
            let values: Vec<f64> = (0..h * w * 3).map(|_| rng.uniform_range(-1.2, 1.2)).collect();
            let m = Matrix::from_vec(h * w, 3, values.clone()).unwrap();
            let path = dir.path().join("r.ppm");
            save_image(&m, &[h, w], &path, ImageFormat::Ppm).unwrap();
            let back = load_image(&path, ImageFormat::Ppm).unwrap();
            for (b, v) in back.targets.as_slice().iter().zip(&values) {
                prop_assert_eq!(*b, byte_to_unit(unit_to_byte(*v)));
            }
        }
    }
}
