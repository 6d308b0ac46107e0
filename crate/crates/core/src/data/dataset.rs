use crate::error::{Error, Result};
use crate::math::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    ImageGray,
    ImageRgb,
    Audio { sample_rate: u32 },
    Video,
}

impl Modality {
    pub fn name(&self) -> &'static str {
        match self {
            Modality::ImageGray => "image_gray",
            Modality::ImageRgb => "image_rgb",
            Modality::Audio { .. } => "audio",
            Modality::Video => "video",
        }
    }

    /// Target channels per sample.
    pub fn channels(&self) -> usize {
        match self {
            Modality::ImageRgb | Modality::Video => 3,
            Modality::ImageGray | Modality::Audio { .. } => 1,
        }
    }
}

/// Paired coordinates in `[-1, 1]^n` and targets in `[-1, 1]^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateDataset {
    pub coords: Matrix,
    pub targets: Matrix,
    /// Original grid dimensions: `[H, W]`, `[samples]` or `[T, H, W]`.
    pub shape: Vec<usize>,
    pub modality: Modality,
}

impl CoordinateDataset {
    /// Builds a dataset on the regular grid for `shape`, validating ranges.
    pub fn on_grid(shape: Vec<usize>, targets: Matrix, modality: Modality) -> Result<Self> {
        let coords = make_coord_grid(&shape)?;
        if targets.rows() != coords.rows() {
            return Err(Error::shape(
                "CoordinateDataset",
                format!("{} grid points", coords.rows()),
                format!("{} targets", targets.rows()),
            ));
        }
        if let Some(bad) = targets.as_slice().iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("target value {bad} outside [-1, 1]")));
        }
        Ok(Self {
            coords,
            targets,
            shape,
            modality,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.rows() == 0
    }

    pub fn in_dim(&self) -> usize {
        self.coords.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.targets.cols()
    }
}

/// Regular grid over `shape`, each axis mapped linearly onto `[-1, 1]`.
///
/// Rows enumerate points in row-major order (last axis fastest); a length-1
/// axis maps to 0.
pub fn make_coord_grid(shape: &[usize]) -> Result<Matrix> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "grid dimensions must all be >= 1, got {shape:?}"
        )));
    }
    let axes: Vec<Vec<f64>> = shape
        .iter()
        .map(|&len| {
            if len == 1 {
                vec![0.0]
            } else {
                (0..len).map(|i| -1.0 + 2.0 * i as f64 / (len - 1) as f64).collect()
            }
        })
        .collect();
    let n: usize = shape.iter().product();
    let dims = shape.len();
    let mut grid = Matrix::zeros(n, dims);
    let mut idx = vec![0usize; dims];
    for r in 0..n {
        let row = grid.row_mut(r);
        for (a, &i) in idx.iter().enumerate() {
            row[a] = axes[a][i];
        }
        for a in (0..dims).rev() {
            idx[a] += 1;
            if idx[a] < shape[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints() {
        assert_eq!(make_coord_grid(&[2]).unwrap().as_slice(), &[-1.0, 1.0]);
        assert_eq!(make_coord_grid(&[1]).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn grid_center() {
        let g = make_coord_grid(&[3, 3]).unwrap();
        assert_eq!(g.rows(), 9);
        assert_eq!(g.row(4), &[0.0, 0.0]);
        assert_eq!(g.row(1), &[-1.0, 0.0]);
        assert_eq!(g.row(3), &[0.0, -1.0]);
    }

    #[test]
    fn grid_rejects_zero_dim() {
        assert!(make_coord_grid(&[3, 0]).is_err());
        assert!(make_coord_grid(&[]).is_err());
    }

    #[test]
    fn dataset_rejects_out_of_range() {
        let t = Matrix::from_vec(2, 1, vec![0.0, 1.5]).unwrap();
        assert!(CoordinateDataset::on_grid(vec![2], t, Modality::ImageGray).is_err());
    }
}
