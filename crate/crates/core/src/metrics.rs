//! PSNR and Monte-Carlo statistics of PSNR under weight noise.
//!
//! Network outputs and targets live in `[-1, 1]`. Reconstruction PSNR clamps the
//! prediction to that range (as it would be when saved), maps both sides onto
//! `[0, 1]` with `(v + 1) / 2`, and uses peak 1. The MSE here is the mean over
//! every scalar entry, not the per-sample squared norm of the training loss.

use crate::data::CoordinateDataset;
use crate::error::{Error, Result};
use crate::math::Matrix;
use crate::model::{predict, MlpParams};
use crate::perturb::{perturb, NoiseSpec};

/// `10 log10(peak² / MSE)`, `+inf` when the inputs are identical.
pub fn psnr(pred: &Matrix, target: &Matrix, peak: f64) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("psnr", pred.shape_str(), target.shape_str()));
    }
    if peak.is_nan() || peak <= 0.0 {
        return Err(Error::InvalidArgument(format!("peak must be positive, got {peak}")));
    }
    let n = pred.as_slice().len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let sse = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .fold(0.0, |acc, (p, t)| acc + (p - t) * (p - t));
    let mse = sse / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn to_unit_range(m: &Matrix, clamp: bool) -> Matrix {
    let mut out = m.clone();
    for v in out.as_mut_slice() {
        let x = if clamp { v.clamp(-1.0, 1.0) } else { *v };
        *v = (x + 1.0) / 2.0;
    }
    out
}

/// PSNR of a network reconstruction against `[-1, 1]` targets.
pub fn reconstruction_psnr(pred: &Matrix, target: &Matrix) -> Result<f64> {
    psnr(&to_unit_range(pred, true), &to_unit_range(target, false), 1.0)
}

/// Clean reconstruction PSNR of `params` on `dataset`.
pub fn clean_psnr(params: &MlpParams, dataset: &CoordinateDataset) -> Result<f64> {
    reconstruction_psnr(&predict(params, &dataset.coords)?, &dataset.targets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyPsnr {
    pub mean_db: f64,
    /// Population standard deviation across trials.
    pub std_db: f64,
    pub per_trial: Vec<f64>,
}

/// Perturbs `params` once per trial (seed `noise.seed + t`) and measures PSNR.
pub fn noisy_psnr_stats(
    params: &MlpParams,
    dataset: &CoordinateDataset,
    noise: &NoiseSpec,
    trials: usize,
) -> Result<NoisyPsnr> {
    if trials == 0 {
        return Err(Error::InvalidArgument("noisy PSNR needs at least one trial".into()));
    }
    let per_trial = (0..trials as u64)
        .map(|t| {
            let noisy = perturb(params, &noise.with_seed(noise.seed.wrapping_add(t)))?;
            clean_psnr(&noisy, dataset)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean_db = per_trial.iter().sum::<f64>() / trials as f64;
    let std_db = if trials == 1 {
        0.0
    } else {
        (per_trial.iter().map(|p| (p - mean_db).powi(2)).sum::<f64>() / trials as f64).sqrt()
    };
    Ok(NoisyPsnr {
        mean_db,
        std_db,
        per_trial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::gradient_image;
    use crate::math::Rng;
    use crate::model::{init_siren, SirenConfig};
    use crate::perturb::NoiseFamily;

    #[test]
    fn identical_is_infinite() {
        let m = Matrix::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(psnr(&m, &m, 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_error_gives_twenty_db() {
        let a = Matrix::from_vec(1, 4, vec![0.2, 0.5, 0.3, 0.9]).unwrap();
        let b = Matrix::from_vec(1, 4, vec![0.3, 0.4, 0.4, 0.8]).unwrap();
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn matches_direct_formula() {
        let mut rng = Rng::new(8);
        let a: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.uniform()).collect();
        let mut sse = 0.0;
        for i in 0..50 {
            sse += (a[i] - b[i]) * (a[i] - b[i]);
        }
        let expected = 10.0 * (1.0 / (sse / 50.0)).log10();
        let got = psnr(
            &Matrix::from_vec(10, 5, a).unwrap(),
            &Matrix::from_vec(10, 5, b).unwrap(),
            1.0,
        )
        .unwrap();
        assert!((got - expected).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let a = Matrix::zeros(2, 2);
        assert!(psnr(&a, &Matrix::zeros(1, 4), 1.0).is_err());
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn remap_is_affine_consistent() {
        // An error of 0.2 in [-1, 1] is 0.1 after the remap.
        let p = Matrix::from_vec(1, 2, vec![0.2, -0.6]).unwrap();
        let t = Matrix::from_vec(1, 2, vec![0.0, -0.4]).unwrap();
        assert!((reconstruction_psnr(&p, &t).unwrap() - 20.0).abs() < 1e-9);
        // Out-of-range predictions are clamped first.
        let p = Matrix::from_vec(1, 1, vec![3.0]).unwrap();
        let t = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        assert_eq!(reconstruction_psnr(&p, &t).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_strength_and_single_trial() {
        let ds = gradient_image(5, 5);
        let p = init_siren(
            SirenConfig {
                hidden_width: 8,
                hidden_layers: 2,
                ..SirenConfig::new(2, 1)
            },
            1,
        )
        .unwrap();
        let before = p.clone();
        let clean = clean_psnr(&p, &ds).unwrap();
        let s = noisy_psnr_stats(&p, &ds, &NoiseSpec::new(NoiseFamily::GaussianMult, 0.0, 3), 4).unwrap();
        assert!(s.per_trial.iter().all(|&v| v == clean));
        assert_eq!(s.std_db, 0.0);
        let one = noisy_psnr_stats(&p, &ds, &NoiseSpec::new(NoiseFamily::GaussianAdd, 0.1, 3), 1).unwrap();
        assert_eq!(one.std_db, 0.0);
        assert_eq!(one.mean_db, one.per_trial[0]);
        assert_eq!(p, before);
        assert!(noisy_psnr_stats(&p, &ds, &NoiseSpec::new(NoiseFamily::GaussianAdd, 0.1, 3), 0).is_err());
    }
}
