//! Built-in verification battery run by `inrobust selfcheck`.

use std::path::PathBuf;

use crate::data::synth::gradient_image;
use crate::data::weights::{decode_weights, encode_weights, WeightDtype};
use crate::loss::{eval_mse, eval_robust, EPS_GRAD};
use crate::math::{finite_difference_gradient, norm2, Matrix, Rng};
use crate::metrics::psnr;
use crate::model::{backward_mse, forward, init_siren, mse_value, predict, MlpParams, SirenConfig};
use crate::perturb::{taylor_gap, NoiseFamily, NoiseSpec};
use crate::sweep::parse_records_csv;

#[derive(Debug, Clone, Default)]
pub struct SelfCheckOptions {
    /// Negative control: perturbs the analytic gradient so `grad-fd` must fail.
    pub corrupt_backward: bool,
    /// Sweep CSV to reparse as an extra check.
    pub sweep_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_config(rng: &mut Rng) -> SirenConfig {
    SirenConfig {
        in_dim: 1 + rng.index(3),
        out_dim: 1 + rng.index(3),
        hidden_width: 1 + rng.index(8),
        hidden_layers: 1 + rng.index(3),
        ..SirenConfig::new(1, 1)
    }
}

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
    )
    .expect("sized above")
}

/// Worst per-coordinate relative error between backprop and central
/// differences over 50 random default-frequency networks.
fn grad_fd(corrupt: bool) -> CheckResult {
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let mut rng = Rng::new(seed);
        let config = random_config(&mut rng);
        let n = 1 + rng.index(16);
        let p = init_siren(config, rng.next_u64()).expect("valid config");
        let x = random_matrix(&mut rng, n, config.in_dim);
        let t = random_matrix(&mut rng, n, config.out_dim);
        let (_, cache) = forward(&p, &x).expect("shapes match");
        let mut g = backward_mse(&p, &cache, &x, &t).expect("shapes match").0.flatten();
        if corrupt {
            g[0] += 1e-2 * g[0].abs().max(1.0);
        }
        let fd = finite_difference_gradient(
            |theta| {
                let q = MlpParams::unflatten(config, theta).expect("same layout");
                mse_value(&predict(&q, &x).expect("shapes match"), &t).expect("shapes match")
            },
            &p.flatten(),
            1e-6,
        )
        .expect("finite inputs");
        for (a, b) in g.iter().zip(&fd) {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-3));
        }
    }
    CheckResult {
        name: "grad-fd",
        passed: worst < 1e-6,
        detail: format!("max relative error {worst:.3e} over 50 networks"),
    }
}

/// The penalty part of the robust gradient is a unit vector.
fn penalty_unit_norm() -> CheckResult {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..100 {
        let mut rng = Rng::new(1000 + seed);
        let config = random_config(&mut rng);
        let n = 1 + rng.index(16);
        let p = init_siren(config, rng.next_u64()).expect("valid config");
        let coords = random_matrix(&mut rng, n, config.in_dim);
        let targets = random_matrix(&mut rng, n, config.out_dim);
        let ds = crate::data::CoordinateDataset {
            coords,
            targets,
            shape: vec![n],
            modality: crate::data::Modality::Audio { sample_rate: 1 },
        };
        let base = eval_mse(&p, &ds).expect("valid dataset");
        if norm2(&base.grad) < EPS_GRAD {
            continue;
        }
        let lambda = rng.uniform_range(0.01, 1.0);
        let robust = eval_robust(&p, &ds, lambda).expect("valid dataset");
        let diff: Vec<f64> = robust
            .grad
            .iter()
            .zip(&base.grad)
            .map(|(r, b)| (r - b) / lambda)
            .collect();
        worst = worst.max((norm2(&diff) - 1.0).abs());
        checked += 1;
    }
    CheckResult {
        name: "penalty-unit-norm",
        passed: worst <= 1e-9 && checked > 0,
        detail: format!("max |norm - 1| {worst:.3e} over {checked} configurations"),
    }
}

/// Under tiny additive noise the loss change stays within the first-order
/// bound up to a negligible second-order remainder.
fn taylor_check() -> CheckResult {
    let ds = gradient_image(8, 8);
    let config = SirenConfig {
        hidden_width: 16,
        hidden_layers: 2,
        ..SirenConfig::new(2, 1)
    };
    let p = init_siren(config, 4).expect("valid config");
    let spec = NoiseSpec::new(NoiseFamily::GaussianAdd, 1e-7, 77);
    let samples = taylor_gap(&p, &spec, &ds, 50).expect("valid inputs");
    let worst = samples.iter().map(|s| s.delta_loss / s.bound).fold(0.0f64, f64::max);
    CheckResult {
        name: "taylor-gap",
        passed: worst <= 1.0 + 1e-3,
        detail: format!("max |dL| / bound {worst:.4} over 50 draws"),
    }
}

fn psnr_analytic() -> CheckResult {
    let a = Matrix::from_vec(1, 4, vec![0.2, 0.5, 0.3, 0.9]).expect("sized");
    let b = Matrix::from_vec(1, 4, vec![0.3, 0.4, 0.4, 0.8]).expect("sized");
    let twenty = psnr(&a, &b, 1.0).expect("same shape");
    let same = psnr(&a, &a, 1.0).expect("same shape");
    CheckResult {
        name: "psnr-analytic",
        passed: (twenty - 20.0).abs() < 1e-9 && same == f64::INFINITY,
        detail: format!("uniform 0.1 error -> {twenty:.9} dB, identical -> {same}"),
    }
}

fn weights_roundtrip() -> CheckResult {
    let p = init_siren(
        SirenConfig {
            hidden_width: 8,
            hidden_layers: 2,
            ..SirenConfig::new(2, 3)
        },
        9,
    )
    .expect("valid config");
    let bytes = encode_weights(&p, WeightDtype::F64);
    let passed = decode_weights(&bytes, "<memory>".as_ref())
        .map(|q| {
            p.flatten()
                .iter()
                .zip(q.flatten())
                .all(|(a, b)| a.to_bits() == b.to_bits())
        })
        .unwrap_or(false);
    CheckResult {
        name: "weights-roundtrip",
        passed,
        detail: format!("{} parameters, {} bytes", p.param_count(), bytes.len()),
    }
}

fn sweep_csv(path: &PathBuf) -> CheckResult {
    let (passed, detail) = match std::fs::read_to_string(path) {
        Ok(text) => match parse_records_csv(&text) {
            Ok(rows) => (true, format!("{} rows in {}", rows.len(), path.display())),
            Err(e) => (false, format!("{}: {e}", path.display())),
        },
        Err(e) => (false, format!("{}: {e}", path.display())),
    };
    CheckResult {
        name: "sweep-csv",
        passed,
        detail,
    }
}

pub fn run_selfcheck(options: &SelfCheckOptions) -> Vec<CheckResult> {
    let mut results = vec![
        grad_fd(options.corrupt_backward),
        penalty_unit_norm(),
        taylor_check(),
        psnr_analytic(),
        weights_roundtrip(),
    ];
    if let Some(path) = &options.sweep_csv {
        results.push(sweep_csv(path));
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        let results = run_selfcheck(&SelfCheckOptions::default());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        let names: Vec<&str> = results.iter().map(|r| r.name).collect();
        assert_eq!(
            names,
            [
                "grad-fd",
                "penalty-unit-norm",
                "taylor-gap",
                "psnr-analytic",
                "weights-roundtrip"
            ]
        );
    }

    #[test]
    fn corrupted_backward_is_caught() {
        let results = run_selfcheck(&SelfCheckOptions {
            corrupt_backward: true,
            ..Default::default()
        });
        assert!(!results[0].passed);
        assert!(results[1..].iter().all(|r| r.passed));
    }

    #[test]
    fn bad_csv_fails() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "nope\n").unwrap();
        let r = sweep_csv(&path);
        assert!(!r.passed);
        assert!(!sweep_csv(&dir.path().join("missing.csv")).passed);
    }
}
