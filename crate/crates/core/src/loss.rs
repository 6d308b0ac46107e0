//! Loss families and their training gradients.
//!
//! The robust loss is `L(θ) + λ ||∇L(θ)||`. Its default training gradient is
//! `∇L + λ ∇L / ||∇L||`: the penalty is differentiated as if `∇L` were fixed,
//! which needs nothing beyond the ordinary backward pass. [`PenaltyGrad::Exact`]
//! instead uses the true derivative `H ∇L / ||∇L||`, with the Hessian-vector
//! product taken by a central difference of gradients along `∇L`.

use std::fmt;
use std::str::FromStr;

use crate::data::CoordinateDataset;
use crate::error::{Error, Result};
use crate::math::{norm2, Rng};
use crate::model::{backward_mse, forward, mse_value, predict, MlpParams};
use crate::perturb::{perturb, NoiseFamily, NoiseSpec};

/// Below this gradient norm the penalty gradient is taken as zero.
pub const EPS_GRAD: f64 = 1e-12;

/// Step along the unit gradient direction for the exact penalty gradient.
const HVP_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LossFamily {
    Mse,
    Robust,
    L1,
    Lipschitz,
    NoiseAware,
}

impl LossFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::Mse => "mse",
            LossFamily::Robust => "robust",
            LossFamily::L1 => "l1",
            LossFamily::Lipschitz => "lipschitz",
            LossFamily::NoiseAware => "noise_aware",
        }
    }

    /// Whether λ changes the objective.
    pub fn uses_lambda(&self) -> bool {
        matches!(self, LossFamily::Robust | LossFamily::L1 | LossFamily::Lipschitz)
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossFamily::Mse),
            "robust" => Ok(LossFamily::Robust),
            "l1" => Ok(LossFamily::L1),
            "lipschitz" => Ok(LossFamily::Lipschitz),
            "noise_aware" => Ok(LossFamily::NoiseAware),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss family '{other}' (expected mse, robust, l1, lipschitz or noise_aware)"
            ))),
        }
    }
}

/// How the robust penalty is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyGrad {
    /// `∇L / ||∇L||`.
    FirstOrder,
    /// `H ∇L / ||∇L||` via a finite-difference Hessian-vector product.
    Exact,
}

impl FromStr for PenaltyGrad {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_order" => Ok(PenaltyGrad::FirstOrder),
            "exact" => Ok(PenaltyGrad::Exact),
            other => Err(Error::InvalidArgument(format!(
                "unknown penalty gradient mode '{other}' (expected first_order or exact)"
            ))),
        }
    }
}

/// Family-specific settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossAux {
    pub penalty_grad: PenaltyGrad,
    /// Power iterations per weight matrix for the Lipschitz penalty.
    pub power_iters: usize,
    /// Seed for the power-iteration start vectors.
    pub power_seed: u64,
    /// Training-time noise for `noise_aware`; the seed is re-derived every step.
    pub noise: NoiseSpec,
}

impl Default for LossAux {
    fn default() -> Self {
        Self {
            penalty_grad: PenaltyGrad::FirstOrder,
            power_iters: 20,
            power_seed: 0,
            noise: NoiseSpec::new(NoiseFamily::GaussianMult, 1e-3, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub family: LossFamily,
    pub lambda: f64,
    pub aux: LossAux,
}

impl LossSpec {
    pub fn mse() -> Self {
        Self {
            family: LossFamily::Mse,
            lambda: 0.0,
            aux: LossAux::default(),
        }
    }

    pub fn robust(lambda: f64) -> Self {
        Self {
            family: LossFamily::Robust,
            lambda,
            aux: LossAux::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        if self.family == LossFamily::Lipschitz && self.aux.power_iters == 0 {
            return Err(Error::InvalidArgument(
                "Lipschitz penalty needs at least one power iteration".into(),
            ));
        }
        if self.family == LossFamily::NoiseAware {
            self.aux.noise.validate()?;
        }
        Ok(())
    }
}

/// A loss value split into its data and penalty terms, with the training gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub total: f64,
    pub data_term: f64,
    pub penalty_term: f64,
    pub grad: Vec<f64>,
}

fn check_dataset(params: &MlpParams, dataset: &CoordinateDataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let c = params.config;
    if dataset.in_dim() != c.in_dim || dataset.out_dim() != c.out_dim {
        return Err(Error::shape(
            "loss",
            format!("network {}->{}", c.in_dim, c.out_dim),
            format!("dataset {}->{}", dataset.in_dim(), dataset.out_dim()),
        ));
    }
    Ok(())
}

/// Reconstruction loss only, no gradient.
pub fn mse_loss(params: &MlpParams, dataset: &CoordinateDataset) -> Result<f64> {
    check_dataset(params, dataset)?;
    mse_value(&predict(params, &dataset.coords)?, &dataset.targets)
}

/// Flattened `∇L` and `L`.
pub fn mse_gradient(params: &MlpParams, dataset: &CoordinateDataset) -> Result<(Vec<f64>, f64)> {
    check_dataset(params, dataset)?;
    let (_, cache) = forward(params, &dataset.coords)?;
    let (grad, loss) = backward_mse(params, &cache, &dataset.coords, &dataset.targets)?;
    Ok((grad.flatten(), loss))
}

pub fn eval_mse(params: &MlpParams, dataset: &CoordinateDataset) -> Result<LossEval> {
    let (grad, loss) = mse_gradient(params, dataset)?;
    Ok(LossEval {
        total: loss,
        data_term: loss,
        penalty_term: 0.0,
        grad,
    })
}

/// `L(θ + Δθ)` for one draw of `noise`.
pub fn eval_perturbed_mse(params: &MlpParams, noise: &NoiseSpec, dataset: &CoordinateDataset) -> Result<f64> {
    mse_loss(&perturb(params, noise)?, dataset)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "lambda must be a finite non-negative number, got {lambda}"
        )))
    }
}

/// Robust loss with the first-order penalty gradient.
pub fn eval_robust(params: &MlpParams, dataset: &CoordinateDataset, lambda: f64) -> Result<LossEval> {
    eval_robust_with(params, dataset, lambda, PenaltyGrad::FirstOrder)
}

pub fn eval_robust_with(
    params: &MlpParams,
    dataset: &CoordinateDataset,
    lambda: f64,
    mode: PenaltyGrad,
) -> Result<LossEval> {
    check_lambda(lambda)?;
    let (mut grad, loss) = mse_gradient(params, dataset)?;
    let gnorm = norm2(&grad);
    if lambda > 0.0 && gnorm >= EPS_GRAD {
        let penalty_grad = match mode {
            PenaltyGrad::FirstOrder => grad.iter().map(|g| g / gnorm).collect(),
            PenaltyGrad::Exact => exact_penalty_gradient(params, dataset, &grad, gnorm)?,
        };
        for (g, p) in grad.iter_mut().zip(&penalty_grad) {
            *g += lambda * p;
        }
    }
    Ok(LossEval {
        total: loss + lambda * gnorm,
        data_term: loss,
        penalty_term: gnorm,
        grad,
    })
}

/// `H ĝ` with `ĝ = ∇L / ||∇L||`, which equals `∇_θ ||∇L(θ)||`.
fn exact_penalty_gradient(
    params: &MlpParams,
    dataset: &CoordinateDataset,
    grad: &[f64],
    gnorm: f64,
) -> Result<Vec<f64>> {
    let theta = params.flatten();
    let shifted = |sign: f64| -> Result<Vec<f64>> {
        let moved: Vec<f64> = theta
            .iter()
            .zip(grad)
            .map(|(t, g)| t + sign * HVP_STEP * g / gnorm)
            .collect();
        Ok(mse_gradient(&MlpParams::unflatten(params.config, &moved)?, dataset)?.0)
    };
    let plus = shifted(1.0)?;
    let minus = shifted(-1.0)?;
    Ok(plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * HVP_STEP))
        .collect())
}

/// MSE plus `λ ||θ||_1`, subgradient `sign(θ)` with `sign(0) = 0`.
pub fn eval_l1(params: &MlpParams, dataset: &CoordinateDataset, lambda: f64) -> Result<LossEval> {
    check_lambda(lambda)?;
    let (mut grad, loss) = mse_gradient(params, dataset)?;
    let theta = params.flatten();
    let penalty: f64 = theta.iter().map(|t| t.abs()).sum();
    for (g, t) in grad.iter_mut().zip(&theta) {
        let sign = if *t > 0.0 {
            1.0
        } else if *t < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g += lambda * sign;
    }
    Ok(LossEval {
        total: loss + lambda * penalty,
        data_term: loss,
        penalty_term: penalty,
        grad,
    })
}

/// Largest singular value of a row-major `rows x cols` matrix by power iteration
/// on `W^T W`, with its left and right singular vectors.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn spectral_norm(weight: &crate::math::Matrix, iters: usize, seed: u64) -> SpectralEstimate {
    let (rows, cols) = weight.shape();
    let mut rng = Rng::new(seed);
    let mut v: Vec<f64> = (0..cols).map(|_| rng.normal()).collect();
    let mut u = vec![0.0; rows];
    let normalize = |x: &mut Vec<f64>| {
        let n = norm2(x);
        if n > 0.0 {
            x.iter_mut().for_each(|e| *e /= n);
        }
        n
    };
    normalize(&mut v);
    let apply = |v: &[f64], u: &mut Vec<f64>| {
        for (r, ur) in u.iter_mut().enumerate() {
            *ur = crate::math::dot(weight.row(r), v);
        }
    };
    for _ in 0..iters {
        apply(&v, &mut u);
        let mut next = vec![0.0; cols];
        for (r, &ur) in u.iter().enumerate() {
            for (n, w) in next.iter_mut().zip(weight.row(r)) {
                *n += ur * w;
            }
        }
        if normalize(&mut next) == 0.0 {
            return SpectralEstimate {
                sigma: 0.0,
                u: vec![0.0; rows],
                v: vec![0.0; cols],
            };
        }
        v = next;
    }
    apply(&v, &mut u);
    let sigma = normalize(&mut u);
    if sigma == 0.0 {
        return SpectralEstimate {
            sigma: 0.0,
            u: vec![0.0; rows],
            v: vec![0.0; cols],
        };
    }
    SpectralEstimate { sigma, u, v }
}

/// MSE plus `λ Σ_l σ_max(W_l)²` over all weight matrices.
///
/// The penalty gradient of each layer is `2 σ u v^T`; layer `l` starts its power
/// iteration from seed `power_seed + l`.
pub fn eval_lipschitz(
    params: &MlpParams,
    dataset: &CoordinateDataset,
    lambda: f64,
    power_iters: usize,
    power_seed: u64,
) -> Result<LossEval> {
    check_lambda(lambda)?;
    if power_iters == 0 {
        return Err(Error::InvalidArgument(
            "Lipschitz penalty needs at least one power iteration".into(),
        ));
    }
    let (mut grad, loss) = mse_gradient(params, dataset)?;
    let mut penalty = 0.0;
    let mut offset = 0;
    for (l, layer) in params.layers.iter().enumerate() {
        let est = spectral_norm(&layer.weight, power_iters, power_seed.wrapping_add(l as u64));
        penalty += est.sigma * est.sigma;
        let cols = layer.weight.cols();
        for (r, ur) in est.u.iter().enumerate() {
            for (c, vc) in est.v.iter().enumerate() {
                grad[offset + r * cols + c] += lambda * 2.0 * est.sigma * ur * vc;
            }
        }
        offset += layer.weight.as_slice().len() + layer.bias.len();
    }
    Ok(LossEval {
        total: loss + lambda * penalty,
        data_term: loss,
        penalty_term: penalty,
        grad,
    })
}

/// Loss and gradient at one perturbed copy of `params`, reported as the
/// gradient for the clean parameters.
pub fn noise_aware_grad(params: &MlpParams, noise: &NoiseSpec, dataset: &CoordinateDataset) -> Result<LossEval> {
    let noisy = perturb(params, noise)?;
    eval_mse(&noisy, dataset)
}

/// Dispatches on `spec.family`. `step_seed` seeds the noise draw of
/// `noise_aware`; the other families ignore it.
pub fn evaluate(spec: &LossSpec, params: &MlpParams, dataset: &CoordinateDataset, step_seed: u64) -> Result<LossEval> {
    spec.validate()?;
    match spec.family {
        LossFamily::Mse => eval_mse(params, dataset),
        LossFamily::Robust => eval_robust_with(params, dataset, spec.lambda, spec.aux.penalty_grad),
        LossFamily::L1 => eval_l1(params, dataset, spec.lambda),
        LossFamily::Lipschitz => {
            eval_lipschitz(params, dataset, spec.lambda, spec.aux.power_iters, spec.aux.power_seed)
        }
        LossFamily::NoiseAware => noise_aware_grad(params, &spec.aux.noise.with_seed(step_seed), dataset),
    }
}
