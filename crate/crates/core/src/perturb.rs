//! Weight-perturbation models and the first-order Taylor-gap diagnostic.
//!
//! Every family draws one random value per flattened parameter, in flatten
//! order, whether or not that parameter is in scope. Masks and noise therefore
//! depend only on the seed and the parameter count, never on parameter values
//! or on the scope setting.

use std::fmt;
use std::str::FromStr;

use crate::data::CoordinateDataset;
use crate::error::{Error, Result};
use crate::loss::{eval_mse, mse_loss};
use crate::math::{norm2, Rng};
use crate::model::MlpParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseFamily {
    /// `θ' = θ (1 + σ z)`.
    GaussianMult,
    /// `θ' = θ + σ z`.
    GaussianAdd,
    /// `θ' = θ m`, `m ~ Bernoulli(1 - p)`.
    BinaryMask,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 3] = [
        NoiseFamily::GaussianMult,
        NoiseFamily::GaussianAdd,
        NoiseFamily::BinaryMask,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::GaussianMult => "gaussian_mult",
            NoiseFamily::GaussianAdd => "gaussian_add",
            NoiseFamily::BinaryMask => "binary_mask",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_mult" | "gaussian" => Ok(NoiseFamily::GaussianMult),
            "gaussian_add" => Ok(NoiseFamily::GaussianAdd),
            "binary_mask" | "binary" => Ok(NoiseFamily::BinaryMask),
            other => Err(Error::InvalidArgument(format!(
                "unknown noise family '{other}' (expected gaussian_mult, gaussian_add or binary_mask)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseScope {
    AllParams,
    WeightsOnly,
}

impl NoiseScope {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseScope::AllParams => "all_params",
            NoiseScope::WeightsOnly => "weights_only",
        }
    }
}

impl FromStr for NoiseScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_params" => Ok(NoiseScope::AllParams),
            "weights_only" => Ok(NoiseScope::WeightsOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown noise scope '{other}' (expected all_params or weights_only)"
            ))),
        }
    }
}

/// One weight-perturbation draw: family, strength (σ or p), scope and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub strength: f64,
    pub scope: NoiseScope,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, strength: f64, seed: u64) -> Self {
        Self {
            family,
            strength,
            scope: NoiseScope::AllParams,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            NoiseFamily::BinaryMask => (0.0..=1.0).contains(&self.strength),
            _ => self.strength >= 0.0 && self.strength.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid {} strength {}",
                self.family, self.strength
            )))
        }
    }
}

/// Applies the perturbation to a flattened parameter vector.
///
/// `bias_mask[i]` marks bias entries, which `WeightsOnly` leaves untouched.
pub fn perturb_flat(theta: &[f64], bias_mask: &[bool], spec: &NoiseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if bias_mask.len() != theta.len() {
        return Err(Error::shape(
            "perturb_flat",
            format!("{} parameters", theta.len()),
            format!("{} mask flags", bias_mask.len()),
        ));
    }
    if spec.strength == 0.0 {
        return Ok(theta.to_vec());
    }
    let mut rng = Rng::new(spec.seed);
    let in_scope = |i: usize| spec.scope == NoiseScope::AllParams || !bias_mask[i];
    let sigma = spec.strength;
    let out = theta
        .iter()
        .enumerate()
        .map(|(i, &t)| match spec.family {
            NoiseFamily::GaussianMult => {
                let z = rng.normal();
                if in_scope(i) {
                    t * (1.0 + sigma * z)
                } else {
                    t
                }
            }
            NoiseFamily::GaussianAdd => {
                let z = rng.normal();
                if in_scope(i) {
                    t + sigma * z
                } else {
                    t
                }
            }
            NoiseFamily::BinaryMask => {
                let dropped = rng.uniform() < sigma;
                if dropped && in_scope(i) {
                    0.0
                } else {
                    t
                }
            }
        })
        .collect();
    Ok(out)
}

/// Returns a perturbed copy of `params`.
pub fn perturb(params: &MlpParams, spec: &NoiseSpec) -> Result<MlpParams> {
    let theta = params.flatten();
    let noisy = perturb_flat(&theta, &params.config.bias_mask(), spec)?;
    MlpParams::unflatten(params.config, &noisy)
}

/// One Monte-Carlo sample of the first-order loss-change bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorSample {
    /// `|L(θ + Δθ) - L(θ)|`.
    pub delta_loss: f64,
    /// `||∇L(θ)|| ||Δθ||`.
    pub bound: f64,
    /// `||Δθ||`, kept for fitting the second-order remainder.
    pub delta_norm: f64,
}

/// Samples `trials` perturbations of `params` (seed `spec.seed + t` for trial `t`)
/// and compares the loss change with its first-order bound.
pub fn taylor_gap(
    params: &MlpParams,
    spec: &NoiseSpec,
    dataset: &CoordinateDataset,
    trials: usize,
) -> Result<Vec<TaylorSample>> {
    let clean = eval_mse(params, dataset)?;
    let config = params.config;
    taylor_gap_with(
        &params.flatten(),
        &config.bias_mask(),
        spec,
        trials,
        clean.total,
        norm2(&clean.grad),
        |theta| mse_loss(&MlpParams::unflatten(config, theta)?, dataset),
    )
}

/// Taylor-gap sampling for an arbitrary objective over a flat parameter vector.
pub fn taylor_gap_with<F>(
    theta: &[f64],
    bias_mask: &[bool],
    spec: &NoiseSpec,
    trials: usize,
    loss_at_theta: f64,
    grad_norm: f64,
    loss: F,
) -> Result<Vec<TaylorSample>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("taylor_gap needs at least one trial".into()));
    }
    (0..trials as u64)
        .map(|t| {
            let noisy = perturb_flat(theta, bias_mask, &spec.with_seed(spec.seed.wrapping_add(t)))?;
            let delta: Vec<f64> = noisy.iter().zip(theta).map(|(a, b)| a - b).collect();
            let delta_norm = norm2(&delta);
            let delta_loss = (loss(&noisy)? - loss_at_theta).abs();
            Ok(TaylorSample {
                delta_loss,
                bound: grad_norm * delta_norm,
                delta_norm,
            })
        })
        .collect()
}
