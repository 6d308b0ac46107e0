//! Adam optimization of a coordinate network under any [`LossSpec`].

use std::time::Instant;

use crate::data::CoordinateDataset;
use crate::error::{Error, Result};
use crate::loss::{evaluate, LossSpec};
use crate::math::Rng;
use crate::metrics::reconstruction_psnr;
use crate::model::{init_siren, predict, MlpParams, SirenConfig};

/// Offset added to the training seed for minibatch shuffling.
pub const SHUFFLE_SEED_OFFSET: u64 = 1;
/// Offset added to the training seed for per-step `noise_aware` draws; step `s`
/// (1-based) uses `seed + NOISE_SEED_OFFSET + s`.
pub const NOISE_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Full,
    Minibatch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Seeds initialization; shuffling and training noise derive from it.
    pub seed: u64,
    pub loss: LossSpec,
    pub log_every: usize,
    pub batch: BatchMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            loss: LossSpec::mse(),
            log_every: 100,
            batch: BatchMode::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad(format!("adam eps must be positive, got {}", self.adam_eps));
        }
        if self.log_every == 0 {
            return bad("log_every must be >= 1".into());
        }
        if self.batch == BatchMode::Minibatch(0) {
            return bad("minibatch size must be >= 1".into());
        }
        self.loss.validate()
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(d: usize) -> Self {
        Self {
            m: vec![0.0; d],
            v: vec![0.0; d],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], config: &TrainConfig) -> Result<()> {
    if params.len() != state.m.len() || grad.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!("state of {}", state.m.len()),
            format!("params {} / grad {}", params.len(), grad.len()),
        ));
    }
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    pub data_term: f64,
    pub penalty_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub records: Vec<LogRecord>,
    pub final_psnr_db: f64,
    pub wall_time_s: f64,
}

impl TrainReport {
    /// CSV with header `step,data_term,penalty_term,total`; wall time is omitted
    /// so reruns are byte-identical.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,data_term,penalty_term,total\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.6e},{:.6e},{:.6e}\n",
                r.step, r.data_term, r.penalty_term, r.total
            ));
        }
        out
    }
}

/// Initializes a SIREN from `config.seed` and trains it.
pub fn train(
    dataset: &CoordinateDataset,
    model_config: SirenConfig,
    config: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    if dataset.in_dim() != model_config.in_dim || dataset.out_dim() != model_config.out_dim {
        return Err(Error::shape(
            "train",
            format!("network {}->{}", model_config.in_dim, model_config.out_dim),
            format!("dataset {}->{}", dataset.in_dim(), dataset.out_dim()),
        ));
    }
    let init = init_siren(model_config, config.seed)?;
    train_from(init, dataset, config)
}

/// Trains starting from `params`.
pub fn train_from(
    params: MlpParams,
    dataset: &CoordinateDataset,
    config: &TrainConfig,
) -> Result<(MlpParams, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let started = Instant::now();
    let model_config = params.config;
    let mut theta = params.flatten();
    let mut adam = AdamState::new(theta.len());
    let mut shuffle_rng = Rng::new(config.seed.wrapping_add(SHUFFLE_SEED_OFFSET));
    let mut records = Vec::new();
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    let batches_per_epoch = match config.batch {
        BatchMode::Full => 1,
        BatchMode::Minibatch(size) => dataset.len().div_ceil(size),
    };
    let total_steps = config.epochs * batches_per_epoch;
    let mut step = 0;
    for _ in 0..config.epochs {
        if let BatchMode::Minibatch(_) = config.batch {
            for i in (1..order.len()).rev() {
                order.swap(i, shuffle_rng.index(i + 1));
            }
        }
        for b in 0..batches_per_epoch {
            step += 1;
            let current = MlpParams::unflatten(model_config, &theta)?;
            let noise_seed = config.seed.wrapping_add(NOISE_SEED_OFFSET).wrapping_add(step as u64);
            let eval = match config.batch {
                BatchMode::Full => evaluate(&config.loss, &current, dataset, noise_seed)?,
                BatchMode::Minibatch(size) => {
                    let idx = &order[b * size..((b + 1) * size).min(order.len())];
                    let batch = CoordinateDataset {
                        coords: dataset.coords.select_rows(idx),
                        targets: dataset.targets.select_rows(idx),
                        shape: vec![idx.len()],
                        modality: dataset.modality,
                    };
                    evaluate(&config.loss, &current, &batch, noise_seed)?
                }
            };
            if !eval.total.is_finite() || eval.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("training loss at step {step}")));
            }
            if step % config.log_every == 0 || step == 1 || step == total_steps {
                records.push(LogRecord {
                    step,
                    data_term: eval.data_term,
                    penalty_term: eval.penalty_term,
                    total: eval.total,
                });
            }
            adam_step(&mut adam, &mut theta, &eval.grad, config)?;
        }
    }
    let trained = MlpParams::unflatten(model_config, &theta)?;
    let final_psnr_db = reconstruction_psnr(&predict(&trained, &dataset.coords)?, &dataset.targets)?;
    Ok((
        trained,
        TrainReport {
            records,
            final_psnr_db,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    ))
}
