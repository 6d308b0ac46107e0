//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Every key has a default except `io.input`, which commands that
//! read a signal require.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use inrobust::data::WeightDtype;
use inrobust::loss::{LossAux, LossFamily, LossSpec, PenaltyGrad};
use inrobust::perturb::{NoiseFamily, NoiseScope, NoiseSpec};
use inrobust::sweep::{SweepJob, EVAL_SEED_OFFSET};
use inrobust::train::{BatchMode, TrainConfig};
use inrobust::SirenConfig;

/// Offset from the master seed to the Lipschitz power-iteration seed.
pub const POWER_SEED_OFFSET: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSection {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub omega_first: f64,
    pub omega_hidden: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSection {
    pub family: NoiseFamily,
    pub strength: f64,
    pub scope: NoiseScope,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub weights_dtype: WeightDtype,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub families: Vec<LossFamily>,
    pub lambdas: Vec<f64>,
    pub noise_families: Vec<NoiseFamily>,
    pub strengths: Vec<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub loss: LossSpec,
    pub noise: NoiseSection,
    pub io: IoSection,
    pub sweep: SweepSection,
}

const KEYS: &[&str] = &[
    "seed",
    "model.hidden_width",
    "model.hidden_layers",
    "model.omega_first",
    "model.omega_hidden",
    "train.epochs",
    "train.learning_rate",
    "train.adam_beta1",
    "train.adam_beta2",
    "train.adam_eps",
    "train.log_every",
    "train.batch",
    "loss.family",
    "loss.lambda",
    "loss.penalty_grad",
    "loss.power_iters",
    "loss.noise_family",
    "loss.noise_strength",
    "noise.family",
    "noise.strength",
    "noise.scope",
    "noise.trials",
    "io.input",
    "io.out_dir",
    "io.weights_dtype",
    "sweep.families",
    "sweep.lambdas",
    "sweep.noise_families",
    "sweep.strengths",
    "sweep.trials",
];

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("defaults are valid")
    }
}

struct Values {
    map: BTreeMap<String, String>,
}

impl Values {
    fn get<T: FromStr>(&self, key: &str, default: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.map.get(key).map(String::as_str).unwrap_or(default);
        raw.parse()
            .map_err(|e| ConfigError(format!("invalid value '{raw}' for {key}: {e}")))
    }

    fn list<T: FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.map.get(key).map(String::as_str).unwrap_or(default);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|item| {
                item.parse()
                    .map_err(|e| ConfigError(format!("invalid item '{item}' in {key}: {e}")))
            })
            .collect()
    }
}

fn parse_batch(raw: &str) -> Result<BatchMode, ConfigError> {
    match raw {
        "full" => Ok(BatchMode::Full),
        n => n.parse().map(BatchMode::Minibatch).map_err(|_| {
            ConfigError(format!(
                "invalid value '{raw}' for train.batch: expected full or a size"
            ))
        }),
    }
}

fn parse_dtype(raw: &str) -> Result<WeightDtype, ConfigError> {
    match raw {
        "f64" => Ok(WeightDtype::F64),
        "f32" => Ok(WeightDtype::F32),
        other => Err(ConfigError(format!(
            "invalid value '{other}' for io.weights_dtype: expected f32 or f64"
        ))),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!("line {}: expected `key = value`", i + 1)));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError(format!("line {}: unknown key '{key}'", i + 1)));
            }
            if map.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError(format!("line {}: duplicate key '{key}'", i + 1)));
            }
        }
        let v = Values { map };
        let seed: u64 = v.get("seed", "0")?;
        let loss_noise = NoiseSpec::new(
            v.get("loss.noise_family", "gaussian_mult")?,
            v.get("loss.noise_strength", "0.001")?,
            0,
        );
        let loss = LossSpec {
            family: v.get("loss.family", "mse")?,
            lambda: v.get("loss.lambda", "0.1")?,
            aux: LossAux {
                penalty_grad: v.get::<PenaltyGrad>("loss.penalty_grad", "first_order")?,
                power_iters: v.get("loss.power_iters", "20")?,
                power_seed: seed.wrapping_add(POWER_SEED_OFFSET),
                noise: loss_noise,
            },
        };
        let train = TrainConfig {
            epochs: v.get("train.epochs", "2000")?,
            learning_rate: v.get("train.learning_rate", "0.0001")?,
            adam_beta1: v.get("train.adam_beta1", "0.9")?,
            adam_beta2: v.get("train.adam_beta2", "0.999")?,
            adam_eps: v.get("train.adam_eps", "1e-8")?,
            seed,
            loss,
            log_every: v.get("train.log_every", "100")?,
            batch: parse_batch(v.map.get("train.batch").map_or("full", String::as_str))?,
        };
        let config = RunConfig {
            seed,
            model: ModelSection {
                hidden_width: v.get("model.hidden_width", "256")?,
                hidden_layers: v.get("model.hidden_layers", "3")?,
                omega_first: v.get("model.omega_first", "30")?,
                omega_hidden: v.get("model.omega_hidden", "30")?,
            },
            train,
            loss,
            noise: NoiseSection {
                family: v.get("noise.family", "gaussian_mult")?,
                strength: v.get("noise.strength", "0.001")?,
                scope: v.get("noise.scope", "all_params")?,
                trials: v.get("noise.trials", "20")?,
            },
            io: IoSection {
                input: v.map.get("io.input").filter(|s| !s.is_empty()).map(PathBuf::from),
                out_dir: PathBuf::from(v.map.get("io.out_dir").map_or("out", String::as_str)),
                weights_dtype: parse_dtype(v.map.get("io.weights_dtype").map_or("f64", String::as_str))?,
            },
            sweep: SweepSection {
                families: v.list("sweep.families", "mse,robust")?,
                lambdas: v.list("sweep.lambdas", "0.01,0.1,0.2,0.5")?,
                noise_families: v.list("sweep.noise_families", "gaussian_mult,binary_mask")?,
                strengths: v.list("sweep.strengths", "0.0001,0.001,0.01")?,
                trials: v.get("sweep.trials", "20")?,
            },
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: inrobust::Error| ConfigError(e.to_string());
        self.model_config(1, 1).validate().map_err(wrap)?;
        self.train.validate().map_err(wrap)?;
        self.eval_noise().validate().map_err(wrap)?;
        if self.noise.trials == 0 {
            return Err(ConfigError("noise.trials must be >= 1".into()));
        }
        self.sweep_job().validate().map_err(wrap)
    }

    pub fn model_config(&self, in_dim: usize, out_dim: usize) -> SirenConfig {
        SirenConfig {
            in_dim,
            out_dim,
            hidden_width: self.model.hidden_width,
            hidden_layers: self.model.hidden_layers,
            omega_first: self.model.omega_first,
            omega_hidden: self.model.omega_hidden,
        }
    }

    /// Evaluation noise; trial `t` uses seed `seed + EVAL_SEED_OFFSET + t`.
    pub fn eval_noise(&self) -> NoiseSpec {
        NoiseSpec {
            scope: self.noise.scope,
            ..NoiseSpec::new(
                self.noise.family,
                self.noise.strength,
                self.seed.wrapping_add(EVAL_SEED_OFFSET),
            )
        }
    }

    pub fn sweep_job(&self) -> SweepJob {
        SweepJob {
            families: self.sweep.families.clone(),
            lambdas: self.sweep.lambdas.clone(),
            noise_families: self.sweep.noise_families.clone(),
            strengths: self.sweep.strengths.clone(),
            trials: self.sweep.trials,
            scope: self.noise.scope,
            master_seed: self.seed,
        }
    }

    /// Replaces the master seed and everything derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.train.seed = seed;
        self.loss.aux.power_seed = seed.wrapping_add(POWER_SEED_OFFSET);
        self.train.loss = self.loss;
        self
    }

    /// Every key with its effective value, in a form [`RunConfig::parse`] accepts.
    pub fn resolved(&self) -> String {
        let t = &self.train;
        let batch = match t.batch {
            BatchMode::Full => "full".to_string(),
            BatchMode::Minibatch(n) => n.to_string(),
        };
        let penalty = match self.loss.aux.penalty_grad {
            PenaltyGrad::FirstOrder => "first_order",
            PenaltyGrad::Exact => "exact",
        };
        let dtype = match self.io.weights_dtype {
            WeightDtype::F32 => "f32",
            WeightDtype::F64 => "f64",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("model.hidden_width", self.model.hidden_width.to_string()),
            ("model.hidden_layers", self.model.hidden_layers.to_string()),
            ("model.omega_first", self.model.omega_first.to_string()),
            ("model.omega_hidden", self.model.omega_hidden.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.learning_rate", t.learning_rate.to_string()),
            ("train.adam_beta1", t.adam_beta1.to_string()),
            ("train.adam_beta2", t.adam_beta2.to_string()),
            ("train.adam_eps", t.adam_eps.to_string()),
            ("train.log_every", t.log_every.to_string()),
            ("train.batch", batch),
            ("loss.family", self.loss.family.to_string()),
            ("loss.lambda", self.loss.lambda.to_string()),
            ("loss.penalty_grad", penalty.to_string()),
            ("loss.power_iters", self.loss.aux.power_iters.to_string()),
            ("loss.noise_family", self.loss.aux.noise.family.to_string()),
            ("loss.noise_strength", self.loss.aux.noise.strength.to_string()),
            ("noise.family", self.noise.family.to_string()),
            ("noise.strength", self.noise.strength.to_string()),
            ("noise.scope", self.noise.scope.name().to_string()),
            ("noise.trials", self.noise.trials.to_string()),
            (
                "io.input",
                self.io
                    .input
                    .as_ref()
                    .map_or(String::new(), |p| p.display().to_string()),
            ),
            ("io.out_dir", self.io.out_dir.display().to_string()),
            ("io.weights_dtype", dtype.to_string()),
            ("sweep.families", join(&self.sweep.families)),
            ("sweep.lambdas", join(&self.sweep.lambdas)),
            ("sweep.noise_families", join(&self.sweep.noise_families)),
            ("sweep.strengths", join(&self.sweep.strengths)),
            ("sweep.trials", self.sweep.trials.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
