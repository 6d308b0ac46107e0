//! Implicit neural representations that stay accurate when their weights are
//! perturbed.
//!
//! A SIREN coordinate network is fitted to an image, audio clip or video with
//! Adam. Besides plain MSE, the training loss may add a penalty on the norm of
//! the loss gradient with respect to the parameters; by a first-order Taylor
//! argument this bounds the loss increase under small weight noise. The crate
//! also ships L1, Lipschitz and noise-aware baselines, weight-noise models,
//! PSNR evaluation, parameter sweeps and file I/O.

pub mod data;
pub mod error;
pub mod loss;
pub mod math;
pub mod metrics;
pub mod model;
pub mod perturb;
pub mod selfcheck;
pub mod sweep;
pub mod train;

pub use data::{CoordinateDataset, Modality};
pub use error::{Error, Result};
pub use loss::{LossFamily, LossSpec, PenaltyGrad};
pub use math::{Matrix, Rng};
pub use model::{init_siren, predict, MlpParams, SirenConfig};
pub use perturb::{perturb, NoiseFamily, NoiseScope, NoiseSpec};
pub use train::{train, BatchMode, TrainConfig, TrainReport};
