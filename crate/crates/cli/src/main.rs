//! `inrobust` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O or input
//! format error, 3 numeric failure, 4 failed self-check.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inrobust::data::{load_signal, load_weights, save_reconstruction, save_weights, CoordinateDataset};
use inrobust::metrics::{clean_psnr, noisy_psnr_stats};
use inrobust::model::{predict, MlpParams};
use inrobust::perturb::{perturb, NoiseFamily};
use inrobust::selfcheck::{run_selfcheck, SelfCheckOptions};
use inrobust::sweep::{run_sweep, write_outputs};
use inrobust::train::train;

use config::{ConfigError, RunConfig};

const WEIGHTS_FILE: &str = "weights.inr";
const REPORT_FILE: &str = "train_report.csv";
const RECONSTRUCTION_STEM: &str = "reconstruction";
const RESOLVED_FILE: &str = "resolved_config.txt";

#[derive(Parser)]
#[command(
    name = "inrobust",
    version,
    about = "Train and stress-test noise-robust implicit neural representations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a network to `io.input` and write weights, a training report and a reconstruction.
    Train(Common),
    /// Reconstruct the signal from a weight file and print its clean PSNR.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
    },
    /// Perturb a trained network repeatedly and report PSNR statistics.
    PerturbEval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        weights: PathBuf,
        /// gaussian_mult, gaussian_add or binary_mask.
        #[arg(long)]
        noise: Option<NoiseFamily>,
        /// σ for Gaussian noise, drop probability for masks.
        #[arg(long)]
        strength: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Also write one perturbed reconstruction per trial into the output directory.
        #[arg(long)]
        save_reconstructions: bool,
    },
    /// Train one model per (loss family, λ) and evaluate each on the noise grid.
    Sweep(Common),
    /// Run the built-in verification battery.
    Selfcheck {
        /// Sweep CSV to validate as well.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, hide = true)]
        corrupt_backward: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `io.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Core(inrobust::Error),
    Sweep(usize),
    Selfcheck(usize),
}

impl From<inrobust::Error> for Failure {
    fn from(e: inrobust::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Core(e) if e.is_io() => 2,
            Failure::Core(inrobust::Error::NonFinite(_)) | Failure::Sweep(_) => 3,
            Failure::Core(_) => 1,
            Failure::Selfcheck(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(m) => format!("configuration error: {m}"),
            Failure::Core(e) => e.to_string(),
            Failure::Sweep(n) => format!("{n} sweep cell(s) failed; see `error` rows"),
            Failure::Selfcheck(n) => format!("{n} self-check(s) failed"),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Core(inrobust::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config = config.with_seed(seed);
    }
    if let Some(out) = &common.out {
        config.io.out_dir = out.clone();
    }
    Ok(config)
}

fn load_input(config: &RunConfig) -> Result<CoordinateDataset, Failure> {
    let input = config
        .io
        .input
        .as_ref()
        .ok_or_else(|| Failure::Config("io.input is required".into()))?;
    Ok(load_signal(input)?)
}

fn prepare_out_dir(config: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = config.io.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    let resolved = dir.join(RESOLVED_FILE);
    fs::write(&resolved, config.resolved()).map_err(|e| io_failure(&resolved, e))?;
    Ok(dir)
}

fn load_matching_weights(path: &Path, dataset: &CoordinateDataset) -> Result<MlpParams, Failure> {
    let params = load_weights(path)?;
    let c = params.config;
    if (c.in_dim, c.out_dim) != (dataset.in_dim(), dataset.out_dim()) {
        return Err(Failure::Config(format!(
            "{} maps {} -> {} dimensions but the input signal needs {} -> {}",
            path.display(),
            c.in_dim,
            c.out_dim,
            dataset.in_dim(),
            dataset.out_dim()
        )));
    }
    Ok(params)
}

fn cmd_train(common: &Common) -> Result<(), Failure> {
    let config = load_config(common)?;
    let dataset = load_input(&config)?;
    let model = config.model_config(dataset.in_dim(), dataset.out_dim());
    let dir = prepare_out_dir(&config)?;
    let (params, report) = train(&dataset, model, &config.train)?;

    let weights = dir.join(WEIGHTS_FILE);
    save_weights(&params, &weights, config.io.weights_dtype)?;
    let report_path = dir.join(REPORT_FILE);
    fs::write(&report_path, report.to_csv()).map_err(|e| io_failure(&report_path, e))?;
    let outputs = predict(&params, &dataset.coords)?;
    let recon = save_reconstruction(
        &outputs,
        &dataset.shape,
        dataset.modality,
        &dir.join(RECONSTRUCTION_STEM),
    )?;

    println!("loss family: {} (lambda {})", config.loss.family, config.loss.lambda);
    println!("parameters: {}", params.param_count());
    println!("clean PSNR: {:.6} dB", report.final_psnr_db);
    println!("wall time: {:.2} s", report.wall_time_s);
    println!("weights: {}", weights.display());
    println!("report: {}", report_path.display());
    println!("reconstruction: {}", recon.display());
    Ok(())
}

fn cmd_render(common: &Common, weights: &Path) -> Result<(), Failure> {
    let config = load_config(common)?;
    let dataset = load_input(&config)?;
    let params = load_matching_weights(weights, &dataset)?;
    let dir = prepare_out_dir(&config)?;
    let outputs = predict(&params, &dataset.coords)?;
    let recon = save_reconstruction(
        &outputs,
        &dataset.shape,
        dataset.modality,
        &dir.join(RECONSTRUCTION_STEM),
    )?;
    println!("clean PSNR: {:.6} dB", clean_psnr(&params, &dataset)?);
    println!("reconstruction: {}", recon.display());
    Ok(())
}

fn cmd_perturb_eval(
    common: &Common,
    weights: &Path,
    noise: Option<NoiseFamily>,
    strength: Option<f64>,
    trials: Option<usize>,
    save: bool,
) -> Result<(), Failure> {
    let mut config = load_config(common)?;
    if let Some(family) = noise {
        config.noise.family = family;
    }
    if let Some(s) = strength {
        config.noise.strength = s;
    }
    if let Some(t) = trials {
        if t == 0 {
            return Err(Failure::Config("--trials must be >= 1".into()));
        }
        config.noise.trials = t;
    }
    let spec = config.eval_noise();
    spec.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let dataset = load_input(&config)?;
    let params = load_matching_weights(weights, &dataset)?;
    let stats = noisy_psnr_stats(&params, &dataset, &spec, config.noise.trials)?;
    if save {
        let dir = prepare_out_dir(&config)?;
        for t in 0..config.noise.trials as u64 {
            let noisy = perturb(&params, &spec.with_seed(spec.seed.wrapping_add(t)))?;
            let stem = dir.join(format!("perturbed_trial_{t:03}"));
            save_reconstruction(
                &predict(&noisy, &dataset.coords)?,
                &dataset.shape,
                dataset.modality,
                &stem,
            )?;
        }
    }
    println!(
        "noise: {} strength {} scope {} trials {}",
        spec.family,
        spec.strength,
        spec.scope.name(),
        config.noise.trials
    );
    println!("clean PSNR: {:.6} dB", clean_psnr(&params, &dataset)?);
    println!("mean PSNR: {:.6} dB", stats.mean_db);
    println!("std PSNR: {:.6} dB", stats.std_db);
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<(), Failure> {
    let config = load_config(common)?;
    let dataset = load_input(&config)?;
    let model = config.model_config(dataset.in_dim(), dataset.out_dim());
    let dir = prepare_out_dir(&config)?;
    let outcome = run_sweep(&config.sweep_job(), &dataset, model, &config.train)?;
    let (rows, summary) = write_outputs(&outcome, &dir)?;
    for s in &outcome.summaries {
        let fmt = |v: Option<f64>| v.map_or("error".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:<12} lambda {:<6} {:<14} {:<8} mean {} dB (std {}, clean {})",
            s.loss_family.name(),
            s.lambda,
            s.noise_family.map_or("none", |n| n.name()),
            s.strength,
            fmt(s.mean_psnr_db),
            fmt(s.std_psnr_db),
            fmt(s.clean_psnr_db)
        );
    }
    println!("rows: {}", rows.display());
    println!("summary: {}", summary.display());
    for (family, lambda, message) in &outcome.failures {
        eprintln!("cell {family} lambda {lambda} failed: {message}");
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Sweep(outcome.failures.len()))
    }
}

fn cmd_selfcheck(csv: Option<PathBuf>, corrupt_backward: bool) -> Result<(), Failure> {
    let results = run_selfcheck(&SelfCheckOptions {
        corrupt_backward,
        sweep_csv: csv,
    });
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    match results.iter().filter(|r| !r.passed).count() {
        0 => Ok(()),
        n => Err(Failure::Selfcheck(n)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Train(common) => cmd_train(common),
        Command::Render { common, weights } => cmd_render(common, weights),
        Command::PerturbEval {
            common,
            weights,
            noise,
            strength,
            trials,
            save_reconstructions,
        } => cmd_perturb_eval(common, weights, *noise, *strength, *trials, *save_reconstructions),
        Command::Sweep(common) => cmd_sweep(common),
        Command::Selfcheck { csv, corrupt_backward } => cmd_selfcheck(csv.clone(), *corrupt_backward),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.exit_code())
        }
    }
}
