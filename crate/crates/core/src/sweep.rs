//! Cross-product experiments: loss families × λ values × noise points.
//!
//! Every cell is trained from the same master seed, so cells differ only in
//! their objective. Noise evaluation uses `master_seed + EVAL_SEED_OFFSET` as
//! the base seed for every noise point, so all cells see the same draws.
//!
//! Row CSV: `loss_family,lambda,noise_family,strength,trial,psnr_db`.
//! Summary CSV: `loss_family,lambda,noise_family,strength,trials,mean_psnr_db,std_psnr_db,clean_psnr_db`.
//! Floats use six decimals, `inf` marks a zero-error reconstruction and
//! `error` marks a cell that failed. Clean-only rows use noise family `none`.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::CoordinateDataset;
use crate::error::{Error, Result};
use crate::loss::{LossFamily, LossSpec};
use crate::metrics::{clean_psnr, noisy_psnr_stats};
use crate::model::{MlpParams, SirenConfig};
use crate::perturb::{NoiseFamily, NoiseScope, NoiseSpec};
use crate::train::{train, TrainConfig};

pub const EVAL_SEED_OFFSET: u64 = 1 << 40;
pub const ROWS_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.csv";
const ROW_HEADER: &str = "loss_family,lambda,noise_family,strength,trial,psnr_db";
const SUMMARY_HEADER: &str = "loss_family,lambda,noise_family,strength,trials,mean_psnr_db,std_psnr_db,clean_psnr_db";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub families: Vec<LossFamily>,
    pub lambdas: Vec<f64>,
    pub noise_families: Vec<NoiseFamily>,
    pub strengths: Vec<f64>,
    pub trials: usize,
    pub scope: NoiseScope,
    pub master_seed: u64,
}

impl SweepJob {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.families.is_empty() {
            return bad("sweep needs at least one loss family");
        }
        if self.trials == 0 {
            return bad("sweep needs at least one trial");
        }
        if !self.strengths.is_empty() && self.noise_families.is_empty() {
            return bad("sweep strengths given without a noise family");
        }
        if self.families.iter().any(|f| f.uses_lambda()) && self.lambdas.is_empty() {
            return bad("sweep needs at least one lambda for penalized families");
        }
        for &lambda in &self.lambdas {
            LossSpec {
                lambda,
                ..LossSpec::robust(0.0)
            }
            .validate()?;
        }
        for &family in &self.noise_families {
            for &strength in &self.strengths {
                NoiseSpec::new(family, strength, 0).validate()?;
            }
        }
        Ok(())
    }

    /// One `(family, λ)` pair per model to train. Families without a penalty
    /// ignore λ and get a single cell with λ = 0.
    pub fn cells(&self) -> Vec<(LossFamily, f64)> {
        let mut cells = Vec::new();
        for &family in &self.families {
            if family.uses_lambda() {
                cells.extend(self.lambdas.iter().map(|&l| (family, l)));
            } else {
                cells.push((family, 0.0));
            }
        }
        cells
    }

    fn noise_points(&self) -> Vec<(NoiseFamily, f64)> {
        self.noise_families
            .iter()
            .flat_map(|&f| self.strengths.iter().map(move |&s| (f, s)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub loss_family: LossFamily,
    pub lambda: f64,
    /// `None` for clean-only rows.
    pub noise_family: Option<NoiseFamily>,
    pub strength: f64,
    pub trial: usize,
    /// `None` when the cell failed.
    pub psnr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub loss_family: LossFamily,
    pub lambda: f64,
    pub noise_family: Option<NoiseFamily>,
    pub strength: f64,
    pub trials: usize,
    pub mean_psnr_db: Option<f64>,
    pub std_psnr_db: Option<f64>,
    pub clean_psnr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub summaries: Vec<SweepSummary>,
    /// `(family, λ, message)` for every failed cell.
    pub failures: Vec<(LossFamily, f64, String)>,
}

impl SweepOutcome {
    pub fn summary(
        &self,
        family: LossFamily,
        lambda: f64,
        noise: Option<NoiseFamily>,
        strength: f64,
    ) -> Option<&SweepSummary> {
        self.summaries.iter().find(|s| {
            s.loss_family == family && s.lambda == lambda && s.noise_family == noise && s.strength == strength
        })
    }
}

/// Trains every cell with `template`, replacing its seed, family and λ, and
/// evaluates it.
pub fn run_sweep(
    job: &SweepJob,
    dataset: &CoordinateDataset,
    model_config: SirenConfig,
    template: &TrainConfig,
) -> Result<SweepOutcome> {
    run_sweep_with(job, dataset, |loss| {
        let config = TrainConfig {
            seed: job.master_seed,
            loss: LossSpec {
                aux: template.loss.aux,
                ..*loss
            },
            ..*template
        };
        train(dataset, model_config, &config).map(|(params, _)| params)
    })
}

/// Like [`run_sweep`], with model production delegated to `model_for`, which
/// may train or load.
pub fn run_sweep_with<F>(job: &SweepJob, dataset: &CoordinateDataset, mut model_for: F) -> Result<SweepOutcome>
where
    F: FnMut(&LossSpec) -> Result<MlpParams>,
{
    job.validate()?;
    let eval_seed = job.master_seed.wrapping_add(EVAL_SEED_OFFSET);
    let points = job.noise_points();
    let mut outcome = SweepOutcome {
        records: Vec::new(),
        summaries: Vec::new(),
        failures: Vec::new(),
    };
    for (family, lambda) in job.cells() {
        let loss = LossSpec {
            family,
            lambda,
            ..LossSpec::mse()
        };
        let evaluated = model_for(&loss).and_then(|params| {
            let clean = clean_psnr(&params, dataset)?;
            let stats = points
                .iter()
                .map(|&(nf, s)| {
                    let spec = NoiseSpec {
                        scope: job.scope,
                        ..NoiseSpec::new(nf, s, eval_seed)
                    };
                    noisy_psnr_stats(&params, dataset, &spec, job.trials)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((clean, stats))
        });
        let record = |noise_family, strength, trial, psnr_db| SweepRecord {
            loss_family: family,
            lambda,
            noise_family,
            strength,
            trial,
            psnr_db,
        };
        let summary = |noise_family, strength, trials, mean, std, clean| SweepSummary {
            loss_family: family,
            lambda,
            noise_family,
            strength,
            trials,
            mean_psnr_db: mean,
            std_psnr_db: std,
            clean_psnr_db: clean,
        };
        match evaluated {
            Ok((clean, stats)) => {
                if points.is_empty() {
                    outcome.records.push(record(None, 0.0, 0, Some(clean)));
                    outcome
                        .summaries
                        .push(summary(None, 0.0, 1, Some(clean), Some(0.0), Some(clean)));
                }
                for (&(nf, s), st) in points.iter().zip(&stats) {
                    for (t, &p) in st.per_trial.iter().enumerate() {
                        outcome.records.push(record(Some(nf), s, t, Some(p)));
                    }
                    outcome.summaries.push(summary(
                        Some(nf),
                        s,
                        job.trials,
                        Some(st.mean_db),
                        Some(st.std_db),
                        Some(clean),
                    ));
                }
            }
            Err(e) => {
                if points.is_empty() {
                    outcome.records.push(record(None, 0.0, 0, None));
                    outcome.summaries.push(summary(None, 0.0, 1, None, None, None));
                }
                for &(nf, s) in &points {
                    for t in 0..job.trials {
                        outcome.records.push(record(Some(nf), s, t, None));
                    }
                    outcome
                        .summaries
                        .push(summary(Some(nf), s, job.trials, None, None, None));
                }
                outcome.failures.push((family, lambda, e.to_string()));
            }
        }
    }
    outcome.records.sort_by(|a, b| {
        row_key(a.loss_family, a.lambda, a.noise_family, a.strength)
            .cmp_with(&row_key(b.loss_family, b.lambda, b.noise_family, b.strength))
            .then(a.trial.cmp(&b.trial))
    });
    outcome.summaries.sort_by(|a, b| {
        row_key(a.loss_family, a.lambda, a.noise_family, a.strength).cmp_with(&row_key(
            b.loss_family,
            b.lambda,
            b.noise_family,
            b.strength,
        ))
    });
    Ok(outcome)
}

struct RowKey {
    family: &'static str,
    lambda: f64,
    noise: &'static str,
    strength: f64,
}

fn row_key(family: LossFamily, lambda: f64, noise: Option<NoiseFamily>, strength: f64) -> RowKey {
    RowKey {
        family: family.name(),
        lambda,
        noise: noise_name(noise),
        strength,
    }
}

impl RowKey {
    fn cmp_with(&self, other: &RowKey) -> Ordering {
        self.family
            .cmp(other.family)
            .then(self.lambda.total_cmp(&other.lambda))
            .then(self.noise.cmp(other.noise))
            .then(self.strength.total_cmp(&other.strength))
    }
}

fn noise_name(noise: Option<NoiseFamily>) -> &'static str {
    noise.map_or("none", |n| n.name())
}

fn fmt_db(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => "error".into(),
    }
}

fn to_csv<const N: usize>(header: &str, rows: impl Iterator<Item = [String; N]>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header.split(',')).expect("writing to memory");
    for row in rows {
        writer.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("fields are UTF-8")
}

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    to_csv(
        ROW_HEADER,
        records.iter().map(|r| {
            [
                r.loss_family.name().to_string(),
                format!("{:.6}", r.lambda),
                noise_name(r.noise_family).to_string(),
                format!("{:.6}", r.strength),
                r.trial.to_string(),
                fmt_db(r.psnr_db),
            ]
        }),
    )
}

pub fn summaries_to_csv(summaries: &[SweepSummary]) -> String {
    to_csv(
        SUMMARY_HEADER,
        summaries.iter().map(|s| {
            [
                s.loss_family.name().to_string(),
                format!("{:.6}", s.lambda),
                noise_name(s.noise_family).to_string(),
                format!("{:.6}", s.strength),
                s.trials.to_string(),
                fmt_db(s.mean_psnr_db),
                fmt_db(s.std_psnr_db),
                fmt_db(s.clean_psnr_db),
            ]
        }),
    )
}

/// Parses a row-level sweep CSV as written by [`records_to_csv`].
pub fn parse_records_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Csv {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>().join(",") != ROW_HEADER {
        return Err(Error::Csv {
            line: 1,
            reason: format!("expected header `{ROW_HEADER}`"),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let err = |reason: String| Error::Csv { line, reason };
        let num = |name: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .ok()
                .filter(|x| !x.is_nan())
                .ok_or_else(|| err(format!("bad {name} `{v}`")))
        };
        let noise_family = match &row[2] {
            "none" => None,
            other => Some(other.parse::<NoiseFamily>().map_err(|e| err(e.to_string()))?),
        };
        let psnr_db = match &row[5] {
            "error" => None,
            v => match num("psnr_db", v)? {
                x if x == f64::NEG_INFINITY => return Err(err("psnr_db of -inf".into())),
                x => Some(x),
            },
        };
        records.push(SweepRecord {
            loss_family: row[0].parse().map_err(|e: Error| err(e.to_string()))?,
            lambda: num("lambda", &row[1])?,
            noise_family,
            strength: num("strength", &row[3])?,
            trial: row[4].parse().map_err(|_| err(format!("bad trial `{}`", &row[4])))?,
            psnr_db,
        });
    }
    Ok(records)
}

/// Writes both CSVs into `dir`, returning their paths.
pub fn write_outputs(outcome: &SweepOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = dir.join(ROWS_FILE);
    let summary = dir.join(SUMMARY_FILE);
    fs::write(&rows, records_to_csv(&outcome.records)).map_err(|e| Error::io(&rows, e))?;
    fs::write(&summary, summaries_to_csv(&outcome.summaries)).map_err(|e| Error::io(&summary, e))?;
    Ok((rows, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::gradient_image;
    use crate::model::init_siren;

    fn model() -> SirenConfig {
        SirenConfig {
            hidden_width: 8,
            hidden_layers: 2,
            ..SirenConfig::new(2, 1)
        }
    }

    fn template() -> TrainConfig {
        TrainConfig {
            epochs: 20,
            log_every: 10,
            ..TrainConfig::default()
        }
    }

    fn job() -> SweepJob {
        SweepJob {
            families: vec![LossFamily::Mse, LossFamily::Robust],
            lambdas: vec![0.01, 0.1],
            noise_families: vec![NoiseFamily::GaussianMult, NoiseFamily::BinaryMask],
            strengths: vec![1e-3, 1e-2],
            trials: 3,
            scope: NoiseScope::AllParams,
            master_seed: 11,
        }
    }

    #[test]
    fn grid_shape_and_order() {
        let ds = gradient_image(6, 6);
        let out = run_sweep(&job(), &ds, model(), &template()).unwrap();
        // mse collapses to one cell: 3 cells x 4 noise points x 3 trials.
        assert_eq!(out.records.len(), 36);
        assert_eq!(out.summaries.len(), 12);
        assert!(out.failures.is_empty());
        let csv = records_to_csv(&out.records);
        assert_eq!(csv.lines().count(), 37);
        assert!(csv.starts_with(ROW_HEADER));
        assert!(!csv.contains('\r'));
        assert_eq!(parse_records_csv(&csv).unwrap().len(), 36);
        let first = &out.records[0];
        assert_eq!(
            (first.loss_family, first.noise_family, first.trial),
            (LossFamily::Mse, Some(NoiseFamily::BinaryMask), 0)
        );
    }

    #[test]
    fn empty_strengths_give_clean_rows() {
        let ds = gradient_image(5, 5);
        let job = SweepJob {
            strengths: vec![],
            ..job()
        };
        let out = run_sweep(&job, &ds, model(), &template()).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out
            .records
            .iter()
            .all(|r| r.noise_family.is_none() && r.psnr_db.unwrap().is_finite()));
        assert!(records_to_csv(&out.records).contains(",none,"));
    }

    #[test]
    fn single_cell_matches_direct_calls() {
        let ds = gradient_image(6, 6);
        let job = SweepJob {
            families: vec![LossFamily::Robust],
            lambdas: vec![0.1],
            noise_families: vec![NoiseFamily::GaussianAdd],
            strengths: vec![0.01],
            trials: 4,
            ..job()
        };
        let out = run_sweep(&job, &ds, model(), &template()).unwrap();
        let config = TrainConfig {
            seed: job.master_seed,
            loss: LossSpec::robust(0.1),
            ..template()
        };
        let (params, _) = train(&ds, model(), &config).unwrap();
        let spec = NoiseSpec::new(NoiseFamily::GaussianAdd, 0.01, job.master_seed + EVAL_SEED_OFFSET);
        let direct = noisy_psnr_stats(&params, &ds, &spec, 4).unwrap();
        let got: Vec<f64> = out.records.iter().map(|r| r.psnr_db.unwrap()).collect();
        assert_eq!(got, direct.per_trial);
        let s = &out.summaries[0];
        assert_eq!(s.mean_psnr_db, Some(direct.mean_db));
        assert_eq!(s.clean_psnr_db, Some(clean_psnr(&params, &ds).unwrap()));
    }

    #[test]
    fn failures_become_error_rows() {
        let ds = gradient_image(4, 4);
        let good = init_siren(model(), 0).unwrap();
        let out = run_sweep_with(&job(), &ds, |loss| {
            if loss.lambda == 0.1 {
                Err(Error::NonFinite("synthetic".into()))
            } else {
                Ok(good.clone())
            }
        })
        .unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.records.len(), 36);
        let errors = out.records.iter().filter(|r| r.psnr_db.is_none()).count();
        assert_eq!(errors, 12);
        let csv = records_to_csv(&out.records);
        assert_eq!(csv.matches(",error\n").count(), 12);
        // Reparsing then re-emitting is stable at six decimals.
        assert_eq!(records_to_csv(&parse_records_csv(&csv).unwrap()), csv);
        assert!(summaries_to_csv(&out.summaries).contains("error,error,error"));
    }

    #[test]
    fn deterministic_bytes() {
        let ds = gradient_image(5, 5);
        let a = run_sweep(&job(), &ds, model(), &template()).unwrap();
        let b = run_sweep(&job(), &ds, model(), &template()).unwrap();
        assert_eq!(records_to_csv(&a.records), records_to_csv(&b.records));
        assert_eq!(summaries_to_csv(&a.summaries), summaries_to_csv(&b.summaries));
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(parse_records_csv("a,b\n").is_err());
        let h = format!("{ROW_HEADER}\n");
        assert!(parse_records_csv(&format!("{h}mse,0,none,0,0\n")).is_err());
        assert!(parse_records_csv(&format!("{h}mse,x,none,0,0,1.0\n")).is_err());
        assert!(parse_records_csv(&format!("{h}bogus,0,none,0,0,1.0\n")).is_err());
        let ok = parse_records_csv(&format!("{h}mse,0.000000,none,0.000000,0,inf\n")).unwrap();
        assert_eq!(ok[0].psnr_db, Some(f64::INFINITY));
    }

    #[test]
    fn invalid_jobs() {
        assert!(SweepJob { trials: 0, ..job() }.validate().is_err());
        assert!(SweepJob {
            lambdas: vec![],
            ..job()
        }
        .validate()
        .is_err());
        assert!(SweepJob {
            strengths: vec![2.0],
            ..job()
        }
        .validate()
        .is_err());
        assert!(SweepJob {
            families: vec![],
            ..job()
        }
        .validate()
        .is_err());
    }
}
