//! `train`: runs every (arm, trial) pair and writes curves, a summary and
//! checkpoints.
//!
//! Layout of the output directory:
//!
//! ```text
//! spec.json                      resolved spec (arms merged)
//! curves.csv                     all runs, one block per arm
//! summary.csv                    mean/std per arm and eval epoch, one block per arm
//! summary.json
//! runs/<arm>/trial-<t>.csv       per-run curve incl. wall clock
//! runs/<arm>/trial-<t>.run.json  TrainingRun
//! checkpoints/<arm>/trial-<t>/epoch-0.params.json
//! checkpoints/<arm>/trial-<t>/final.checkpoint.json
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use dcrbm::data::write_atomic;
use dcrbm::trainers::{train_with, Checkpoint, CurvePoint, TrainingRun};
use dcrbm::{AtllKind, BinaryDataset};
use rayon::prelude::*;
use serde::Serialize;

use crate::failure::{CliResult, Failure};
use crate::spec::{ArmPlan, ExperimentSpec, SPEC_FORMAT};

pub const CURVE_HEADER: &str = "algorithm,arm,trial,epoch,atll,atll_kind";
pub const RUN_CURVE_HEADER: &str = "algorithm,arm,trial,epoch,atll,atll_kind,wall_clock_s";
pub const SUMMARY_CSV_HEADER: &str = "arm,algorithm,epoch,mean_atll,std_atll,trials";
pub const SUMMARY_FORMAT: &str = "dcrbm-summary";
pub const SUMMARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSpec<'a> {
    pub format: &'static str,
    pub version: u32,
    pub spec_hash: String,
    pub spec: &'a ExperimentSpec,
    pub arms: &'a [ArmPlan],
    pub train_rows: usize,
    pub test_rows: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryPoint {
    pub epoch: usize,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub label: String,
    pub algorithm: String,
    pub atll_kind: AtllKind,
    pub budget_per_sample: usize,
    /// Gibbs transitions per epoch, measured; identical for every trial.
    pub transitions_per_epoch: Vec<u64>,
    pub points: Vec<SummaryPoint>,
    pub final_mean: f64,
    pub final_std: f64,
    pub final_per_trial: Vec<f64>,
    /// First eval epoch where the mean curve covers 90% of its rise from
    /// epoch 0 to its maximum.
    pub epoch_to_90pct_of_max: Option<usize>,
    pub seconds_per_epoch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub format: &'static str,
    pub version: u32,
    pub name: String,
    pub spec_hash: String,
    pub trials: usize,
    pub seed_base: u64,
    /// Every arm spent the same number of Gibbs transitions in every epoch.
    pub budget_parity: bool,
    pub arms: Vec<ArmSummary>,
}

pub struct Experiment {
    pub spec: ExperimentSpec,
    pub arms: Vec<ArmPlan>,
    pub train: BinaryDataset,
    pub test: BinaryDataset,
    pub out_dir: PathBuf,
}

impl Experiment {
    /// Loads data and validates everything before anything is written.
    pub fn prepare(mut spec: ExperimentSpec, seed: Option<u64>, out: Option<&Path>) -> CliResult<Self> {
        if let Some(s) = seed {
            spec.seed_base = s;
        }
        // spec-level problems first, including missing data files
        spec.plan(None).map_err(Failure::Validation)?;
        let train = spec.dataset.load()?;
        let test = match &spec.test_dataset {
            Some(t) => t.load()?,
            None => train.clone(),
        };
        let mut problems = Vec::new();
        if train.is_empty() {
            problems.push("dataset is empty".to_string());
        }
        if test.is_empty() {
            problems.push("test dataset is empty".to_string());
        }
        if test.dim() != train.dim() {
            problems.push(format!("test dimension {} != training dimension {}", test.dim(), train.dim()));
        }
        if !problems.is_empty() {
            return Err(Failure::Validation(problems));
        }
        let arms = spec.plan(Some(train.len())).map_err(Failure::Validation)?;
        let out_dir = out
            .map(Path::to_path_buf)
            .or_else(|| spec.output.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(&spec.name));
        Ok(Self {
            spec,
            arms,
            train,
            test,
            out_dir,
        })
    }

    pub fn run(&self, progress: bool) -> CliResult<Summary> {
        let hash = self.spec.hash();
        let resolved = ResolvedSpec {
            format: SPEC_FORMAT,
            version: 1,
            spec_hash: hash.clone(),
            spec: &self.spec,
            arms: &self.arms,
            train_rows: self.train.len(),
            test_rows: self.test.len(),
            dim: self.train.dim(),
        };
        write_json(&self.out_dir.join("spec.json"), &resolved)?;

        let jobs: Vec<(usize, usize)> = (0..self.arms.len())
            .flat_map(|a| (0..self.spec.trials).map(move |t| (a, t)))
            .collect();
        let runs: Vec<TrainingRun> = jobs
            .par_iter()
            .map(|&(a, t)| self.run_one(a, t, progress))
            .collect::<CliResult<_>>()?;

        let per_arm: Vec<&[TrainingRun]> = runs.chunks(self.spec.trials).collect();
        let summary = self.summarize(&per_arm, hash);
        write_atomic_str(&self.out_dir.join("curves.csv"), &curves_csv(&self.arms, &per_arm))?;
        write_atomic_str(&self.out_dir.join("summary.csv"), &summary_csv(&summary))?;
        write_json(&self.out_dir.join("summary.json"), &summary)?;
        if !summary.budget_parity && !self.spec.allow_unmatched_budget {
            return Err(Failure::Runtime(
                "measured Gibbs transitions differ between arms despite matched budgets".into(),
            ));
        }
        Ok(summary)
    }

    fn run_one(&self, arm: usize, trial: usize, progress: bool) -> CliResult<TrainingRun> {
        let plan = &self.arms[arm];
        let mut cfg = plan.config.clone();
        cfg.seed = self.spec.seed_base + trial as u64;
        let ckpt_dir = self
            .out_dir
            .join("checkpoints")
            .join(&plan.label)
            .join(format!("trial-{trial}"));
        let mut wrote_initial = Ok(());
        let mut last_ckpt: Option<Checkpoint> = None;
        let run = train_with(
            &self.train,
            &self.test,
            self.spec.hidden,
            &cfg,
            &self.spec.evaluation,
            |trainer, point| {
                if point.epoch == 0 {
                    wrote_initial = write_json(&ckpt_dir.join("epoch-0.params.json"), trainer.initial_model());
                }
                if point.epoch == cfg.epochs {
                    last_ckpt = Some(trainer.checkpoint());
                }
            },
        )
        .map_err(|e| Failure::Runtime(format!("{} trial {trial}: {e}", plan.label)))?;
        wrote_initial?;
        if let Some(c) = last_ckpt {
            write_json(&ckpt_dir.join("final.checkpoint.json"), &c)?;
        }
        let run_dir = self.out_dir.join("runs").join(&plan.label);
        let mut csv = format!("{RUN_CURVE_HEADER}\n");
        for p in &run.curve {
            csv_row(&mut csv, plan, trial, p);
            let _ = writeln!(csv, ",{}", p.wall_clock_s);
        }
        write_atomic_str(&run_dir.join(format!("trial-{trial}.csv")), &csv)?;
        write_json(&run_dir.join(format!("trial-{trial}.run.json")), &run)?;
        if progress {
            eprintln!(
                "{} trial {trial}: final ATLL {:.4} ({:.2e} s/epoch)",
                plan.label,
                run.final_atll(),
                run.seconds_per_epoch
            );
        }
        Ok(run)
    }

    fn summarize(&self, per_arm: &[&[TrainingRun]], spec_hash: String) -> Summary {
        let arms: Vec<ArmSummary> = self
            .arms
            .iter()
            .zip(per_arm)
            .map(|(plan, runs)| summarize_arm(plan, runs))
            .collect();
        let budget_parity = arms
            .iter()
            .all(|a| a.transitions_per_epoch == arms[0].transitions_per_epoch)
            && per_arm
                .iter()
                .flat_map(|r| r.iter())
                .all(|r| r.transitions_per_epoch == per_arm[0][0].transitions_per_epoch);
        Summary {
            format: SUMMARY_FORMAT,
            version: SUMMARY_VERSION,
            name: self.spec.name.clone(),
            spec_hash,
            trials: self.spec.trials,
            seed_base: self.spec.seed_base,
            budget_parity,
            arms,
        }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn summarize_arm(plan: &ArmPlan, runs: &[TrainingRun]) -> ArmSummary {
    let epochs: Vec<usize> = runs[0].curve.iter().map(|p| p.epoch).collect();
    let points: Vec<SummaryPoint> = epochs
        .iter()
        .enumerate()
        .map(|(i, &epoch)| {
            let xs: Vec<f64> = runs.iter().map(|r| r.curve[i].atll).collect();
            let (mean, std) = mean_std(&xs);
            SummaryPoint {
                epoch,
                mean,
                std,
                trials: xs.len(),
            }
        })
        .collect();
    let finals: Vec<f64> = runs.iter().map(TrainingRun::final_atll).collect();
    let (final_mean, final_std) = mean_std(&finals);
    ArmSummary {
        label: plan.label.clone(),
        algorithm: plan.config.algorithm.to_string(),
        atll_kind: runs[0].curve[0].kind,
        budget_per_sample: plan.config.budget_per_sample(),
        transitions_per_epoch: runs[0].transitions_per_epoch.clone(),
        epoch_to_90pct_of_max: epoch_to_fraction_of_max(&points, 0.9),
        points,
        final_mean,
        final_std,
        final_per_trial: finals,
        seconds_per_epoch: runs.iter().map(|r| r.seconds_per_epoch).sum::<f64>() / runs.len() as f64,
    }
}

/// First epoch whose mean reaches `start + frac · (max - start)`.
pub fn epoch_to_fraction_of_max(points: &[SummaryPoint], frac: f64) -> Option<usize> {
    let start = points.first()?.mean;
    let max = points.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max);
    if max <= start {
        return None;
    }
    let target = start + frac * (max - start);
    points.iter().find(|p| p.mean >= target).map(|p| p.epoch)
}

fn csv_row(out: &mut String, plan: &ArmPlan, trial: usize, p: &CurvePoint) {
    let _ = write!(
        out,
        "{},{},{trial},{},{},{}",
        plan.config.algorithm,
        plan.label,
        p.epoch,
        p.atll,
        p.kind.name()
    );
}

/// All runs, grouped by arm; arm blocks are separated by two blank lines so
/// gnuplot can address them with `index`.
pub fn curves_csv(arms: &[ArmPlan], per_arm: &[&[TrainingRun]]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for (i, (plan, runs)) in arms.iter().zip(per_arm).enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        for (trial, run) in runs.iter().enumerate() {
            for p in &run.curve {
                csv_row(&mut out, plan, trial, p);
                out.push('\n');
            }
        }
    }
    out
}

pub fn summary_csv(summary: &Summary) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for (i, arm) in summary.arms.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        for p in &arm.points {
            let _ = writeln!(out, "{},{},{},{},{},{}", arm.label, arm.algorithm, p.epoch, p.mean, p.std, p.trials);
        }
    }
    out
}

fn write_atomic_str(path: &Path, text: &str) -> CliResult<()> {
    write_atomic(path, text.as_bytes()).map_err(|e| Failure::Runtime(e.to_string()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic_str(path, &text)
}
