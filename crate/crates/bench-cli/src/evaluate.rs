//! `evaluate`: ATLL of a saved model on a dataset.

use std::path::{Path, PathBuf};

use dcrbm::trainers::{Checkpoint, CHECKPOINT_FORMAT};
use dcrbm::{AisConfig, AtllKind, EvalSettings, EvaluationRecord, RbmParams};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dataset::DataSource;
use crate::failure::{CliResult, Failure};

pub const EVALUATION_FORMAT: &str = "dcrbm-evaluation";

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub format: &'static str,
    pub version: u32,
    pub model_file: PathBuf,
    /// SHA-256 of the training config embedded in a checkpoint, if any.
    pub config_hash: Option<String>,
    pub epoch: Option<usize>,
    pub dataset: String,
    pub m: usize,
    pub n: usize,
    #[serde(flatten)]
    pub record: EvaluationRecord,
}

/// Reads either a full checkpoint or a bare parameter document.
pub fn load_model(path: &Path) -> CliResult<(RbmParams, Option<Checkpoint>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read model {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| Failure::validation(format!("{}: {e}", path.display()));
    if value.get("format").and_then(Value::as_str) == Some(CHECKPOINT_FORMAT) {
        let ckpt: Checkpoint = serde_json::from_value(value).map_err(bad)?;
        Ok((ckpt.model.clone(), Some(ckpt)))
    } else {
        Ok((serde_json::from_value(value).map_err(bad)?, None))
    }
}

pub struct EvaluateArgs {
    pub model: PathBuf,
    pub data: DataSource,
    pub mode: Option<AtllKind>,
    pub ais: AisConfig,
    pub cap: usize,
    pub seed: u64,
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<EvaluationReport> {
    let (params, ckpt) = load_model(&args.model)?;
    let data = args.data.load()?;
    let d = params.dims();
    if data.dim() != d.m {
        return Err(Failure::validation(format!(
            "dataset dimension {} does not match the model's {} visible units",
            data.dim(),
            d.m
        )));
    }
    let settings = EvalSettings {
        enumeration_cap: args.cap,
        ais: args.ais,
        force: args.mode,
    };
    let record = settings.evaluate(&params, data.patterns(), args.seed)?;
    let config_hash = ckpt.as_ref().map(|c| {
        hex::encode(Sha256::digest(serde_json::to_vec(&c.config).expect("config serializes")))
    });
    Ok(EvaluationReport {
        format: EVALUATION_FORMAT,
        version: 1,
        model_file: args.model.clone(),
        config_hash,
        epoch: ckpt.map(|c| c.epoch),
        dataset: data.name().to_string(),
        m: d.m,
        n: d.n,
        record,
    })
}
