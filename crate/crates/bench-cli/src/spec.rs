//! Experiment spec files: a dataset, a model size, a list of algorithm arms
//! sharing common settings, and the trial protocol.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use dcrbm::{EvalSettings, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::dataset::DataSource;
use crate::failure::{CliResult, Failure};

pub const SPEC_FORMAT: &str = "dcrbm-experiment";

/// The spec file as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub dataset: DataSource,
    /// Defaults to the training data (the small benchmarks are evaluated on
    /// their full pattern set).
    #[serde(default)]
    pub test_dataset: Option<DataSource>,
    pub hidden: usize,
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Settings shared by all arms; any `TrainConfig` field. `batch_size`
    /// may be the string `"full"`.
    #[serde(default)]
    pub common: Map<String, Value>,
    /// Per-arm overrides of `common`, each with an optional `label`.
    pub arms: Vec<Map<String, Value>>,
    #[serde(default)]
    pub evaluation: EvalSettings,
    #[serde(default)]
    pub allow_unmatched_budget: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// One arm after merging and validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPlan {
    pub label: String,
    /// Trial seeds are `seed_base + t`; `config.seed` is replaced per trial.
    pub config: TrainConfig,
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::validation(format!("cannot read spec {}: {e}", path.display()))
        })?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)
            .map_err(|e| Failure::validation(format!("spec {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.dataset = spec.dataset.rebased(base);
        spec.test_dataset = spec.test_dataset.map(|d| d.rebased(base));
        Ok(spec)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("spec serializes")))
    }

    /// Merges every arm with `common` and checks the whole spec, returning
    /// all problems at once. `train_len` resolves `batch_size: "full"`.
    pub fn plan(&self, train_len: Option<usize>) -> Result<Vec<ArmPlan>, Vec<String>> {
        let mut problems = Vec::new();
        if self.trials == 0 {
            problems.push("trials must be >= 1".to_string());
        }
        if self.hidden == 0 {
            problems.push("hidden must be >= 1".to_string());
        }
        if self.arms.is_empty() {
            problems.push("at least one arm is required".to_string());
        }
        if self.common.contains_key("seed") {
            problems.push("common.seed is not allowed; trial seeds are seed_base + t".to_string());
        }
        if let Err(e) = self.evaluation.ais.validate() {
            problems.push(format!("evaluation.ais: {e}"));
        }
        let mut plans = Vec::new();
        let mut labels = BTreeSet::new();
        for (i, arm) in self.arms.iter().enumerate() {
            match merge_arm(&self.common, arm, train_len) {
                Ok((label, cfg)) => {
                    let label = label.unwrap_or_else(|| default_label(&cfg));
                    for p in cfg.problems() {
                        problems.push(format!("arm {i} ({label}): {p}"));
                    }
                    if !labels.insert(label.clone()) {
                        problems.push(format!("arm {i}: duplicate label {label:?}"));
                    }
                    plans.push(ArmPlan { label, config: cfg });
                }
                Err(e) => problems.push(format!("arm {i}: {e}")),
            }
        }
        if !self.allow_unmatched_budget && plans.len() > 1 {
            let budgets: BTreeSet<usize> = plans.iter().map(|p| p.config.budget_per_sample()).collect();
            if budgets.len() > 1 {
                let detail: Vec<String> = plans
                    .iter()
                    .map(|p| format!("{}={}", p.label, p.config.budget_per_sample()))
                    .collect();
                problems.push(format!(
                    "arms do not match Gibbs budgets (d*k_prime must equal k): {}; \
                     set allow_unmatched_budget to override",
                    detail.join(", ")
                ));
            }
        }
        problems.extend(self.dataset.problems("dataset"));
        if let Some(t) = &self.test_dataset {
            problems.extend(t.problems("test_dataset"));
        }
        if problems.is_empty() {
            Ok(plans)
        } else {
            Err(problems)
        }
    }
}

pub fn default_label(cfg: &TrainConfig) -> String {
    if cfg.algorithm.is_dcp() {
        format!("{}-d{}-k{}", cfg.algorithm, cfg.d, cfg.k_prime)
    } else {
        format!("{}-{}", cfg.algorithm, cfg.k)
    }
}

fn merge_arm(
    common: &Map<String, Value>,
    arm: &Map<String, Value>,
    train_len: Option<usize>,
) -> Result<(Option<String>, TrainConfig), String> {
    let mut merged = common.clone();
    let mut label = None;
    for (k, v) in arm {
        match k.as_str() {
            "label" => {
                label = Some(
                    v.as_str()
                        .ok_or_else(|| "label must be a string".to_string())?
                        .to_string(),
                )
            }
            "seed" => return Err("seed is not allowed; trial seeds are seed_base + t".into()),
            _ => {
                merged.insert(k.clone(), v.clone());
            }
        }
    }
    if merged.get("batch_size").and_then(Value::as_str) == Some("full") {
        // full batch: any size >= N; the dataset length when known
        merged.insert("batch_size".into(), Value::from(train_len.unwrap_or(usize::MAX)));
    }
    let cfg: TrainConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| e.to_string())?;
    if let Some(l) = &label {
        if l.is_empty() || l.contains(['/', '\\']) {
            return Err(format!("label {l:?} must be non-empty and contain no path separators"));
        }
    }
    Ok((label, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn spec(v: Value) -> ExperimentSpec {
        serde_json::from_value(v).unwrap()
    }

    fn base() -> Value {
        json!({
            "name": "t",
            "dataset": {"generator": "shifting-bar", "n": 9, "b": 1},
            "hidden": 4,
            "trials": 2,
            "common": {"eta": 0.3, "epochs": 10, "batch_size": "full"},
            "arms": [
                {"algorithm": "CD", "k": 12},
                {"algorithm": "SDCP", "d": 3, "k_prime": 4},
                {"algorithm": "CSDCP", "d": 3, "k_prime": 4, "label": "cs"}
            ]
        })
    }

    #[test]
    fn merges_common_and_labels() {
        let plans = spec(base()).plan(Some(9)).unwrap();
        let labels: Vec<_> = plans.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["CD-12", "SDCP-d3-k4", "cs"]);
        assert!(plans.iter().all(|p| p.config.batch_size == 9 && p.config.eta == 0.3));
    }

    #[test]
    fn reports_every_problem() {
        let mut v = base();
        v["trials"] = json!(0);
        v["arms"][0]["k"] = json!(10);
        v["arms"][1]["eta"] = json!(-1.0);
        let problems = spec(v).plan(Some(9)).unwrap_err();
        assert!(problems.iter().any(|p| p.contains("trials")));
        assert!(problems.iter().any(|p| p.contains("eta")));
        assert!(problems.iter().any(|p| p.contains("budget")));
    }

    #[test]
    fn budget_override_and_unknown_fields() {
        let mut v = base();
        v["arms"][0]["k"] = json!(10);
        v["allow_unmatched_budget"] = json!(true);
        assert!(spec(v).plan(Some(9)).is_ok());
        let mut v = base();
        v["arms"][0]["momentum"] = json!(0.9);
        assert!(spec(v).plan(Some(9)).unwrap_err()[0].contains("momentum"));
    }
}
