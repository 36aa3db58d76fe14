//! Likelihood evaluation: exact ATLL by enumeration for small models and
//! annealed importance sampling (AIS) estimates of `log Z` for large ones.
//!
//! AIS anneals from a base RBM with no weights and no hidden biases. Its
//! visible biases are either the target's (default) or zero. The
//! intermediate unnormalized marginals are
//!
//! `log p*_β(v) = (1-β) b_A·v + β b·v + Σ_i softplus(β (W v + c)_i)`
//!
//! and each ladder step applies one block Gibbs sweep that leaves `p_β`
//! invariant. All weight bookkeeping is done in log space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_mean_exp, log_sum_exp, sigmoid, softplus};
use crate::model::{BinaryPattern, RbmParams, DEFAULT_ENUMERATION_CAP};
use crate::rng::{streams, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `β_k = k / (T - 1)`.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AisBase {
    /// Zero weights, zero hidden biases, the target's visible biases.
    TargetVisibleBiases,
    /// The uniform distribution (all parameters zero).
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AisConfig {
    #[serde(default = "default_particles")]
    pub num_particles: usize,
    /// Number of distributions on the ladder, endpoints included.
    #[serde(default = "default_temps")]
    pub num_temps: usize,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    #[serde(default = "default_base")]
    pub base: AisBase,
}

fn default_particles() -> usize {
    100
}
fn default_temps() -> usize {
    10_000
}
fn default_schedule() -> Schedule {
    Schedule::Linear
}
fn default_base() -> AisBase {
    AisBase::TargetVisibleBiases
}

impl Default for AisConfig {
    fn default() -> Self {
        Self {
            num_particles: default_particles(),
            num_temps: default_temps(),
            schedule: default_schedule(),
            base: default_base(),
        }
    }
}

impl AisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles < 2 {
            return Err(Error::InvalidConfig(format!(
                "AIS needs at least 2 particles (got {})",
                self.num_particles
            )));
        }
        if self.num_temps < 2 {
            return Err(Error::InvalidConfig(format!(
                "AIS needs at least 2 temperatures (got {})",
                self.num_temps
            )));
        }
        Ok(())
    }

    pub fn ladder(&self) -> Vec<f64> {
        match self.schedule {
            Schedule::Linear => {
                let last = (self.num_temps - 1) as f64;
                (0..self.num_temps).map(|k| k as f64 / last).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogZEstimate {
    pub log_z: f64,
    pub log_z_base: f64,
    pub log_weights: Vec<f64>,
    /// Effective sample size `(Σw)² / Σw²` of the importance weights.
    pub ess: f64,
}

struct AisModel<'a> {
    params: &'a RbmParams,
    /// `W^T`, `m × n`, row-major, for adding the columns of active visibles.
    weights_t: Vec<f64>,
    base_bias: Vec<f64>,
}

impl<'a> AisModel<'a> {
    fn new(params: &'a RbmParams, base: AisBase) -> Self {
        let weights_t = params
            .weights()
            .t()
            .as_standard_layout()
            .iter()
            .copied()
            .collect();
        let base_bias = match base {
            AisBase::TargetVisibleBiases => params.visible_bias().to_vec(),
            AisBase::Uniform => vec![0.0; params.dims().m],
        };
        Self {
            params,
            weights_t,
            base_bias,
        }
    }

    fn log_z_base(&self) -> f64 {
        self.base_bias.iter().map(|&b| softplus(b)).sum::<f64>()
            + self.params.dims().n as f64 * std::f64::consts::LN_2
    }

    /// `a = W v + c`.
    fn hidden_input(&self, v: &[u8], out: &mut [f64]) {
        let n = out.len();
        out.copy_from_slice(self.params.hidden_bias().as_slice().unwrap());
        for (j, _) in v.iter().enumerate().filter(|(_, &x)| x == 1) {
            for (o, w) in out.iter_mut().zip(&self.weights_t[j * n..(j + 1) * n]) {
                *o += w;
            }
        }
    }

    /// `(b - b_A)·v`.
    fn bias_gap(&self, v: &[u8]) -> f64 {
        self.params
            .visible_bias()
            .iter()
            .zip(&self.base_bias)
            .zip(v)
            .map(|((b, ba), &x)| (b - ba) * x as f64)
            .sum()
    }

    fn run_particle(&self, ladder: &[f64], rng: &mut RngStream) -> f64 {
        let dims = self.params.dims();
        let mut v: Vec<u8> = self.base_bias.iter().map(|&b| rng.bernoulli(sigmoid(b))).collect();
        let mut h = vec![0u8; dims.n];
        let mut a = vec![0.0; dims.n];
        let mut vis = vec![0.0; dims.m];
        let b = self.params.visible_bias();
        let b = b.as_slice().unwrap();
        let mut log_w = 0.0;
        for k in 1..ladder.len() {
            let (prev, cur) = (ladder[k - 1], ladder[k]);
            self.hidden_input(&v, &mut a);
            log_w += (cur - prev) * self.bias_gap(&v)
                + a.iter()
                    .map(|&x| softplus(cur * x) - softplus(prev * x))
                    .sum::<f64>();
            if k + 1 == ladder.len() {
                break;
            }
            for (hi, &x) in h.iter_mut().zip(&a) {
                *hi = rng.bernoulli(sigmoid(cur * x));
            }
            vis.fill(0.0);
            for (i, _) in h.iter().enumerate().filter(|(_, &x)| x == 1) {
                for (o, w) in vis.iter_mut().zip(self.params.weight_row(i)) {
                    *o += w;
                }
            }
            for (j, x) in v.iter_mut().enumerate() {
                let input = cur * (vis[j] + b[j]) + (1.0 - cur) * self.base_bias[j];
                *x = rng.bernoulli(sigmoid(input));
            }
        }
        log_w
    }
}

/// AIS estimate of `log Z`. Particle `p` draws from stream
/// `(seed, AIS + p)`, so the result depends only on `(params, cfg, seed)`.
pub fn ais_log_partition(params: &RbmParams, cfg: &AisConfig, seed: u64) -> Result<LogZEstimate> {
    cfg.validate()?;
    let model = AisModel::new(params, cfg.base);
    let ladder = cfg.ladder();
    let log_weights: Vec<f64> = (0..cfg.num_particles)
        .into_par_iter()
        .map(|p| {
            let mut rng = RngStream::new(seed, streams::AIS + p as u64);
            model.run_particle(&ladder, &mut rng)
        })
        .collect();
    if log_weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("AIS log-weights"));
    }
    let log_z_base = model.log_z_base();
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    let ess = (2.0 * log_sum_exp(&log_weights) - log_sum_exp(&doubled)).exp();
    Ok(LogZEstimate {
        log_z: log_mean_exp(&log_weights) + log_z_base,
        log_z_base,
        log_weights,
        ess,
    })
}

/// Mean of `g(θ, v) - log Ẑ` over `testset`, with `log Ẑ` estimated once.
pub fn atll_estimated(
    params: &RbmParams,
    testset: &[BinaryPattern],
    cfg: &AisConfig,
    seed: u64,
) -> Result<f64> {
    Ok(evaluate_ais(params, testset, cfg, seed)?.0)
}

/// Like [`atll_estimated`] but also returns the `log Z` estimate.
pub fn evaluate_ais(
    params: &RbmParams,
    testset: &[BinaryPattern],
    cfg: &AisConfig,
    seed: u64,
) -> Result<(f64, LogZEstimate)> {
    if testset.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let est = ais_log_partition(params, cfg, seed)?;
    let mut total = 0.0;
    for v in testset {
        total += params.g_value(v)?;
    }
    Ok((total / testset.len() as f64 - est.log_z, est))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtllKind {
    Exact,
    Ais,
}

impl AtllKind {
    pub fn name(self) -> &'static str {
        match self {
            AtllKind::Exact => "exact",
            AtllKind::Ais => "ais",
        }
    }
}

/// How ATLL is measured during training and by the `evaluate` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    #[serde(default = "default_cap")]
    pub enumeration_cap: usize,
    #[serde(default)]
    pub ais: AisConfig,
    /// `None` picks exact when `min(m, n)` is within the cap.
    #[serde(default)]
    pub force: Option<AtllKind>,
}

fn default_cap() -> usize {
    DEFAULT_ENUMERATION_CAP
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            ais: AisConfig::default(),
            force: None,
        }
    }
}

/// Result of one ATLL evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub mode: AtllKind,
    pub atll: f64,
    pub log_z: f64,
    pub ess: Option<f64>,
    pub num_test: usize,
    pub ais: Option<AisConfig>,
    pub seed: Option<u64>,
}

impl EvalSettings {
    pub fn kind_for(&self, params: &RbmParams) -> AtllKind {
        self.force.unwrap_or_else(|| {
            let d = params.dims();
            if d.m.min(d.n) <= self.enumeration_cap {
                AtllKind::Exact
            } else {
                AtllKind::Ais
            }
        })
    }

    pub fn evaluate(
        &self,
        params: &RbmParams,
        testset: &[BinaryPattern],
        seed: u64,
    ) -> Result<EvaluationRecord> {
        match self.kind_for(params) {
            AtllKind::Exact => {
                let log_z = params.exact_log_partition_capped(self.enumeration_cap)?;
                let atll = params.atll_exact_capped(testset, self.enumeration_cap)?;
                Ok(EvaluationRecord {
                    mode: AtllKind::Exact,
                    atll,
                    log_z,
                    ess: None,
                    num_test: testset.len(),
                    ais: None,
                    seed: None,
                })
            }
            AtllKind::Ais => {
                let (atll, est) = evaluate_ais(params, testset, &self.ais, seed)?;
                Ok(EvaluationRecord {
                    mode: AtllKind::Ais,
                    atll,
                    log_z: est.log_z,
                    ess: Some(est.ess),
                    num_test: testset.len(),
                    ais: Some(self.ais),
                    seed: Some(seed),
                })
            }
        }
    }
}
