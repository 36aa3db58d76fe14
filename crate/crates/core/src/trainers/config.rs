use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Contrastive divergence with `k` Gibbs steps started at the data.
    #[serde(rename = "CD")]
    Cd,
    /// Persistent CD: one chain per batch slot, never reset.
    #[serde(rename = "PCD")]
    Pcd,
    /// Stochastic DCP: `d` inner steps of `k_prime` Gibbs steps each.
    #[serde(rename = "SDCP")]
    Sdcp,
    /// Stochastic DCP with centered gradients.
    #[serde(rename = "CSDCP")]
    Csdcp,
    /// Centered-gradient CD (`CSDCP` with `d = 1`, `k_prime = k`).
    #[serde(rename = "CG")]
    Cg,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cd => "CD",
            Algorithm::Pcd => "PCD",
            Algorithm::Sdcp => "SDCP",
            Algorithm::Csdcp => "CSDCP",
            Algorithm::Cg => "CG",
        }
    }

    pub fn is_centered(self) -> bool {
        matches!(self, Algorithm::Csdcp | Algorithm::Cg)
    }

    pub fn is_dcp(self) -> bool {
        matches!(self, Algorithm::Sdcp | Algorithm::Csdcp)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibleBiasInit {
    Zero,
    /// Logit of the per-unit training mean.
    BaseRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    /// Standard deviation of the Gaussian weight initialization.
    pub weight_sigma: f64,
    pub visible_bias: VisibleBiasInit,
}

impl Default for InitScheme {
    fn default() -> Self {
        Self {
            weight_sigma: 0.01,
            visible_bias: VisibleBiasInit::BaseRate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub eta: f64,
    /// Chain length for CD, PCD and CG.
    #[serde(default = "defaults::k")]
    pub k: usize,
    /// Inner iterations for SDCP and CSDCP.
    #[serde(default = "defaults::d")]
    pub d: usize,
    /// Inner chain length for SDCP and CSDCP.
    #[serde(default = "defaults::k_prime")]
    pub k_prime: usize,
    /// Batches of this size; anything `>= N` trains full batch.
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub epochs: usize,
    #[serde(default = "defaults::nu")]
    pub nu_mu: f64,
    #[serde(default = "defaults::nu")]
    pub nu_lambda: f64,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::eval_interval")]
    pub eval_interval: usize,
}

mod defaults {
    pub fn k() -> usize {
        12
    }
    pub fn d() -> usize {
        3
    }
    pub fn k_prime() -> usize {
        4
    }
    pub fn batch_size() -> usize {
        200
    }
    pub fn nu() -> f64 {
        0.01
    }
    pub fn eval_interval() -> usize {
        100
    }
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, eta: f64) -> Self {
        Self {
            algorithm,
            eta,
            k: defaults::k(),
            d: defaults::d(),
            k_prime: defaults::k_prime(),
            batch_size: defaults::batch_size(),
            epochs: 0,
            nu_mu: defaults::nu(),
            nu_lambda: defaults::nu(),
            init: InitScheme::default(),
            seed: 0,
            eval_interval: defaults::eval_interval(),
        }
    }

    /// Gibbs transitions spent per training sample per update.
    pub fn budget_per_sample(&self) -> usize {
        if self.algorithm.is_dcp() {
            self.d * self.k_prime
        } else {
            self.k
        }
    }

    /// Collects every violated invariant instead of stopping at the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.eta.is_finite() && self.eta > 0.0) {
            out.push(format!("eta must be a positive finite number (got {})", self.eta));
        }
        if self.algorithm.is_dcp() {
            if self.d == 0 {
                out.push("d must be >= 1".into());
            }
            if self.k_prime == 0 {
                out.push("k_prime must be >= 1".into());
            }
        } else if self.k == 0 {
            out.push("k must be >= 1".into());
        }
        if self.batch_size == 0 {
            out.push("batch_size must be >= 1".into());
        }
        for (name, nu) in [("nu_mu", self.nu_mu), ("nu_lambda", self.nu_lambda)] {
            if !(0.0..=1.0).contains(&nu) {
                out.push(format!("{name} must lie in [0, 1] (got {nu})"));
            }
        }
        if !(self.init.weight_sigma.is_finite() && self.init.weight_sigma >= 0.0) {
            out.push(format!(
                "init.weight_sigma must be finite and >= 0 (got {})",
                self.init.weight_sigma
            ));
        }
        if self.eval_interval == 0 {
            out.push("eval_interval must be >= 1".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"algorithm":"SDCP","eta":0.3}"#).unwrap();
        assert_eq!(cfg.d, 3);
        assert_eq!(cfg.k_prime, 4);
        assert_eq!(cfg.nu_mu, 0.01);
        assert_eq!(cfg.init.visible_bias, VisibleBiasInit::BaseRate);
        assert_eq!(cfg.budget_per_sample(), 12);
        cfg.validate().unwrap();
    }

    #[test]
    fn all_problems_are_reported() {
        let mut cfg = TrainConfig::new(Algorithm::Csdcp, -1.0);
        cfg.d = 0;
        cfg.nu_mu = 2.0;
        cfg.batch_size = 0;
        let problems = cfg.problems();
        assert_eq!(problems.len(), 4, "{problems:?}");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<TrainConfig>(r#"{"algorithm":"CD","eta":0.1,"momentum":0.9}"#).is_err());
    }
}
