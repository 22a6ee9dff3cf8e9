//! Experiment configuration: a JSON document fixing everything except the
//! seed, so that `(config, seed)` determines a run byte-for-byte.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Gaussian noise over the one-norm ball intersected with the
    /// two-norm/sup-norm ellitope.
    L1Ellitope,
    /// Mixture-sub-Gaussian regression of a probability vector.
    Mixture,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::L1Ellitope => "l1-ellitope",
            ExperimentKind::Mixture => "mixture",
        }
    }
}

fn default_rho1() -> f64 {
    10.0
}
fn default_rho2() -> f64 {
    8.5
}
fn default_rho_inf() -> f64 {
    7.0
}
fn default_sigma() -> f64 {
    0.01
}
fn default_n_obs() -> usize {
    10_000
}
fn default_epsilon() -> f64 {
    0.01
}
fn default_trials() -> usize {
    100
}
fn default_cond_a() -> f64 {
    1e3
}
fn default_cond_b() -> f64 {
    8.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Signal dimension; the observation dimension equals it in both setups.
    pub n: usize,
    /// Rows of the target map for the first experiment (defaults to 2n - 2);
    /// the second experiment always uses the identity.
    #[serde(default)]
    pub nu: Option<usize>,
    #[serde(default = "default_rho1")]
    pub rho1: f64,
    #[serde(default = "default_rho2")]
    pub rho2: f64,
    #[serde(default = "default_rho_inf")]
    pub rho_inf: f64,
    /// Gaussian noise level (first experiment).
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Number of averaged draws per observation (second experiment).
    #[serde(default = "default_n_obs")]
    pub n_obs: usize,
    /// Target risk level; the per-column confidence is epsilon divided by the
    /// contrast budget, re-tightened once after pruning.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_cond_a")]
    pub cond_a: f64,
    #[serde(default = "default_cond_b")]
    pub cond_b: f64,
    /// Loss exponent; defaults to 2 for the first experiment and 1 for the
    /// second.
    #[serde(default)]
    pub theta: Option<f64>,
}

impl ExperimentConfig {
    pub fn experiment_one(n: usize) -> Self {
        Self {
            kind: ExperimentKind::L1Ellitope,
            n,
            nu: None,
            rho1: default_rho1(),
            rho2: default_rho2(),
            rho_inf: default_rho_inf(),
            sigma: default_sigma(),
            n_obs: default_n_obs(),
            epsilon: default_epsilon(),
            trials: default_trials(),
            cond_a: default_cond_a(),
            cond_b: default_cond_b(),
            theta: None,
        }
    }

    pub fn experiment_two(n: usize) -> Self {
        Self {
            kind: ExperimentKind::Mixture,
            n,
            nu: None,
            rho1: 1.0,
            rho2: 1.0,
            rho_inf: 0.5,
            sigma: default_sigma(),
            n_obs: default_n_obs(),
            epsilon: default_epsilon(),
            trials: default_trials(),
            cond_a: default_cond_a(),
            cond_b: default_cond_b(),
            theta: None,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(match self.kind {
            ExperimentKind::L1Ellitope => 2.0,
            ExperimentKind::Mixture => 1.0,
        })
    }

    pub fn nu(&self) -> usize {
        match self.kind {
            ExperimentKind::L1Ellitope => self.nu.unwrap_or((2 * self.n).saturating_sub(2).max(1)),
            ExperimentKind::Mixture => self.n,
        }
    }

    /// Stable hex digest of `(config, seed)` used for deterministic output
    /// file names.
    pub fn run_hash(&self, seed: u64) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).expect("config serializes").as_bytes());
        hasher.update(seed.to_le_bytes());
        let digest = hasher.finalize();
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}
