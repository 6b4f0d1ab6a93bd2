//! Experiment configuration: one JSON document, strict about unknown keys.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::BudgetPolicy;
use crate::dynamics::EpidemicParams;
use crate::metrics::UtilityParams;
use crate::netgen::NetGenConfig;
use crate::ode::{OdeParams, TestRate};
use crate::testing::{quota, TestSpec, TestingPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Contact-network section.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub n: usize,
    pub mu: usize,
    pub k_exp: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection { n: 1000, mu: 20, k_exp: 1.0 }
    }
}

/// Budget section: the operating split plus the sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSection {
    /// Total daily budget in units of test-1 cost per capita.
    pub b: f64,
    /// Cost ratio: test 2 is `m` times cheaper.
    pub m: f64,
    /// Operating point for single runs.
    pub lambda1: f64,
    /// Grid of test-1 fractions swept by the sweep commands.
    pub lambda1_grid: Vec<f64>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection {
            b: 0.1,
            m: 1.0,
            lambda1: 0.067,
            lambda1_grid: (0..=10).map(|k| k as f64 * 0.01).collect(),
        }
    }
}

/// Gate thresholds on the true infectious count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Testing starts when the infectious total reaches this (1% of N).
    pub i_t1: usize,
    /// Testing stops when the infectious total falls to this (0.5% of N).
    pub i_t2: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { i_t1: 10, i_t2: 5 }
    }
}

/// Parameters of the deterministic compartmental run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSection {
    /// Infection rate factor (1/day).
    pub beta: f64,
    /// Recovery/de-quarantine rate factor (1/day).
    pub gamma: f64,
    /// Integrator step (days).
    pub dt: f64,
    /// Integration horizon (days).
    pub t_end: f64,
    /// Initially infectious population fraction.
    pub infectious0: f64,
    /// Keep every `stride`-th point in the exported CSV.
    pub stride: usize,
}

impl Default for OdeSection {
    fn default() -> Self {
        OdeSection { beta: 0.4, gamma: 0.1, dt: 0.01, t_end: 100.0, infectious0: 0.011, stride: 100 }
    }
}

/// The whole experiment: network, epidemic, tests, budget, gate,
/// utility, horizons and replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub epidemic: EpidemicParams,
    pub tests: [TestSpec; 2],
    pub budget: BudgetSection,
    pub thresholds: Thresholds,
    pub utility: UtilityParams<f64>,
    pub ode: OdeSection,
    /// Simulated days per run.
    pub horizon: u32,
    /// Stochastic time resolution; the daily update fixes this at 1.
    pub step_days: f64,
    /// Stochastic runs averaged per data point.
    pub replicates: usize,
    /// Seed all replicate streams derive from.
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            network: NetworkSection::default(),
            epidemic: EpidemicParams::default(),
            tests: [TestSpec::rtpcr(), TestSpec::rapid()],
            budget: BudgetSection::default(),
            thresholds: Thresholds::default(),
            utility: UtilityParams::default(),
            ode: OdeSection::default(),
            horizon: 100,
            step_days: 1.0,
            replicates: 21,
            master_seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        self.net_config(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.epidemic.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.epidemic.i0 > self.network.n {
            return invalid(format!(
                "i0 = {} exceeds population {}",
                self.epidemic.i0, self.network.n
            ));
        }
        for spec in &self.tests {
            spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        BudgetPolicy::new(self.budget.b, self.budget.m, self.budget.lambda1)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.budget.lambda1_grid.is_empty() {
            return invalid("lambda1_grid must not be empty".into());
        }
        for &l1 in &self.budget.lambda1_grid {
            if !(0.0..=self.budget.b).contains(&l1) {
                return invalid(format!("grid point {l1} outside [0, {}]", self.budget.b));
            }
            let policy = BudgetPolicy::new(self.budget.b, self.budget.m, l1)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let (_, l2) = crate::budget::allocate(&policy)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let demand = quota(l1, self.network.n) + quota(l2, self.network.n);
            if demand > self.network.n {
                return invalid(format!(
                    "grid point {l1}: daily quotas ({demand}) exceed the population"
                ));
            }
        }
        if self.thresholds.i_t1 <= self.thresholds.i_t2 {
            return invalid(format!(
                "start threshold {} must exceed stop threshold {}",
                self.thresholds.i_t1, self.thresholds.i_t2
            ));
        }
        self.utility.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.horizon < 1 {
            return invalid("horizon must be at least one day".into());
        }
        if self.step_days != 1.0 {
            return invalid("the stochastic update is daily; step_days is fixed at 1".into());
        }
        if self.replicates < 1 {
            return invalid("replicates must be at least 1".into());
        }
        if !(self.ode.dt.is_finite() && self.ode.dt > 0.0) {
            return invalid(format!("ode.dt = {} must be positive", self.ode.dt));
        }
        if !(self.ode.t_end.is_finite() && self.ode.t_end >= 0.0) {
            return invalid(format!("ode.t_end = {} must be non-negative", self.ode.t_end));
        }
        if !(0.0..=1.0).contains(&self.ode.infectious0) {
            return invalid(format!("ode.infectious0 = {}", self.ode.infectious0));
        }
        if self.ode.stride < 1 {
            return invalid("ode.stride must be at least 1".into());
        }
        Ok(())
    }

    /// Network generator settings for one replicate.
    pub fn net_config(&self, seed: u64) -> NetGenConfig {
        NetGenConfig {
            n: self.network.n,
            mu: self.network.mu,
            k_exp: self.network.k_exp,
            seed,
        }
    }

    /// Testing protocol at a given budget split.
    pub fn testing_policy(&self, lambda1: f64) -> Result<TestingPolicy, ConfigError> {
        let policy = BudgetPolicy::new(self.budget.b, self.budget.m, lambda1)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (l1, l2) =
            crate::budget::allocate(&policy).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        TestingPolicy::new(
            [self.tests[0].clone(), self.tests[1].clone()],
            [quota(l1, self.network.n), quota(l2, self.network.n)],
            self.thresholds.i_t1,
            self.thresholds.i_t2,
            self.epidemic.q_d,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Deterministic-model parameters at a given budget split.
    pub fn ode_params(&self, lambda1: f64) -> Result<OdeParams<f64>, ConfigError> {
        let policy = BudgetPolicy::new(self.budget.b, self.budget.m, lambda1)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let (l1, l2) =
            crate::budget::allocate(&policy).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        OdeParams::new(
            self.ode.beta,
            self.ode.gamma,
            vec![
                TestRate { lambda: l1, eta_tp: self.tests[0].eta_tp, eta_fp: self.tests[0].eta_fp() },
                TestRate { lambda: l2, eta_tp: self.tests[1].eta_tp, eta_fp: self.tests[1].eta_fp() },
            ],
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_json_pretty();
        let parsed = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::from_json_str(
            r#"{ "network": { "mu": 10 }, "replicates": 5 }"#,
        )
        .unwrap();
        assert_eq!(cfg.network.mu, 10);
        assert_eq!(cfg.network.n, 1000);
        assert_eq!(cfg.replicates, 5);
        assert_eq!(cfg.horizon, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json_str(r#"{ "horizonn": 50 }"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{ "network": { "nodes": 10 } }"#).is_err());
        assert!(ExperimentConfig::from_json_str(r#"{ "epidemic": { "beta": 0.1 } }"#).is_err());
    }

    #[test]
    fn invalid_sections_are_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.step_days = 0.5;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.thresholds = Thresholds { i_t1: 5, i_t2: 5 };
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.budget.lambda1_grid = vec![0.2];
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::default();
        cfg.budget.m = 15.0;
        // 15 * 0.1 * 1000 = 1500 rapid tests do not fit in 1000 nodes.
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn policy_quotas_match_reference_split() {
        let cfg = ExperimentConfig::default();
        let policy = cfg.testing_policy(0.067).unwrap();
        assert_eq!(policy.counts, [67, 33]);
        assert_eq!(policy.start_threshold, 10);
        assert_eq!(policy.stop_threshold, 5);
    }

    #[test]
    fn ode_params_inherit_test_characteristics() {
        let cfg = ExperimentConfig::default();
        let params = cfg.ode_params(0.067).unwrap();
        assert_eq!(params.tests.len(), 2);
        assert_eq!(params.tests[0].eta_tp, 0.98);
        assert!((params.tests[0].eta_fp - 0.01).abs() < 1e-12);
        assert!((params.tests[1].lambda - 0.033).abs() < 1e-12);
    }
}
