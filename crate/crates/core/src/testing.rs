//! Daily randomized dual-test protocol.
//!
//! While the gate is open, two disjoint uniform random samples of the
//! unquarantined population receive test 1 and test 2. Results are
//! Bernoulli draws conditioned on the node's true stage; positives
//! schedule a fixed-duration quarantine after the test's reporting delay.
//! The gate watches the true infectious total with hysteresis: testing
//! starts at the upper threshold and stops at the lower one.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Stage, World};

#[derive(Debug, Error)]
pub enum TestingError {
    #[error("invalid test spec '{label}': {msg}")]
    InvalidSpec { label: String, msg: String },
    #[error("invalid testing policy: {0}")]
    InvalidPolicy(String),
}

/// One diagnostic test.
///
/// Only the true-positive and true-negative probabilities are stored;
/// the false rates are their complements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub label: String,
    /// Sensitivity: P(positive | infectious).
    pub eta_tp: f64,
    /// Specificity: P(negative | uninfected).
    pub eta_tn: f64,
    /// Days between sampling and the result (and hence quarantine start).
    pub delay_days: u32,
}

impl TestSpec {
    pub fn new(label: &str, eta_tp: f64, eta_tn: f64, delay_days: u32) -> Result<Self, TestingError> {
        let spec = TestSpec { label: label.to_string(), eta_tp, eta_tn, delay_days };
        spec.validate()?;
        Ok(spec)
    }

    /// Accurate, slow, expensive reference test.
    pub fn rtpcr() -> Self {
        TestSpec { label: "rtpcr".into(), eta_tp: 0.98, eta_tn: 0.99, delay_days: 1 }
    }

    /// Cheap instant test with reduced accuracy.
    pub fn rapid() -> Self {
        TestSpec { label: "rapid".into(), eta_tp: 0.80, eta_tn: 0.90, delay_days: 0 }
    }

    /// Rapid test variant with sensitivity degraded to a coin flip.
    pub fn degraded_rapid() -> Self {
        TestSpec { label: "rapid-degraded".into(), eta_tp: 0.50, eta_tn: 0.90, delay_days: 0 }
    }

    pub fn eta_fp(&self) -> f64 {
        1.0 - self.eta_tn
    }

    pub fn eta_fn(&self) -> f64 {
        1.0 - self.eta_tp
    }

    pub fn validate(&self) -> Result<(), TestingError> {
        for (name, v) in [("eta_tp", self.eta_tp), ("eta_tn", self.eta_tn)] {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(TestingError::InvalidSpec {
                    label: self.label.clone(),
                    msg: format!("{name} = {v} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// Whole-node daily quota for a tested population fraction, rounded
/// half-to-even.
pub fn quota(lambda: f64, n: usize) -> usize {
    (lambda * n as f64).round_ties_even().max(0.0) as usize
}

/// The operating testing protocol: two test types with daily quotas and
/// the gate thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestingPolicy {
    pub specs: [TestSpec; 2],
    /// Daily node quotas for the two tests.
    pub counts: [usize; 2],
    /// Gate opens when the true infectious total reaches this.
    pub start_threshold: usize,
    /// Gate closes when the true infectious total falls to this.
    pub stop_threshold: usize,
    /// Quarantine duration handed to positives.
    pub q_d: u32,
}

impl TestingPolicy {
    pub fn new(
        specs: [TestSpec; 2],
        counts: [usize; 2],
        start_threshold: usize,
        stop_threshold: usize,
        q_d: u32,
    ) -> Result<Self, TestingError> {
        let policy = TestingPolicy { specs, counts, start_threshold, stop_threshold, q_d };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), TestingError> {
        self.specs[0].validate()?;
        self.specs[1].validate()?;
        if self.start_threshold <= self.stop_threshold {
            return Err(TestingError::InvalidPolicy(format!(
                "start threshold {} must exceed stop threshold {}",
                self.start_threshold, self.stop_threshold
            )));
        }
        if self.q_d < 1 {
            return Err(TestingError::InvalidPolicy("q_d must be at least 1".into()));
        }
        Ok(())
    }

    pub fn disabled(&self) -> bool {
        self.counts[0] == 0 && self.counts[1] == 0
    }
}

/// Hysteresis gate: opens at `start_threshold`, closes at
/// `stop_threshold`, holds its state in between.
pub fn gate(total_infectious: usize, active: bool, policy: &TestingPolicy) -> bool {
    if active {
        total_infectious > policy.stop_threshold
    } else {
        total_infectious >= policy.start_threshold
    }
}

/// Draws the two disjoint daily samples from the unquarantined nodes.
///
/// When fewer unquarantined nodes remain than the combined quota, test 1
/// is filled first and test 2 takes what is left.
pub fn select_testees(
    world: &World,
    policy: &TestingPolicy,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let pool = world.unquarantined_nodes();
    let c1 = policy.counts[0].min(pool.len());
    let c2 = policy.counts[1].min(pool.len() - c1);
    if c1 + c2 == 0 {
        return (Vec::new(), Vec::new());
    }
    let picks = rand::seq::index::sample(rng, pool.len(), c1 + c2);
    let mut set1 = Vec::with_capacity(c1);
    let mut set2 = Vec::with_capacity(c2);
    for (k, idx) in picks.into_iter().enumerate() {
        if k < c1 {
            set1.push(pool[idx]);
        } else {
            set2.push(pool[idx]);
        }
    }
    (set1, set2)
}

/// One stochastic test administration: positive with probability
/// `eta_tp` for an infectious node, `1 - eta_tn` for an uninfected one.
pub fn apply_test(truth: Stage, spec: &TestSpec, rng: &mut ChaCha8Rng) -> bool {
    let p = match truth {
        Stage::Infectious => spec.eta_tp,
        Stage::Susceptible | Stage::Recovered => spec.eta_fp(),
    };
    rng.gen::<f64>() < p
}

/// Books the consequence of a result: positives start quarantine after
/// the test's delay, negatives change nothing.
pub fn schedule(world: &mut World, node: usize, positive: bool, spec: &TestSpec, today: u32) {
    if positive {
        world.schedule_quarantine(node, today + spec.delay_days);
    }
}

/// Outcome tallies of one test type on one day.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tested: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn record(&mut self, truth: Stage, positive: bool) {
        self.tested += 1;
        match (truth == Stage::Infectious, positive) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// `TP / (TP + FN)`; `None` when no infectious node was tested.
    pub fn sensitivity(&self) -> Option<f64> {
        let denom = self.tp + self.fn_;
        (denom > 0).then(|| self.tp as f64 / denom as f64)
    }

    /// `TN / (TN + FP)`; `None` when no uninfected node was tested.
    pub fn specificity(&self) -> Option<f64> {
        let denom = self.tn + self.fp;
        (denom > 0).then(|| self.tn as f64 / denom as f64)
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tested += other.tested;
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// Per-test confusion tallies for one day.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyConfusion {
    pub day: u32,
    pub per_test: [ConfusionCounts; 2],
}

impl DailyConfusion {
    pub fn tested(&self) -> usize {
        self.per_test[0].tested + self.per_test[1].tested
    }
}

/// Builds the day's confusion tallies from aligned results and truths.
pub fn confusion_log(
    day: u32,
    set1: &[(Stage, bool)],
    set2: &[(Stage, bool)],
) -> DailyConfusion {
    let mut daily = DailyConfusion { day, ..Default::default() };
    for &(truth, positive) in set1 {
        daily.per_test[0].record(truth, positive);
    }
    for &(truth, positive) in set2 {
        daily.per_test[1].record(truth, positive);
    }
    daily
}

/// Runs one gated testing day against the world: selection, test draws,
/// quarantine scheduling, and the confusion log.
pub fn run_daily_testing(
    world: &mut World,
    policy: &TestingPolicy,
    rng: &mut ChaCha8Rng,
) -> DailyConfusion {
    let today = world.day();
    let (set1, set2) = select_testees(world, policy, rng);
    let mut daily = DailyConfusion { day: today, ..Default::default() };
    for (which, set) in [(0usize, &set1), (1usize, &set2)] {
        for &node in set {
            let truth = world.node(node).stage;
            let positive = apply_test(truth, &policy.specs[which], rng);
            daily.per_test[which].record(truth, positive);
            schedule(world, node, positive, &policy.specs[which], today);
        }
    }
    daily
}

/// Daily test log (`day,test_label,tested,TP,FP,TN,FN,sensitivity,specificity`),
/// one row per test type per day; undefined ratios stay empty.
pub fn write_test_log_csv<W: Write>(
    out: &mut W,
    log: &[DailyConfusion],
    labels: [&str; 2],
) -> io::Result<()> {
    writeln!(out, "day,test_label,tested,TP,FP,TN,FN,sensitivity,specificity")?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for daily in log {
        for (which, label) in labels.iter().enumerate() {
            let c = &daily.per_test[which];
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                daily.day,
                label,
                c.tested,
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                fmt(c.sensitivity()),
                fmt(c.specificity()),
            )?;
        }
    }
    Ok(())
}
