//! Fixed-budget allocation between two tests of different cost.
//!
//! The daily budget `b` is expressed in units of test-1 cost per capita;
//! test 2 is `m` times cheaper. Spending `lambda1` on test 1 leaves
//! `lambda2 = m * (b - lambda1)` for test 2, so the tested fractions trade
//! off linearly along the budget line `lambda1 + lambda2 / m = b`.
//! Conversion to whole-node daily quotas is the testing module's job; this
//! module stays exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum BudgetError {
    #[error("invalid budget policy: {0}")]
    InvalidPolicy(String),
    #[error("probability {name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("test-2 sensitivity must be positive to compare against test 1")]
    ZeroSensitivity,
}

/// A point on the budget line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetPolicy<T> {
    /// Total daily budget in units of test-1 cost per capita.
    pub b: T,
    /// Cost ratio: test 2 is `m` times cheaper than test 1.
    pub m: T,
    /// Fraction of the population given test 1 per day.
    pub lambda1: T,
}

impl<T: Scalar> BudgetPolicy<T> {
    pub fn new(b: T, m: T, lambda1: T) -> Result<Self, BudgetError> {
        let policy = Self { b, m, lambda1 };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<(), BudgetError> {
        if !self.b.is_finite() || self.b < T::zero() {
            return Err(BudgetError::InvalidPolicy(format!("b = {}", self.b)));
        }
        if !self.m.is_finite() || self.m <= T::zero() {
            return Err(BudgetError::InvalidPolicy(format!("m = {}", self.m)));
        }
        if !self.lambda1.is_finite() || self.lambda1 < T::zero() || self.lambda1 > self.b {
            return Err(BudgetError::InvalidPolicy(format!(
                "lambda1 = {} outside [0, {}]",
                self.lambda1, self.b
            )));
        }
        Ok(())
    }
}

/// Daily tested fractions `(lambda1, lambda2)` for a point on the budget
/// line: the remainder of the budget buys `m` times as many type-2 tests.
pub fn allocate<T: Scalar>(policy: &BudgetPolicy<T>) -> Result<(T, T), BudgetError> {
    policy.validate()?;
    let lambda2 = policy.m * (policy.b - policy.lambda1);
    Ok((policy.lambda1, lambda2))
}

/// Mean daily true-positive quarantining rate of the budgeted mix:
/// `lambda1 * eta1_tp + m * (b - lambda1) * eta2_tp`.
pub fn mean_tp_rate<T: Scalar>(
    policy: &BudgetPolicy<T>,
    eta1_tp: T,
    eta2_tp: T,
) -> Result<T, BudgetError> {
    policy.validate()?;
    check_probability("eta1_tp", eta1_tp)?;
    check_probability("eta2_tp", eta2_tp)?;
    Ok(policy.lambda1 * eta1_tp + policy.m * (policy.b - policy.lambda1) * eta2_tp)
}

/// Whether spending more budget on test 1 strictly increases the mean
/// true-positive rate, i.e. `m < eta1_tp / eta2_tp`.
///
/// At the boundary `m = eta1_tp / eta2_tp` the rate is constant in
/// `lambda1`, so the comparison is strict and the boundary returns false.
pub fn prefer_test1<T: Scalar>(m: T, eta1_tp: T, eta2_tp: T) -> Result<bool, BudgetError> {
    if !m.is_finite() || m <= T::zero() {
        return Err(BudgetError::InvalidPolicy(format!("m = {m}")));
    }
    check_probability("eta1_tp", eta1_tp)?;
    check_probability("eta2_tp", eta2_tp)?;
    if eta2_tp == T::zero() {
        return Err(BudgetError::ZeroSensitivity);
    }
    Ok(m < eta1_tp / eta2_tp)
}

fn check_probability<T: Scalar>(name: &'static str, value: T) -> Result<(), BudgetError> {
    if !value.is_finite() || value < T::zero() || value > T::one() {
        return Err(BudgetError::InvalidProbability {
            name,
            value: value.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}
