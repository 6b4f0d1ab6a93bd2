//! Deterministic six-compartment quarantine model.
//!
//! Compartments are population fractions (they sum to one): susceptible,
//! infectious and recovered, plus their quarantined counterparts. Random
//! testing moves people into quarantine at effective true/false-positive
//! rates aggregated over the configured test mix; recovery and
//! de-quarantining share the rate `gamma`.
//!
//! The flows, with `ltp`/`lfp` the effective daily true/false-positive
//! rates:
//!
//! ```text
//! dS   = -beta*S*I - lfp*S + gamma*Q_S
//! dI   =  beta*S*I - ltp*I - gamma*I
//! dR   =  gamma*(I + Q_I + Q_R) - lfp*R
//! dQ_S =  lfp*S - gamma*Q_S
//! dQ_I =  ltp*I - gamma*Q_I
//! dQ_R =  lfp*R - gamma*Q_R
//! ```
//!
//! Every flow appears once with each sign, so the six rates cancel to zero
//! and the total population is conserved.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Compartment totals must stay within this distance of 1 (`f64` lane;
/// each scalar type carries its own tolerance, see [`Scalar`]).
pub const CONSERVATION_TOL: f64 = <f64 as Scalar>::CONSERVATION_TOL;
/// Roundoff more negative than this aborts integration instead of being
/// clamped away (`f64` lane).
pub const NEGATIVE_TOL: f64 = <f64 as Scalar>::NEGATIVE_TOL;

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("invalid compartment state: {0}")]
    InvalidState(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("step size must be positive and finite, got {dt}")]
    InvalidStep { dt: f64 },
    #[error("horizon must be non-negative and finite, got {t_end}")]
    InvalidHorizon { t_end: f64 },
    #[error("compartment {component} fell to {value:.3e} at t = {t:.4}")]
    NegativeCompartment {
        component: &'static str,
        value: f64,
        t: f64,
    },
    #[error("population total drifted to {total:.12} at t = {t:.4}")]
    ConservationLoss { total: f64, t: f64 },
}

/// Population fractions of the six classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState<T> {
    pub s: T,
    pub i: T,
    pub r: T,
    pub q_s: T,
    pub q_i: T,
    pub q_r: T,
}

impl<T: Scalar> CompartmentState<T> {
    /// Validated constructor: every field non-negative, total within
    /// [`CONSERVATION_TOL`] of one.
    pub fn new(s: T, i: T, r: T, q_s: T, q_i: T, q_r: T) -> Result<Self, OdeError> {
        let state = Self { s, i, r, q_s, q_i, q_r };
        state.validate()?;
        Ok(state)
    }

    /// All susceptible except for an infectious fraction.
    pub fn seeded(infectious_fraction: T) -> Result<Self, OdeError> {
        Self::new(
            T::one() - infectious_fraction,
            infectious_fraction,
            T::zero(),
            T::zero(),
            T::zero(),
            T::zero(),
        )
    }

    pub fn as_array(&self) -> [T; 6] {
        [self.s, self.i, self.r, self.q_s, self.q_i, self.q_r]
    }

    pub fn total(&self) -> T {
        self.as_array().into_iter().sum()
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        for (name, v) in self.named() {
            if !v.is_finite() {
                return Err(OdeError::InvalidState(format!("{name} is not finite")));
            }
            if v < T::zero() {
                return Err(OdeError::InvalidState(format!("{name} = {v} is negative")));
            }
        }
        let total = self.total();
        if (total - T::one()).abs() > T::CONSERVATION_TOL {
            return Err(OdeError::InvalidState(format!(
                "compartments sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, T); 6] {
        [
            ("s", self.s),
            ("i", self.i),
            ("r", self.r),
            ("q_s", self.q_s),
            ("q_i", self.q_i),
            ("q_r", self.q_r),
        ]
    }

    fn axpy(&self, h: T, rate: &Self) -> Self {
        Self {
            s: self.s + h * rate.s,
            i: self.i + h * rate.i,
            r: self.r + h * rate.r,
            q_s: self.q_s + h * rate.q_s,
            q_i: self.q_i + h * rate.q_i,
            q_r: self.q_r + h * rate.q_r,
        }
    }
}

/// One test's contribution to the population-level quarantining rates:
/// the fraction of the population it covers per day and its per-test
/// true/false-positive probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRate<T> {
    pub lambda: T,
    pub eta_tp: T,
    pub eta_fp: T,
}

/// Rate constants of the compartmental model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeParams<T> {
    /// Infection rate factor (1/day).
    pub beta: T,
    /// Recovery and de-quarantine rate factor (1/day).
    pub gamma: T,
    /// Any number of simultaneously deployed tests.
    pub tests: Vec<TestRate<T>>,
}

impl<T: Scalar> OdeParams<T> {
    pub fn new(beta: T, gamma: T, tests: Vec<TestRate<T>>) -> Result<Self, OdeError> {
        let params = Self { beta, gamma, tests };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.beta.is_finite() && self.beta >= T::zero()) {
            return Err(OdeError::InvalidParams(format!("beta = {}", self.beta)));
        }
        if !(self.gamma.is_finite() && self.gamma >= T::zero()) {
            return Err(OdeError::InvalidParams(format!("gamma = {}", self.gamma)));
        }
        let unit = T::zero()..=T::one();
        let mut lambda_total = T::zero();
        for (k, t) in self.tests.iter().enumerate() {
            for (name, v) in [
                ("lambda", t.lambda),
                ("eta_tp", t.eta_tp),
                ("eta_fp", t.eta_fp),
            ] {
                if !v.is_finite() || !unit.contains(&v) {
                    return Err(OdeError::InvalidParams(format!(
                        "test {k}: {name} = {v} outside [0, 1]"
                    )));
                }
            }
            lambda_total = lambda_total + t.lambda;
        }
        if lambda_total > T::one() + T::epsilon() {
            return Err(OdeError::InvalidParams(format!(
                "test fractions sum to {lambda_total} > 1"
            )));
        }
        Ok(())
    }
}

/// Population-level daily quarantining rates of the whole test mix:
/// `(sum lambda_k * eta_tp_k, sum lambda_k * eta_fp_k)`.
pub fn effective_rates<T: Scalar>(params: &OdeParams<T>) -> (T, T) {
    let tp = params.tests.iter().map(|t| t.lambda * t.eta_tp).sum();
    let fp = params.tests.iter().map(|t| t.lambda * t.eta_fp).sum();
    (tp, fp)
}

/// Instantaneous per-day rates of change of the six compartments.
///
/// The six components cancel pairwise, so their sum is zero up to
/// floating-point rounding.
pub fn derivatives<T: Scalar>(
    state: &CompartmentState<T>,
    params: &OdeParams<T>,
) -> CompartmentState<T> {
    let (ltp, lfp) = effective_rates(params);
    let infect = params.beta * state.s * state.i;
    let fp_s = lfp * state.s;
    let fp_r = lfp * state.r;
    let tp_i = ltp * state.i;
    let rec_i = params.gamma * state.i;
    let deq_s = params.gamma * state.q_s;
    let deq_i = params.gamma * state.q_i;
    let deq_r = params.gamma * state.q_r;
    CompartmentState {
        s: deq_s - infect - fp_s,
        i: infect - tp_i - rec_i,
        r: rec_i + deq_i + deq_r - fp_r,
        q_s: fp_s - deq_s,
        q_i: tp_i - deq_i,
        q_r: fp_r - deq_r,
    }
}

/// Fixed-step classical Runge-Kutta trajectory over `[0, t_end]`.
///
/// Emits the initial state plus one entry per step. Each emitted state is
/// checked for conservation (within [`CONSERVATION_TOL`]) and
/// non-negativity (within [`NEGATIVE_TOL`], tiny negatives clamped to
/// zero after the check).
pub fn integrate<T: Scalar>(
    state0: &CompartmentState<T>,
    params: &OdeParams<T>,
    t_end: T,
    dt: T,
) -> Result<Vec<(T, CompartmentState<T>)>, OdeError> {
    state0.validate()?;
    params.validate()?;
    if !dt.is_finite() || dt <= T::zero() {
        return Err(OdeError::InvalidStep {
            dt: dt.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !t_end.is_finite() || t_end < T::zero() {
        return Err(OdeError::InvalidHorizon {
            t_end: t_end.to_f64().unwrap_or(f64::NAN),
        });
    }

    let steps = (t_end / dt).round().to_usize().unwrap_or(0);
    let mut trajectory = Vec::with_capacity(steps + 1);
    trajectory.push((T::zero(), *state0));
    let mut state = *state0;
    let half = T::from_f64(0.5).unwrap();
    let sixth = T::from_f64(1.0 / 6.0).unwrap();
    let two = T::from_f64(2.0).unwrap();

    for step in 1..=steps {
        let k1 = derivatives(&state, params);
        let k2 = derivatives(&state.axpy(half * dt, &k1), params);
        let k3 = derivatives(&state.axpy(half * dt, &k2), params);
        let k4 = derivatives(&state.axpy(dt, &k3), params);
        let incr = CompartmentState {
            s: k1.s + two * k2.s + two * k3.s + k4.s,
            i: k1.i + two * k2.i + two * k3.i + k4.i,
            r: k1.r + two * k2.r + two * k3.r + k4.r,
            q_s: k1.q_s + two * k2.q_s + two * k3.q_s + k4.q_s,
            q_i: k1.q_i + two * k2.q_i + two * k3.q_i + k4.q_i,
            q_r: k1.q_r + two * k2.q_r + two * k3.q_r + k4.q_r,
        };
        state = state.axpy(sixth * dt, &incr);
        let t = dt * T::from_count(step);
        state = checked(state, t)?;
        trajectory.push((t, state));
    }
    Ok(trajectory)
}

/// Conservation and non-negativity gate applied to every emitted state.
fn checked<T: Scalar>(mut state: CompartmentState<T>, t: T) -> Result<CompartmentState<T>, OdeError> {
    let total = state.total();
    let tf = t.to_f64().unwrap_or(f64::NAN);
    if !total.is_finite() || (total - T::one()).abs() > T::CONSERVATION_TOL {
        return Err(OdeError::ConservationLoss {
            total: total.to_f64().unwrap_or(f64::NAN),
            t: tf,
        });
    }
    for (name, v) in state.named() {
        if v < T::NEGATIVE_TOL {
            return Err(OdeError::NegativeCompartment {
                component: name,
                value: v.to_f64().unwrap_or(f64::NAN),
                t: tf,
            });
        }
    }
    // Clamp roundoff-level negatives now that they are known to be tiny.
    let z = T::zero();
    state.s = state.s.max(z);
    state.i = state.i.max(z);
    state.r = state.r.max(z);
    state.q_s = state.q_s.max(z);
    state.q_i = state.q_i.max(z);
    state.q_r = state.q_r.max(z);
    Ok(state)
}

/// Writes a trajectory as CSV (`t,S,I,R,QS,QI,QR`), keeping every
/// `stride`-th point plus the final one.
pub fn write_trajectory_csv<T: Scalar, W: Write>(
    out: &mut W,
    trajectory: &[(T, CompartmentState<T>)],
    stride: usize,
) -> io::Result<()> {
    let stride = stride.max(1);
    writeln!(out, "t,S,I,R,QS,QI,QR")?;
    let last = trajectory.len().saturating_sub(1);
    for (idx, (t, state)) in trajectory.iter().enumerate() {
        if idx % stride != 0 && idx != last {
            continue;
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            t, state.s, state.i, state.r, state.q_s, state.q_i, state.q_r
        )?;
    }
    Ok(())
}
