//! Stochastic epidemic-and-testing simulator.
//!
//! The model tracks six population classes — susceptible, infectious and
//! recovered, each with a quarantined counterpart — under a daily randomized
//! dual-test protocol constrained by a fixed testing budget. Two layers are
//! provided:
//!
//! * a deterministic compartmental ODE ([`ode`]) with effective test rates
//!   and a fixed-step RK4 integrator, and
//! * a discrete-time stochastic simulation on scale-free contact networks
//!   ([`netgen`], [`dynamics`], [`testing`]) with budget allocation
//!   ([`budget`]), outcome metrics ([`metrics`]) and an experiment harness
//!   ([`harness`]) that reproduces the parameter sweeps.
//!
//! The numeric kernels (ODE, budget algebra, utility/percentile math) are
//! generic over the scalar type via [`scalar::Scalar`]; the stochastic
//! network simulation is `f64` throughout. Concrete `f64` aliases live at
//! the crate root.

pub mod budget;
pub mod config;
pub mod dynamics;
pub mod harness;
pub mod metrics;
pub mod netgen;
pub mod ode;
pub mod plot;
pub mod rng;
pub mod scalar;
pub mod testing;

/// Default scalar type for concrete simulations.
pub type Real = f64;

/// Six-compartment state in the default scalar type.
pub type Compartments = ode::CompartmentState<Real>;
/// ODE parameter set in the default scalar type.
pub type OdeParameters = ode::OdeParams<Real>;
/// Budget split policy in the default scalar type.
pub type Budget = budget::BudgetPolicy<Real>;
/// Utility exponents in the default scalar type.
pub type Utility = metrics::UtilityParams<Real>;

pub use config::ExperimentConfig;
pub use harness::{run_once, sweep_delay, sweep_lambda1, sweep_mu};
pub use metrics::RunOutcome;
pub use netgen::{ContactGraph, NetGenConfig};
