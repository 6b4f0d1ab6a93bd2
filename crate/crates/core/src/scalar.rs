//! Scalar abstraction for the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the deterministic math is generic over.
///
/// `f32` and `f64` both qualify; the stochastic simulation itself always
/// runs in `f64` because the random streams produce 64-bit uniforms.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    /// How far compartment totals may drift from 1 before integration
    /// aborts; scaled to the type's precision.
    const CONSERVATION_TOL: Self;
    /// Most negative roundoff accepted (and clamped) in a compartment.
    const NEGATIVE_TOL: Self;

    /// Lossless conversion from a small integer count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {
    const CONSERVATION_TOL: Self = 1e-4;
    const NEGATIVE_TOL: Self = -1e-6;
}

impl Scalar for f64 {
    const CONSERVATION_TOL: Self = 1e-9;
    const NEGATIVE_TOL: Self = -1e-12;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_count_roundtrips_small_integers() {
        assert_eq!(f64::from_count(208), 208.0);
        assert_eq!(f32::from_count(1000), 1000.0);
    }
}
