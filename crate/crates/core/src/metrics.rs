//! Outcome metrics of a run and across replicates.
//!
//! A run is judged by its peak infection (maximum daily infectious count,
//! quarantined or not), its total quarantine days (person-days spent in
//! quarantine), and the scalar utility `Ip^theta1 + sumDQ^theta2` that
//! trades the two off; the sweep harness averages these over replicates
//! and reports 80% confidence whiskers as empirical 10th/90th
//! percentiles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DayCounts;
use crate::scalar::Scalar;
use crate::testing::DailyConfusion;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid utility exponents: {0}")]
    InvalidExponents(String),
    #[error("sweep is empty")]
    EmptySweep,
}

/// One day of a run: end-of-day tallies plus the number of tests done.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyRow {
    pub day: u32,
    pub counts: DayCounts,
    pub tested: usize,
}

/// Full record of one stochastic run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub trajectory: Vec<DailyRow>,
    pub confusion: Vec<DailyConfusion>,
    /// Peak infection: max over days of `I + Q_I`.
    pub peak_infection: usize,
    /// Total quarantine days: sum over days of `Q_S + Q_I + Q_R`.
    pub quarantine_days: usize,
    /// Utility of this run under the configured exponents.
    pub utility: f64,
}

/// Exponents of the power-law utility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityParams<T> {
    /// Peak-infection exponent, strictly above 1.
    pub theta1: T,
    /// Quarantine-days exponent in (0, 1].
    pub theta2: T,
}

impl<T: Scalar> Default for UtilityParams<T> {
    fn default() -> Self {
        UtilityParams { theta1: T::from_f64(3.0).unwrap(), theta2: T::one() }
    }
}

impl<T: Scalar> UtilityParams<T> {
    pub fn new(theta1: T, theta2: T) -> Result<Self, MetricsError> {
        let params = UtilityParams { theta1, theta2 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if !self.theta1.is_finite() || self.theta1 <= T::one() {
            return Err(MetricsError::InvalidExponents(format!(
                "theta1 = {} must exceed 1",
                self.theta1
            )));
        }
        if !self.theta2.is_finite() || self.theta2 <= T::zero() || self.theta2 > T::one() {
            return Err(MetricsError::InvalidExponents(format!(
                "theta2 = {} must lie in (0, 1]",
                self.theta2
            )));
        }
        Ok(())
    }
}

/// Maximum daily infectious count (unquarantined + quarantined).
pub fn peak_infection(trajectory: &[DailyRow]) -> Result<usize, MetricsError> {
    trajectory
        .iter()
        .map(|row| row.counts.total_infectious())
        .max()
        .ok_or(MetricsError::EmptyTrajectory)
}

/// Person-days spent quarantined over the whole run.
pub fn total_quarantine_days(trajectory: &[DailyRow]) -> Result<usize, MetricsError> {
    if trajectory.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    Ok(trajectory.iter().map(|row| row.counts.total_quarantined()).sum())
}

/// Power-law utility `Ip^theta1 + sumDQ^theta2`.
pub fn utility<T: Scalar>(
    i_p: usize,
    sum_dq: usize,
    params: &UtilityParams<T>,
) -> Result<T, MetricsError> {
    params.validate()?;
    let ip = T::from_count(i_p);
    let dq = T::from_count(sum_dq);
    Ok(ip.powf(params.theta1) + dq.powf(params.theta2))
}

/// Mean plus empirical 10th/90th percentiles (linear interpolation
/// between order statistics) — the 80% confidence whiskers.
pub fn ci80<T: Scalar>(samples: &[T]) -> Result<(T, T, T), MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples(samples.len()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("comparable samples"));
    let mean = sorted.iter().copied().sum::<T>() / T::from_count(sorted.len());
    Ok((mean, percentile(&sorted, 0.10), percentile(&sorted, 0.90)))
}

/// Interpolated percentile of an ascending-sorted slice.
fn percentile<T: Scalar>(sorted: &[T], p: f64) -> T {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let frac = T::from_f64(pos - lo as f64).unwrap();
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Grid point with the smallest mean utility; ties break toward the
/// smaller `lambda1`.
pub fn argmin_utility(sweep: &[(f64, f64)]) -> Result<f64, MetricsError> {
    if sweep.is_empty() {
        return Err(MetricsError::EmptySweep);
    }
    let mut points = sweep.to_vec();
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite grid"));
    let mut best = points[0];
    for &(lambda1, f) in &points[1..] {
        if f < best.1 {
            best = (lambda1, f);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(day: u32, i: usize, q_i: usize, q_s: usize, q_r: usize) -> DailyRow {
        let counts = DayCounts { s: 0, i, r: 0, q_s, q_i, q_r };
        DailyRow { day, counts, tested: 0 }
    }

    #[test]
    fn peak_infection_is_max_of_total_infectious() {
        let traj = vec![row(0, 3, 0, 0, 0), row(1, 4, 5, 0, 0), row(2, 7, 0, 0, 0)];
        assert_eq!(peak_infection(&traj).unwrap(), 9);
        let zeros = vec![row(0, 0, 0, 0, 0)];
        assert_eq!(peak_infection(&zeros).unwrap(), 0);
        assert!(matches!(peak_infection(&[]), Err(MetricsError::EmptyTrajectory)));
    }

    #[test]
    fn quarantine_days_count_person_days() {
        // 30 nodes quarantined for 10 full days each, non-overlapping.
        let mut traj = Vec::new();
        for day in 0..300 {
            traj.push(row(day, 0, 0, 1, 0));
        }
        assert_eq!(total_quarantine_days(&traj).unwrap(), 300);
        let empty_q = vec![row(0, 5, 0, 0, 0)];
        assert_eq!(total_quarantine_days(&empty_q).unwrap(), 0);
        assert!(total_quarantine_days(&[]).is_err());
    }

    #[test]
    fn utility_matches_exact_integer_oracle() {
        let up = UtilityParams::<f64>::default();
        // Exact arithmetic oracle: 208^3 + 4200 in integers.
        let oracle: u128 = 208u128.pow(3) + 4200;
        assert_eq!(oracle, 9_003_112);
        let f = utility(208, 4200, &up).unwrap();
        assert!((f - oracle as f64).abs() < 1e-6, "f = {f}");

        assert_eq!(utility(0, 0, &up).unwrap(), 0.0);
        let f = utility(10, 300, &up).unwrap();
        assert!((f - 1300.0).abs() < 1e-9);
    }

    #[test]
    fn utility_rejects_bad_exponents() {
        assert!(UtilityParams::new(1.0, 1.0).is_err());
        assert!(UtilityParams::new(3.0, 0.0).is_err());
        assert!(UtilityParams::new(3.0, 1.5).is_err());
        assert!(UtilityParams::new(3.0, 0.5).is_ok());
    }

    #[test]
    fn utility_marginal_rate_follows_cubic_slope() {
        // With theta1 = 3, theta2 = 1 the trade-off slope is 3 * Ip^2:
        // central differences on the integer grid give 3 Ip^2 + 1.
        let up = UtilityParams::<f64>::default();
        for ip in [5usize, 10, 20, 50] {
            let hi = utility(ip + 1, 300, &up).unwrap();
            let lo = utility(ip - 1, 300, &up).unwrap();
            let d_dq = utility(ip, 301, &up).unwrap() - utility(ip, 300, &up).unwrap();
            let ratio = (hi - lo) / 2.0 / d_dq;
            let expected = 3.0 * (ip * ip) as f64;
            assert!((ratio - expected).abs() <= 1.0 + 1e-9, "ip {ip}: ratio {ratio}");
        }
    }

    #[test]
    fn ci80_reference_cases() {
        let same = vec![7.5; 21];
        assert_eq!(ci80(&same).unwrap(), (7.5, 7.5, 7.5));

        let run: Vec<f64> = (1..=21).map(f64::from).collect();
        let (mean, lo, hi) = ci80(&run).unwrap();
        assert_eq!((mean, lo, hi), (11.0, 3.0, 19.0));

        assert!(matches!(ci80(&[1.0]), Err(MetricsError::TooFewSamples(1))));
    }

    #[test]
    fn ci80_symmetric_samples_give_symmetric_interval() {
        let samples: Vec<f64> = (-10..=10).map(f64::from).collect();
        let (mean, lo, hi) = ci80(&samples).unwrap();
        assert!(mean.abs() < 1e-12);
        assert!((lo + hi).abs() < 1e-12, "lo {lo}, hi {hi}");
    }

    #[test]
    fn argmin_prefers_smaller_lambda_on_ties() {
        let increasing: Vec<(f64, f64)> = (0..11).map(|k| (k as f64 * 0.01, k as f64)).collect();
        assert_eq!(argmin_utility(&increasing).unwrap(), 0.0);

        let tied = vec![(0.03, 5.0), (0.01, 5.0), (0.02, 5.0)];
        assert_eq!(argmin_utility(&tied).unwrap(), 0.01);

        let dip = vec![(0.0, 9.0), (0.05, 2.0), (0.1, 4.0)];
        assert_eq!(argmin_utility(&dip).unwrap(), 0.05);

        assert!(argmin_utility(&[]).is_err());
    }

    proptest! {
        /// Brute-force oracle equivalence on synthetic trajectories.
        #[test]
        fn peak_and_sum_match_bruteforce(days in prop::collection::vec((0usize..500, 0usize..100, 0usize..50, 0usize..50), 1..60)) {
            let traj: Vec<DailyRow> = days
                .iter()
                .enumerate()
                .map(|(d, &(i, q_i, q_s, q_r))| row(d as u32, i, q_i, q_s, q_r))
                .collect();
            let mut brute_peak = 0;
            let mut brute_sum = 0;
            for &(i, q_i, q_s, q_r) in &days {
                brute_peak = brute_peak.max(i + q_i);
                brute_sum += q_s + q_i + q_r;
            }
            prop_assert_eq!(peak_infection(&traj).unwrap(), brute_peak);
            prop_assert_eq!(total_quarantine_days(&traj).unwrap(), brute_sum);
        }

        /// Utility is strictly increasing in each argument.
        #[test]
        fn utility_is_monotone(
            ip in 1usize..800,
            dq in 1usize..20_000,
            theta1 in 1.1f64..4.0,
            theta2 in 0.1f64..=1.0,
        ) {
            let up = UtilityParams::new(theta1, theta2).unwrap();
            let base = utility(ip, dq, &up).unwrap();
            prop_assert!(utility(ip + 1, dq, &up).unwrap() > base);
            prop_assert!(utility(ip, dq + 1, &up).unwrap() > base);
        }

        /// The 80% interval covers roughly 80% of large samples.
        #[test]
        fn ci80_covers_expected_mass(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..5000).map(|_| rng.gen::<f64>()).collect();
            let (_, lo, hi) = ci80(&samples).unwrap();
            let inside = samples.iter().filter(|&&x| x >= lo && x <= hi).count();
            let coverage = inside as f64 / samples.len() as f64;
            prop_assert!((coverage - 0.8).abs() < 0.03, "coverage {}", coverage);
        }
    }
}
