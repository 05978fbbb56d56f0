//! Arcsine variance stabilization of binomial counts.
//!
//! `stabilize` maps a count pair (H, N) to arcsin √((H + c)/(N + 2c)); on
//! that scale the sampling variance is 1/(4N) to first order regardless of
//! the unknown success rate. `c = 1/4` additionally kills the O(1/N) bias of
//! the back-transformed mean, which is why it is the default. The
//! `exact_bias`/`exact_var_ratio` diagnostics evaluate the full binomial sum,
//! not an asymptotic or Monte Carlo stand-in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PeriodTable, PlayerId};
use crate::numerics::ln_gamma;

pub const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Offset constant for the arcsine transform, in [0, 1/2].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig {
    pub c: f64,
}

impl TransformConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&c) {
            return Err(Error::domain(format!("offset c must lie in [0, 1/2], got {c}")));
        }
        Ok(TransformConfig { c })
    }
}

impl Default for TransformConfig {
    /// The mean-matching offset c = 1/4.
    fn default() -> Self {
        TransformConfig { c: 0.25 }
    }
}

/// arcsin √((H + c)/(N + 2c)) in radians, within [0, π/2].
pub fn stabilize(successes: u32, attempts: u32, cfg: &TransformConfig) -> Result<f64> {
    if attempts == 0 {
        return Err(Error::domain("stabilize requires at least one attempt"));
    }
    if successes > attempts {
        return Err(Error::domain(format!(
            "successes {successes} exceed attempts {attempts}"
        )));
    }
    let ratio = (successes as f64 + cfg.c) / (attempts as f64 + 2.0 * cfg.c);
    Ok(ratio.sqrt().asin())
}

/// Back-transform sin²(x) onto the proportion scale.
pub fn inverse(x: f64) -> Result<f64> {
    if !(0.0..=HALF_PI).contains(&x) {
        return Err(Error::domain(format!(
            "inverse requires x in [0, pi/2], got {x}"
        )));
    }
    Ok(x.sin().powi(2))
}

/// Exact bias of the back-transformed mean: sin²(E[Y]) − p.
///
/// E[Y] is the full binomial expectation of the transformed variable at
/// success rate `p`; probabilities are accumulated through log-gamma so
/// large N stays stable.
pub fn exact_bias(attempts: u32, p: f64, cfg: &TransformConfig) -> Result<f64> {
    let e1 = exact_transformed_moments(attempts, p, cfg)?.0;
    Ok(e1.sin().powi(2) - p)
}

/// Exact variance of the transformed variable over its nominal value.
///
/// The nominal variance is 1/(4N), except for the Anscombe offset c = 3/8
/// where the sharper 1/(4N + 2) applies.
pub fn exact_var_ratio(attempts: u32, p: f64, cfg: &TransformConfig) -> Result<f64> {
    let var = exact_transformed_moments(attempts, p, cfg)?.1;
    let nominal = if cfg.c == 0.375 {
        1.0 / (4.0 * attempts as f64 + 2.0)
    } else {
        1.0 / (4.0 * attempts as f64)
    };
    Ok(var / nominal)
}

/// Mean and variance of the transformed count by direct summation.
fn exact_transformed_moments(attempts: u32, p: f64, cfg: &TransformConfig) -> Result<(f64, f64)> {
    if attempts == 0 {
        return Err(Error::domain("exact moments require at least one attempt"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "success rate must lie strictly inside (0, 1), got {p}"
        )));
    }
    let n = attempts as f64;
    let ln_n_fact = ln_gamma(n + 1.0);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for h in 0..=attempts {
        let hf = h as f64;
        let log_pmf =
            ln_n_fact - ln_gamma(hf + 1.0) - ln_gamma(n - hf + 1.0) + hf * lp + (n - hf) * lq;
        let w = log_pmf.exp();
        let y = ((hf + cfg.c) / (n + 2.0 * cfg.c)).sqrt().asin();
        e1 += w * y;
        e2 += w * y * y;
    }
    Ok((e1, e2 - e1 * e1))
}

/// One stabilized observation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedObs {
    pub player_id: PlayerId,
    /// Stabilized value in [0, π/2].
    pub x: f64,
    /// Known sampling variance 1/(4N).
    pub sigma2: f64,
    pub attempts: u32,
}

/// A sample of stabilized observations with known variances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransformedSample {
    pub entries: Vec<TransformedObs>,
}

impl TransformedSample {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, player_id: PlayerId, x: f64, attempts: u32) -> Result<()> {
        if attempts == 0 {
            return Err(Error::domain("transformed entries need attempts >= 1"));
        }
        self.entries.push(TransformedObs {
            player_id,
            x,
            sigma2: 1.0 / (4.0 * attempts as f64),
            attempts,
        });
        Ok(())
    }

    /// Stabilize one column of an aggregated table.
    pub fn from_table(table: &PeriodTable, period: usize, cfg: &TransformConfig) -> Result<Self> {
        let mut sample = TransformedSample::default();
        for row in &table.rows {
            let counts = row.counts.get(period).ok_or_else(|| {
                Error::domain(format!("table has no period index {period}"))
            })?;
            let x = stabilize(counts.successes, counts.attempts, cfg)?;
            sample.push(row.id.clone(), x, counts.attempts)?;
        }
        Ok(sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg(c: f64) -> TransformConfig {
        TransformConfig::new(c).unwrap()
    }

    #[test]
    fn symmetric_case_hits_quarter_pi() {
        // (6 + 1/4)/(12 + 1/2) = 1/2 exactly.
        assert_abs_diff_eq!(
            stabilize(6, 12, &cfg(0.25)).unwrap(),
            std::f64::consts::FRAC_PI_4,
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_successes_with_zero_offset() {
        assert_eq!(stabilize(0, 12, &cfg(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn frozen_oracle_value() {
        // mpmath: asin(sqrt(12.25/45.5)) = 0.545533844559572
        assert_abs_diff_eq!(
            stabilize(12, 45, &cfg(0.25)).unwrap(),
            0.545_533_844_559_572,
            epsilon = 1e-6
        );
    }

    #[test]
    fn zero_attempts_rejected() {
        assert!(stabilize(0, 0, &TransformConfig::default()).is_err());
    }

    #[test]
    fn inverse_basics() {
        assert_abs_diff_eq!(inverse(std::f64::consts::FRAC_PI_4).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(inverse(0.0).unwrap(), 0.0);
        assert!(inverse(-0.1).is_err());
        assert!(inverse(HALF_PI + 0.1).is_err());
    }

    #[test]
    fn config_rejects_out_of_range_offsets() {
        assert!(TransformConfig::new(-0.01).is_err());
        assert!(TransformConfig::new(0.51).is_err());
        assert!(TransformConfig::new(0.0).is_ok());
        assert!(TransformConfig::new(0.5).is_ok());
    }

    #[test]
    fn bias_vanishes_at_half_by_symmetry() {
        for c in [0.0, 0.25, 0.375] {
            for n in [3, 12, 47] {
                assert_abs_diff_eq!(exact_bias(n, 0.5, &cfg(c)).unwrap(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bias_curve_ordering_at_n12() {
        // Offsets order the bias curves top (3/8), middle (1/4), bottom (0).
        for p in [0.1, 0.2, 0.3, 0.4] {
            let b0 = exact_bias(12, p, &cfg(0.0)).unwrap();
            let b14 = exact_bias(12, p, &cfg(0.25)).unwrap();
            let b38 = exact_bias(12, p, &cfg(0.375)).unwrap();
            assert!(b38 > b14 && b14 > b0, "ordering failed at p={p}");
        }
    }

    #[test]
    fn quarter_offset_dominates_bias_at_n10() {
        for tenths in 1..=9u32 {
            let p = tenths as f64 / 10.0;
            let b0 = exact_bias(10, p, &cfg(0.0)).unwrap().abs();
            let b14 = exact_bias(10, p, &cfg(0.25)).unwrap().abs();
            let b38 = exact_bias(10, p, &cfg(0.375)).unwrap().abs();
            if tenths == 5 {
                // All three are exactly zero by symmetry.
                assert!(b14 < 1e-12 && b0 < 1e-12 && b38 < 1e-12);
            } else {
                assert!(b14 < b0 && b14 < b38, "dominance failed at p={p}");
            }
        }
    }

    #[test]
    fn bias_decays_like_inverse_n_squared() {
        // |bias|·N² stays bounded along a doubling N sequence (frozen oracle
        // values: 0.0883, 0.0755, 0.0713).
        let mut scaled = Vec::new();
        for n in [20u32, 40, 80] {
            let b = exact_bias(n, 0.3, &cfg(0.25)).unwrap();
            scaled.push(b.abs() * (n as f64).powi(2));
        }
        assert_abs_diff_eq!(scaled[0], 0.088_277, epsilon = 1e-5);
        assert_abs_diff_eq!(scaled[1], 0.075_483, epsilon = 1e-5);
        assert_abs_diff_eq!(scaled[2], 0.071_259, epsilon = 1e-5);
        assert!(scaled.iter().all(|s| *s < 0.1));
    }

    #[test]
    fn var_ratio_prefers_nonzero_offsets_at_small_n() {
        let r0 = exact_var_ratio(12, 0.2, &cfg(0.0)).unwrap();
        let r14 = exact_var_ratio(12, 0.2, &cfg(0.25)).unwrap();
        let r38 = exact_var_ratio(12, 0.2, &cfg(0.375)).unwrap();
        assert!((r14 - 1.0).abs() < (r0 - 1.0).abs());
        assert!((r38 - 1.0).abs() < (r0 - 1.0).abs());
        // Frozen oracle values.
        assert_abs_diff_eq!(r0, 1.434_060, epsilon = 1e-5);
        assert_abs_diff_eq!(r14, 1.026_700, epsilon = 1e-5);
        assert_abs_diff_eq!(r38, 0.979_790, epsilon = 1e-5);
    }

    #[test]
    fn var_ratio_approaches_one() {
        let mut prev = f64::INFINITY;
        for n in [12u32, 48, 192] {
            let gap = (exact_var_ratio(n, 0.3, &cfg(0.25)).unwrap() - 1.0).abs();
            assert!(gap < prev, "|ratio - 1| not decreasing at N={n}");
            prev = gap;
        }
    }

    #[test]
    fn var_ratio_band_at_n12() {
        // Exact-sum oracle confirms the ratio stays within [0.8, 1.2] for
        // p ≥ 0.15 at N = 12 with the default offset.
        let mut p = 0.15;
        while p <= 0.9 {
            let r = exact_var_ratio(12, p, &TransformConfig::default()).unwrap();
            assert!((0.8..=1.2).contains(&r), "ratio {r} escaped band at p={p}");
            p += 0.01;
        }
    }

    #[test]
    fn tiny_p_stays_finite() {
        let b = exact_bias(12, 1e-9, &cfg(0.25)).unwrap();
        let r = exact_var_ratio(12, 1e-9, &cfg(0.25)).unwrap();
        assert!(b.is_finite() && r.is_finite());
    }

    proptest! {
        #[test]
        fn round_trip_recovers_shifted_ratio(h in 0u32..200, extra in 0u32..400, c in 0.0f64..=0.5) {
            let n = h + extra.max(1);
            let cfg = TransformConfig::new(c).unwrap();
            let x = stabilize(h, n, &cfg).unwrap();
            prop_assert!((0.0..=HALF_PI).contains(&x));
            let back = inverse(x).unwrap();
            let expected = (h as f64 + c) / (n as f64 + 2.0 * c);
            prop_assert!((back - expected).abs() < 1e-12);
        }

        #[test]
        fn strictly_increasing_in_successes(n in 1u32..300, c in 0.0f64..=0.5) {
            let cfg = TransformConfig::new(c).unwrap();
            let mut prev = -1.0;
            for h in 0..=n.min(50) {
                let x = stabilize(h, n, &cfg).unwrap();
                prop_assert!(x > prev);
                prev = x;
            }
        }
    }
}
