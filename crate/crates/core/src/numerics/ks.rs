//! Kolmogorov–Smirnov test against a fully specified null.
//!
//! The null CDF is known exactly (no parameter estimation), so the classical
//! √n-scaled asymptotic distribution applies.

use crate::error::{Error, Result};
use crate::numerics::special::normal_cdf;

/// Null distribution the sample is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsNull {
    StdNormal,
    Uniform01,
}

/// Sidedness of the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsSided {
    /// D = sup |F̂ − F₀|, asymptotic Kolmogorov p-value.
    Two,
    /// D⁺ = sup (F̂ − F₀), asymptotic p = exp(−2 n D⁺²).
    OneUpper,
}

#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_test(sample: &[f64], null: KsNull, sided: KsSided) -> Result<KsOutcome> {
    if sample.is_empty() {
        return Err(Error::domain("ks_test requires a nonempty sample"));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN sample"));
    let n = xs.len() as f64;

    let cdf = |x: f64| -> f64 {
        match null {
            KsNull::StdNormal => normal_cdf(x),
            KsNull::Uniform01 => x.clamp(0.0, 1.0),
        }
    };

    let mut d_plus = f64::NEG_INFINITY;
    let mut d_minus = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d_plus = d_plus.max((i + 1) as f64 / n - f);
        d_minus = d_minus.max(f - i as f64 / n);
    }

    let (statistic, p_value) = match sided {
        KsSided::Two => {
            let d = d_plus.max(d_minus).max(0.0);
            (d, kolmogorov_sf(n.sqrt() * d))
        }
        KsSided::OneUpper => {
            let d = d_plus.max(0.0);
            (d, (-2.0 * n * d * d).exp().min(1.0))
        }
    };
    Ok(KsOutcome {
        statistic,
        p_value,
        n: xs.len(),
    })
}

/// Survival function of the Kolmogorov distribution, Q(λ) = P(K > λ).
///
/// Uses the alternating series for large λ and the Jacobi-theta form for
/// small λ, where the alternating series converges slowly.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let mut sum = 0.0;
        let a = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        for k in 0..50 {
            let m = (2 * k + 1) as f64;
            sum += (-m * m * a).exp();
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn sample_at_midpoint_quantiles_has_minimal_statistic() {
        // Points placed at F₀⁻¹((i − 0.5)/n) leave steps of exactly 0.5/n.
        let n = 40;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let out = ks_test(&xs, KsNull::Uniform01, KsSided::Two).unwrap();
        assert_abs_diff_eq!(out.statistic, 0.5 / n as f64, epsilon = 1e-14);
    }

    #[test]
    fn constant_zero_sample_vs_std_normal() {
        let xs = vec![0.0; 25];
        let out = ks_test(&xs, KsNull::StdNormal, KsSided::Two).unwrap();
        assert_abs_diff_eq!(out.statistic, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(ks_test(&[], KsNull::Uniform01, KsSided::Two).is_err());
    }

    #[test]
    fn sf_matches_frozen_series_values() {
        // mpmath: 2 Σ (−1)^{k−1} exp(−2 k² λ²)
        assert_abs_diff_eq!(kolmogorov_sf(1.0), 0.269_999_671_677_354_5, epsilon = 1e-9);
        assert_abs_diff_eq!(kolmogorov_sf(0.5), 0.963_945_243_664_875_1, epsilon = 1e-9);
        assert_abs_diff_eq!(kolmogorov_sf(1.36), 0.049_485_876_755_377_9, epsilon = 1e-9);
    }

    #[test]
    fn sf_branches_agree_near_crossover() {
        // Both series are accurate around λ ≈ 1.18; they must agree there.
        for &lam in &[1.0, 1.1, 1.18, 1.25, 1.4] {
            let small = {
                let mut sum = 0.0;
                let a = std::f64::consts::PI.powi(2) / (8.0 * lam * lam);
                for k in 0..60 {
                    let m = (2 * k + 1) as f64;
                    sum += (-m * m * a).exp();
                }
                1.0 - (2.0 * std::f64::consts::PI).sqrt() / lam * sum
            };
            let large = {
                let mut sum = 0.0;
                for k in 1..200 {
                    let kf = k as f64;
                    let t = (-2.0 * kf * kf * lam * lam).exp();
                    sum += if k % 2 == 1 { t } else { -t };
                }
                2.0 * sum
            };
            assert_abs_diff_eq!(small, large, epsilon = 1e-12);
        }
    }

    #[test]
    fn null_calibration_p_values_are_uniform() {
        // 1000 replications of n = 500 standard normal draws; the KS p-values
        // must themselves pass a KS test for uniformity.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(20050403);
        let mut pvals = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let xs: Vec<f64> = (0..500)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let out = ks_test(&xs, KsNull::StdNormal, KsSided::Two).unwrap();
            pvals.push(out.p_value);
        }
        let meta = ks_test(&pvals, KsNull::Uniform01, KsSided::Two).unwrap();
        assert!(
            meta.p_value > 0.01,
            "calibration failed: KS-of-KS p = {}",
            meta.p_value
        );
    }
}
