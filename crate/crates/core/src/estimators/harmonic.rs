//! Posterior-mean shrinkage under the flat hyperprior on (μ, τ²).
//!
//! The hyperposterior is
//!   f(μ, γ | X) ∝ [Π_j (γ + σ_j²)]^(−1/2) · exp(−Σ_j (X_j − μ)²/(2(γ + σ_j²)))
//! and each prediction is the posterior expectation of
//! μ + γ/(γ + σ_i²)·(X_i − μ), i.e. a ratio of double integrals.
//!
//! The γ axis is mapped onto (0, 1) by ω = σ̲²/(γ + σ̲²) with σ̲² = min σ_j²,
//! which makes the integrand decay like ω^(P/2 − 2) at the wide-γ end. Both
//! axes are then windowed around the posterior mode before Gauss–Legendre
//! integration: the μ window spans ±`span_sd` posterior standard deviations,
//! the ω window is read off a profile scan at the mode. A doubled-resolution
//! pass guards the quadrature; disagreement is a numeric error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::QuadratureAxis;
use crate::transform::TransformedSample;

use super::{fit_ml, EstimateVector, EstimatorKind, FitConfig};

/// Node counts and windowing for the posterior integration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HbConfig {
    pub mu_nodes: usize,
    pub omega_nodes: usize,
    /// Half-width of the μ window in posterior standard deviations.
    pub span_sd: f64,
    /// Verify against a doubled-resolution grid.
    pub refine_check: bool,
    /// Largest tolerated estimate change under grid doubling (radians).
    pub refine_tol: f64,
}

impl Default for HbConfig {
    fn default() -> Self {
        HbConfig {
            mu_nodes: 64,
            omega_nodes: 64,
            span_sd: 8.0,
            refine_check: true,
            refine_tol: 1e-6,
        }
    }
}

/// Log scan-point count for the ω profile and log-threshold for windowing:
/// points within exp(−40) of the peak are kept.
const OMEGA_SCAN: usize = 4096;
const LOG_WINDOW_DROP: f64 = 40.0;

struct Posterior<'a> {
    xs: Vec<f64>,
    s2: Vec<f64>,
    min_s2: f64,
    _sample: &'a TransformedSample,
}

impl<'a> Posterior<'a> {
    fn new(sample: &'a TransformedSample) -> Self {
        let xs: Vec<f64> = sample.entries.iter().map(|e| e.x).collect();
        let s2: Vec<f64> = sample.entries.iter().map(|e| e.sigma2).collect();
        let min_s2 = s2.iter().copied().fold(f64::INFINITY, f64::min);
        Posterior {
            xs,
            s2,
            min_s2,
            _sample: sample,
        }
    }

    fn gamma(&self, omega: f64) -> f64 {
        self.min_s2 * (1.0 - omega) / omega
    }

    /// Log integrand in (μ, ω), including the |dγ/dω| Jacobian σ̲²/ω².
    fn log_f(&self, mu: f64, omega: f64) -> f64 {
        let gamma = self.gamma(omega);
        let mut log_det = 0.0;
        let mut quad = 0.0;
        for (x, v) in self.xs.iter().zip(&self.s2) {
            let d = gamma + v;
            log_det += d.ln();
            quad += (x - mu).powi(2) / d;
        }
        -0.5 * log_det - 0.5 * quad + self.min_s2.ln() - 2.0 * omega.ln()
    }
}

/// Golden-section maximizer of a unimodal function on [lo, hi].
fn golden_max(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

struct Windows {
    mu: (f64, f64),
    omega: (f64, f64),
    mu_mode: f64,
}

/// Locate the posterior mode and integration windows.
fn windows(post: &Posterior, cfg: &HbConfig, fit: &FitConfig) -> Result<Windows> {
    // Seed from the ML fit: cheap and reliable for the center and scale.
    let ml = fit_ml(post._sample, fit)?;
    let se = (1.0
        / post
            .s2
            .iter()
            .map(|v| 1.0 / (ml.tau2 + v))
            .sum::<f64>())
    .sqrt();

    // Joint mode by coordinate ascent (the posterior is unimodal in practice).
    let mut mu_star = ml.mu;
    let mut omega_star = post.min_s2 / (ml.tau2 + post.min_s2);
    omega_star = omega_star.clamp(1e-6, 1.0 - 1e-6);
    for _ in 0..8 {
        omega_star = golden_max(1e-9, 1.0 - 1e-9, |w| post.log_f(mu_star, w));
        mu_star = golden_max(mu_star - 12.0 * se, mu_star + 12.0 * se, |m| {
            post.log_f(m, omega_star)
        });
    }

    // ω window: profile scan at the μ mode, keep everything within
    // exp(−LOG_WINDOW_DROP) of the peak, pad by two scan steps.
    let step = 1.0 / (OMEGA_SCAN as f64 + 1.0);
    let peak = post.log_f(mu_star, omega_star);
    let mut lo = omega_star;
    let mut hi = omega_star;
    for i in 1..=OMEGA_SCAN {
        let w = i as f64 * step;
        if post.log_f(mu_star, w) >= peak - LOG_WINDOW_DROP {
            lo = lo.min(w);
            hi = hi.max(w);
        }
    }
    let omega_window = ((lo - 2.0 * step).max(step * 0.5), (hi + 2.0 * step).min(1.0 - step * 0.5));

    // Marginal μ density on the ω window, for the mode and curvature.
    let axis = QuadratureAxis::gauss_legendre(cfg.omega_nodes, omega_window.0, omega_window.1)?;
    let log_marginal = |mu: f64| -> f64 {
        let mut max_term = f64::NEG_INFINITY;
        let terms: Vec<f64> = axis
            .nodes
            .iter()
            .zip(&axis.weights)
            .map(|(&w, &wt)| {
                let t = post.log_f(mu, w) + wt.ln();
                max_term = max_term.max(t);
                t
            })
            .collect();
        max_term + terms.iter().map(|t| (t - max_term).exp()).sum::<f64>().ln()
    };
    let mu_mode = golden_max(mu_star - 12.0 * se, mu_star + 12.0 * se, log_marginal);
    let h = (se / 20.0).max(1e-9);
    let curvature =
        (log_marginal(mu_mode + h) - 2.0 * log_marginal(mu_mode) + log_marginal(mu_mode - h))
            / (h * h);
    let sd = if curvature < 0.0 {
        (-1.0 / curvature).sqrt()
    } else {
        se
    };
    let mu_window = (mu_mode - cfg.span_sd * sd, mu_mode + cfg.span_sd * sd);

    Ok(Windows {
        mu: mu_window,
        omega: omega_window,
        mu_mode,
    })
}

/// One quadrature pass: posterior means of μ + γ/(γ+σ_i²)(X_i − μ) for all i.
fn quadrature_pass(
    post: &Posterior,
    win: &Windows,
    mu_nodes: usize,
    omega_nodes: usize,
) -> Result<Vec<f64>> {
    let mu_axis = QuadratureAxis::gauss_legendre(mu_nodes, win.mu.0, win.mu.1)?;
    let omega_axis = QuadratureAxis::gauss_legendre(omega_nodes, win.omega.0, win.omega.1)?;

    // First sweep: common log scale so the weights cannot overflow.
    let mut max_log = f64::NEG_INFINITY;
    let mut log_vals = vec![0.0; mu_nodes * omega_nodes];
    for (mi, &mu) in mu_axis.nodes.iter().enumerate() {
        for (wi, &omega) in omega_axis.nodes.iter().enumerate() {
            let lf = post.log_f(mu, omega);
            if !lf.is_finite() {
                return Err(Error::numeric(format!(
                    "posterior log-density non-finite at (mu={mu}, omega={omega})"
                )));
            }
            log_vals[mi * omega_nodes + wi] = lf;
            max_log = max_log.max(lf);
        }
    }

    let p = post.xs.len();
    let mut denom = 0.0;
    let mut numer = vec![0.0; p];
    for (mi, &mu) in mu_axis.nodes.iter().enumerate() {
        let wm = mu_axis.weights[mi];
        for (wi, &omega) in omega_axis.nodes.iter().enumerate() {
            let weight = wm
                * omega_axis.weights[wi]
                * (log_vals[mi * omega_nodes + wi] - max_log).exp();
            if weight == 0.0 {
                continue;
            }
            denom += weight;
            let gamma = post.gamma(omega);
            for (i, (x, v)) in post.xs.iter().zip(&post.s2).enumerate() {
                let shrink = gamma / (gamma + v);
                numer[i] += weight * (mu + shrink * (x - mu));
            }
        }
    }
    if denom <= 0.0 || denom.is_nan() {
        return Err(Error::numeric("posterior mass underflowed to zero"));
    }
    Ok(numer.into_iter().map(|n| n / denom).collect())
}

/// Hierarchical-Bayes posterior-mean predictor under the flat hyperprior.
pub fn harmonic_bayes(sample: &TransformedSample, cfg: &HbConfig) -> Result<EstimateVector> {
    if sample.len() < 4 {
        return Err(Error::domain(format!(
            "harmonic_bayes requires at least 4 observations for an integrable posterior, got {}",
            sample.len()
        )));
    }
    if cfg.mu_nodes < 4 || cfg.omega_nodes < 4 {
        return Err(Error::domain("harmonic_bayes needs at least 4 nodes per axis"));
    }
    let post = Posterior::new(sample);
    let fit = FitConfig::default();
    let win = windows(&post, cfg, &fit)?;

    let deltas = quadrature_pass(&post, &win, cfg.mu_nodes, cfg.omega_nodes)?;
    let deltas = if cfg.refine_check {
        let refined = quadrature_pass(&post, &win, cfg.mu_nodes * 2, cfg.omega_nodes * 2)?;
        let max_diff = deltas
            .iter()
            .zip(&refined)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_diff > cfg.refine_tol {
            return Err(Error::numeric(format!(
                "posterior quadrature did not converge: doubling the {}x{} grid moved estimates \
                 by {max_diff:.3e} (tolerance {:.1e}); mu window [{:.6}, {:.6}], omega window \
                 [{:.6}, {:.6}]",
                cfg.mu_nodes, cfg.omega_nodes, cfg.refine_tol,
                win.mu.0, win.mu.1, win.omega.0, win.omega.1
            )));
        }
        refined
    } else {
        deltas
    };

    let entries = sample
        .entries
        .iter()
        .zip(deltas)
        .map(|(e, d)| (e.player_id.clone(), d))
        .collect();
    EstimateVector::new(
        EstimatorKind::HarmonicBayes,
        entries,
        vec![
            ("mu_nodes".into(), cfg.mu_nodes.to_string()),
            ("omega_nodes".into(), cfg.omega_nodes.to_string()),
            ("span_sd".into(), cfg.span_sd.to_string()),
            ("mu_mode".into(), format!("{:.9}", win.mu_mode)),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ten_player_sample() -> TransformedSample {
        sample_from(&[
            (0.42, 14),
            (0.51, 160),
            (0.56, 310),
            (0.48, 44),
            (0.62, 88),
            (0.39, 21),
            (0.53, 123),
            (0.58, 67),
            (0.45, 30),
            (0.50, 215),
        ])
    }

    #[test]
    fn equal_values_are_a_fixed_point() {
        let s = sample_from(&[(0.5, 12), (0.5, 40), (0.5, 90), (0.5, 200), (0.5, 31)]);
        let v = harmonic_bayes(&s, &HbConfig::default()).unwrap();
        for (_, d) in &v.entries {
            assert_abs_diff_eq!(*d, 0.5, epsilon = 1e-6);
        }
    }

    /// Brute-force Riemann-sum oracle on the same (μ, ω) parameterization.
    fn brute_force(sample: &TransformedSample, mu_win: (f64, f64), n: usize) -> Vec<f64> {
        let post = Posterior::new(sample);
        let mut max_log = f64::NEG_INFINITY;
        let d_mu = (mu_win.1 - mu_win.0) / n as f64;
        let d_w = 1.0 / (n as f64 + 1.0);
        let mut cells = Vec::with_capacity(n * n);
        for i in 0..n {
            let mu = mu_win.0 + (i as f64 + 0.5) * d_mu;
            for j in 1..=n {
                let w = j as f64 * d_w;
                let lf = post.log_f(mu, w);
                max_log = max_log.max(lf);
                cells.push((mu, w, lf));
            }
        }
        let p = post.xs.len();
        let mut denom = 0.0;
        let mut numer = vec![0.0; p];
        for (mu, w, lf) in cells {
            let weight = (lf - max_log).exp();
            denom += weight;
            let gamma = post.gamma(w);
            for (i, (x, v)) in post.xs.iter().zip(&post.s2).enumerate() {
                numer[i] += weight * (mu + gamma / (gamma + v) * (x - mu));
            }
        }
        numer.into_iter().map(|q| q / denom).collect()
    }

    #[test]
    fn matches_brute_force_quadrature() {
        let s = ten_player_sample();
        let v = harmonic_bayes(&s, &HbConfig::default()).unwrap();
        // Oracle integrates μ over a generous fixed window and ω over all of
        // (0, 1) with a 2000×2000 midpoint rule.
        let oracle = brute_force(&s, (0.2, 0.9), 2000);
        for ((_, d), o) in v.entries.iter().zip(&oracle) {
            assert_abs_diff_eq!(*d, *o, epsilon = 1e-4);
        }
    }

    #[test]
    fn location_equivariance() {
        let s = ten_player_sample();
        let c = 0.11;
        let t = shifted(&s, c);
        let cfg = HbConfig::default();
        let v0 = harmonic_bayes(&s, &cfg).unwrap();
        let v1 = harmonic_bayes(&t, &cfg).unwrap();
        for ((_, d0), (_, d1)) in v0.entries.iter().zip(&v1.entries) {
            assert_abs_diff_eq!(d0 + c, *d1, epsilon = 1e-6);
        }
    }

    #[test]
    fn estimates_shrink_toward_the_center() {
        let s = ten_player_sample();
        let v = harmonic_bayes(&s, &HbConfig::default()).unwrap();
        let spread_before = s
            .entries
            .iter()
            .map(|e| e.x)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        let spread_after = deltas(&v)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        assert!(spread_after.1 - spread_after.0 < spread_before.1 - spread_before.0);
    }

    #[test]
    fn small_samples_rejected() {
        let s = sample_from(&[(0.5, 10), (0.6, 10), (0.4, 10)]);
        assert!(harmonic_bayes(&s, &HbConfig::default()).is_err());
    }

    #[test]
    fn large_sample_passes_refinement() {
        // A tight posterior (many players) must still resolve on the default
        // grid thanks to the windowing.
        let mut pairs = Vec::new();
        for i in 0..400 {
            let x = 0.50 + 0.08 * ((i * 7919 % 1000) as f64 / 1000.0 - 0.5);
            let n = 11 + (i * 613 % 380) as u32;
            pairs.push((x, n));
        }
        let s = sample_from(&pairs);
        let v = harmonic_bayes(&s, &HbConfig::default()).unwrap();
        assert_eq!(v.len(), 400);
    }
}
