//! Hyperparameter fits for the two-level normal model with known
//! per-observation variances: X_i ~ N(μ, τ² + σ_i²).

use crate::error::{Error, Result};
use crate::transform::TransformedSample;

use super::{unweighted_mean, FitConfig, HyperEstimate, HyperMethod};

fn variances(sample: &TransformedSample) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = sample.entries.iter().map(|e| e.x).collect();
    let s2: Vec<f64> = sample.entries.iter().map(|e| e.sigma2).collect();
    (xs, s2)
}

fn weighted_center(xs: &[f64], s2: &[f64], tau2: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, v) in xs.iter().zip(s2) {
        let w = 1.0 / (tau2 + v);
        num += w * x;
        den += w;
    }
    num / den
}

/// Positive-part moment estimate of τ² around a given center:
/// τ̃² = (Σ(X_i − μ)² − ((P−1)/P)·Σσ_i²)₊ / (P − 1).
///
/// With the unweighted mean as center this satisfies E(τ̃²) = τ² before the
/// positive-part truncation.
fn mm_tau2(xs: &[f64], s2: &[f64], mu: f64) -> f64 {
    let p = xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - mu).powi(2)).sum();
    let sum_s2: f64 = s2.iter().sum();
    ((ss - (p - 1.0) / p * sum_s2) / (p - 1.0)).max(0.0)
}

/// Method-of-moments fit: alternates the precision-weighted center with the
/// unbiased moment equation for τ², seeded by the unweighted mean.
pub fn fit_mm(sample: &TransformedSample, cfg: &FitConfig) -> Result<HyperEstimate> {
    if sample.len() < 2 {
        return Err(Error::domain("fit_mm requires at least 2 observations"));
    }
    let (xs, s2) = variances(sample);
    let mut mu = unweighted_mean(sample)?;
    let mut tau2 = mm_tau2(&xs, &s2, mu);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let new_mu = weighted_center(&xs, &s2, tau2);
        let new_tau2 = mm_tau2(&xs, &s2, new_mu);
        let done = (new_mu - mu).abs() < cfg.tol && (new_tau2 - tau2).abs() < cfg.tol;
        mu = new_mu;
        tau2 = new_tau2;
        if done {
            converged = true;
            break;
        }
    }
    Ok(HyperEstimate {
        mu,
        tau2,
        method: HyperMethod::MomentMatching,
        iterations,
        converged,
    })
}

/// Marginal-likelihood score in τ² at a fixed center:
/// g(τ²) = Σ(X_i − μ)²/(τ² + σ_i²)² − Σ 1/(τ² + σ_i²).
fn ml_score(xs: &[f64], s2: &[f64], mu: f64, tau2: f64) -> f64 {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (x, v) in xs.iter().zip(s2) {
        let d = tau2 + v;
        lhs += (x - mu).powi(2) / (d * d);
        rhs += 1.0 / d;
    }
    lhs - rhs
}

/// Root of the score equation in τ² ≥ 0 by bracketing and bisection.
fn ml_tau2(xs: &[f64], s2: &[f64], mu: f64) -> f64 {
    if ml_score(xs, s2, mu, 0.0) <= 0.0 {
        return 0.0; // boundary solution
    }
    let p = xs.len() as f64;
    let mut hi = (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / p).max(1e-12);
    let mut tries = 0;
    while ml_score(xs, s2, mu, hi) > 0.0 {
        hi *= 4.0;
        tries += 1;
        if tries > 80 {
            return hi; // score never crossed zero; dispersion is unbounded
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ml_score(xs, s2, mu, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 + 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum-likelihood fit of (μ, τ²) under X_i ~ N(μ, τ² + σ_i²), with τ²
/// constrained to be nonnegative.
pub fn fit_ml(sample: &TransformedSample, cfg: &FitConfig) -> Result<HyperEstimate> {
    if sample.len() < 2 {
        return Err(Error::domain("fit_ml requires at least 2 observations"));
    }
    let (xs, s2) = variances(sample);
    let mut mu = unweighted_mean(sample)?;
    let mut tau2 = ml_tau2(&xs, &s2, mu);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let new_mu = weighted_center(&xs, &s2, tau2);
        let new_tau2 = ml_tau2(&xs, &s2, new_mu);
        let done = (new_mu - mu).abs() < cfg.tol && (new_tau2 - tau2).abs() < cfg.tol;
        mu = new_mu;
        tau2 = new_tau2;
        if done {
            converged = true;
            break;
        }
    }
    Ok(HyperEstimate {
        mu,
        tau2,
        method: HyperMethod::MaximumLikelihood,
        iterations,
        converged,
    })
}
