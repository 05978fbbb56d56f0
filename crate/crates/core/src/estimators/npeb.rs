//! Nonparametric empirical Bayes estimation via Tweedie's formula applied to
//! a heteroscedasticity-aware kernel estimate of the marginal density.
//!
//! For target observation i the marginal density and its derivative are
//! estimated from the neighbors k whose sampling variance satisfies
//! (1 + h)σ_i² − σ_k² > 0, with per-pair bandwidth
//! b_ik = √((1 + h)(σ_k² ∨ σ_i²) − σ_k²); the correction σ_i²·g′/g is then
//! added to X_i. The target itself always passes the indicator, so the
//! denominator never vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::TransformedSample;

use super::{EstimateVector, EstimatorKind};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Bandwidth constant h > 0 for the kernel estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NpebConfig {
    pub h: f64,
}

impl NpebConfig {
    pub fn new(h: f64) -> Result<Self> {
        if h <= 0.0 || h.is_nan() {
            return Err(Error::domain(format!("bandwidth h must be positive, got {h}")));
        }
        Ok(NpebConfig { h })
    }

    /// Sample-size default: 0.25 for large samples, 0.30 below 200.
    pub fn default_for(sample_size: usize) -> Self {
        NpebConfig {
            h: if sample_size > 200 { 0.25 } else { 0.30 },
        }
    }
}

/// Kernel-based nonparametric empirical Bayes predictor.
pub fn npeb(sample: &TransformedSample, cfg: &NpebConfig) -> Result<EstimateVector> {
    if sample.len() < 2 {
        return Err(Error::domain("npeb requires at least 2 observations"));
    }
    let h = cfg.h;
    let mut fallbacks = 0usize;
    let mut entries = Vec::with_capacity(sample.len());

    for target in &sample.entries {
        let cap = (1.0 + h) * target.sigma2;
        // Accumulate g and dg/dX_i in the log domain, shifted by the largest
        // log kernel term so tiny densities cannot underflow to zero.
        let mut log_terms = Vec::new();
        let mut slopes = Vec::new();
        for other in &sample.entries {
            if cap - other.sigma2 <= 0.0 {
                continue;
            }
            let b2 = (1.0 + h) * other.sigma2.max(target.sigma2) - other.sigma2;
            let d = target.x - other.x;
            let log_kernel = -0.5 * d * d / b2 - 0.5 * b2.ln() - 0.5 * LN_2PI;
            log_terms.push(log_kernel);
            // d/dX_i of φ(d/b)/b is −(d/b²)·φ(d/b)/b.
            slopes.push(-d / b2);
        }
        let max_log = log_terms
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut density = 0.0;
        let mut derivative = 0.0;
        for (log_term, slope) in log_terms.iter().zip(&slopes) {
            let scaled = (log_term - max_log).exp();
            density += scaled;
            derivative += slope * scaled;
        }

        let delta = if density > 0.0 && max_log.is_finite() {
            target.x + target.sigma2 * derivative / density
        } else {
            fallbacks += 1;
            target.x
        };
        entries.push((target.player_id.clone(), delta));
    }

    EstimateVector::new(
        EstimatorKind::Npeb,
        entries,
        vec![
            ("h".into(), format!("{h}")),
            ("fallbacks".into(), fallbacks.to_string()),
        ],
    )
}
