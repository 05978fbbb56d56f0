//! Predictors of the latent stabilized means from a heteroscedastic sample
//! with known per-observation variances.
//!
//! Seven estimators share one output shape: the naive identity, the
//! unweighted and precision-weighted means, linear shrinkage with
//! method-of-moments or maximum-likelihood hyperparameters, a kernel-based
//! nonparametric empirical Bayes rule, a hierarchical-Bayes posterior mean
//! under a flat hyperprior, and the positive-part James–Stein rule.

mod harmonic;
mod hyper;
mod npeb;

pub use harmonic::{harmonic_bayes, HbConfig};
pub use hyper::{fit_ml, fit_mm};
pub use npeb::{npeb, NpebConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::PlayerId;
use crate::transform::{TransformedSample, HALF_PI};

/// Which rule produced an estimate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    Naive,
    GrandMean,
    WeightedMean,
    EbMm,
    EbMl,
    Npeb,
    HarmonicBayes,
    JamesStein,
}

impl EstimatorKind {
    /// Stable machine-readable tag (used in CSV output and flags).
    pub fn tag(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::GrandMean => "mean",
            EstimatorKind::WeightedMean => "weighted-mean",
            EstimatorKind::EbMm => "eb-mm",
            EstimatorKind::EbMl => "eb-ml",
            EstimatorKind::Npeb => "npeb",
            EstimatorKind::HarmonicBayes => "hb",
            EstimatorKind::JamesStein => "js",
        }
    }

    /// Human-readable table label.
    pub fn display_name(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "Naive",
            EstimatorKind::GrandMean => "Group's mean",
            EstimatorKind::WeightedMean => "Weighted mean",
            EstimatorKind::EbMm => "EB(MM)",
            EstimatorKind::EbMl => "EB(ML)",
            EstimatorKind::Npeb => "NP EB",
            EstimatorKind::HarmonicBayes => "Harmonic prior",
            EstimatorKind::JamesStein => "James-Stein",
        }
    }

    pub fn all() -> [EstimatorKind; 8] {
        [
            EstimatorKind::Naive,
            EstimatorKind::GrandMean,
            EstimatorKind::WeightedMean,
            EstimatorKind::EbMm,
            EstimatorKind::EbMl,
            EstimatorKind::Npeb,
            EstimatorKind::HarmonicBayes,
            EstimatorKind::JamesStein,
        ]
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::all()
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::domain(format!("unknown estimator '{s}'")))
    }
}

/// Per-player predictions on the stabilized scale, with provenance.
#[derive(Debug, Clone)]
pub struct EstimateVector {
    pub estimator: EstimatorKind,
    pub entries: Vec<(PlayerId, f64)>,
    /// How many outputs had to be clamped into [0, π/2] (expected 0 on real data).
    pub clamped: usize,
    /// Echo of the configuration that produced the vector.
    pub params: Vec<(String, String)>,
}

impl EstimateVector {
    /// Build a vector, clamping estimates into [0, π/2] and counting clamps.
    pub fn new(
        estimator: EstimatorKind,
        raw: Vec<(PlayerId, f64)>,
        params: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut clamped = 0;
        let mut entries = Vec::with_capacity(raw.len());
        for (id, delta) in raw {
            if !delta.is_finite() {
                return Err(Error::numeric(format!(
                    "{} produced a non-finite estimate for player '{id}'",
                    estimator.tag()
                )));
            }
            let bounded = delta.clamp(0.0, HALF_PI);
            if bounded != delta {
                clamped += 1;
            }
            entries.push((id, bounded));
        }
        Ok(EstimateVector {
            estimator,
            entries,
            clamped,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &PlayerId) -> Option<f64> {
        self.entries
            .iter()
            .find(|(pid, _)| pid == id)
            .map(|(_, d)| *d)
    }
}

/// Solver tolerances shared by the iterative hyperparameter fits.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

/// Which moment system produced a hyperparameter estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HyperMethod {
    MomentMatching,
    MaximumLikelihood,
}

/// Fitted center and spread of the latent population.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HyperEstimate {
    pub mu: f64,
    /// Positive-part variance of the latent means.
    pub tau2: f64,
    pub method: HyperMethod,
    pub iterations: usize,
    pub converged: bool,
}

fn require_nonempty(sample: &TransformedSample, what: &str) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::domain(format!("{what} requires a nonempty sample")));
    }
    Ok(())
}

/// Identity predictor: each first-period value predicts itself.
pub fn naive(sample: &TransformedSample) -> Result<EstimateVector> {
    require_nonempty(sample, "naive")?;
    let entries = sample
        .entries
        .iter()
        .map(|e| (e.player_id.clone(), e.x))
        .collect();
    EstimateVector::new(EstimatorKind::Naive, entries, vec![])
}

/// Unweighted sample mean of the stabilized values.
pub fn unweighted_mean(sample: &TransformedSample) -> Result<f64> {
    require_nonempty(sample, "mean")?;
    Ok(sample.entries.iter().map(|e| e.x).sum::<f64>() / sample.len() as f64)
}

/// Precision-weighted mean with weights 1/σ².
pub fn precision_weighted_mean(sample: &TransformedSample) -> Result<f64> {
    require_nonempty(sample, "weighted mean")?;
    let mut num = 0.0;
    let mut den = 0.0;
    for e in &sample.entries {
        num += e.x / e.sigma2;
        den += 1.0 / e.sigma2;
    }
    Ok(num / den)
}

/// Every player predicted by the unweighted mean.
pub fn grand_mean(sample: &TransformedSample) -> Result<EstimateVector> {
    let mean = unweighted_mean(sample)?;
    let entries = sample
        .entries
        .iter()
        .map(|e| (e.player_id.clone(), mean))
        .collect();
    EstimateVector::new(EstimatorKind::GrandMean, entries, vec![])
}

/// Every player predicted by the precision-weighted mean.
pub fn weighted_mean(sample: &TransformedSample) -> Result<EstimateVector> {
    let mean = precision_weighted_mean(sample)?;
    let entries = sample
        .entries
        .iter()
        .map(|e| (e.player_id.clone(), mean))
        .collect();
    EstimateVector::new(EstimatorKind::WeightedMean, entries, vec![])
}

/// Linear shrinkage toward the fitted center:
/// δ_i = μ + τ²/(τ² + σ_i²) · (X_i − μ).
pub fn shrink_linear(sample: &TransformedSample, hyper: &HyperEstimate) -> Result<EstimateVector> {
    require_nonempty(sample, "shrink_linear")?;
    if hyper.tau2 < 0.0 {
        return Err(Error::domain("shrink_linear requires tau2 >= 0"));
    }
    let kind = match hyper.method {
        HyperMethod::MomentMatching => EstimatorKind::EbMm,
        HyperMethod::MaximumLikelihood => EstimatorKind::EbMl,
    };
    let entries = sample
        .entries
        .iter()
        .map(|e| {
            let factor = hyper.tau2 / (hyper.tau2 + e.sigma2);
            (e.player_id.clone(), hyper.mu + factor * (e.x - hyper.mu))
        })
        .collect();
    EstimateVector::new(
        kind,
        entries,
        vec![
            ("mu".into(), format!("{:.12}", hyper.mu)),
            ("tau2".into(), format!("{:.12e}", hyper.tau2)),
            ("converged".into(), hyper.converged.to_string()),
            ("iterations".into(), hyper.iterations.to_string()),
        ],
    )
}

/// Positive-part James–Stein shrinkage toward the precision-weighted mean:
/// δ = μ̂₁ + (1 − (P − 3)/Σ(X_i − μ̂₁)²/σ_i²)₊ (X − μ̂₁).
pub fn james_stein(sample: &TransformedSample) -> Result<EstimateVector> {
    let p = sample.len();
    if p < 4 {
        return Err(Error::domain(format!(
            "james_stein requires at least 4 observations, got {p}"
        )));
    }
    let center = precision_weighted_mean(sample)?;
    let dispersion: f64 = sample
        .entries
        .iter()
        .map(|e| (e.x - center).powi(2) / e.sigma2)
        .sum();
    let factor = if dispersion > 0.0 {
        (1.0 - (p as f64 - 3.0) / dispersion).max(0.0)
    } else {
        0.0
    };
    let entries = sample
        .entries
        .iter()
        .map(|e| (e.player_id.clone(), center + factor * (e.x - center)))
        .collect();
    EstimateVector::new(
        EstimatorKind::JamesStein,
        entries,
        vec![
            ("center".into(), format!("{center:.12}")),
            ("shrink_factor".into(), format!("{factor:.12}")),
        ],
    )
}

/// Parameters for dispatching any estimator by kind.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub fit: FitConfig,
    /// Kernel bandwidth; None picks the sample-size default.
    pub npeb_h: Option<f64>,
    pub hb: HbConfig,
}

/// Run one estimator on a sample.
pub fn run_estimator(
    kind: EstimatorKind,
    sample: &TransformedSample,
    settings: &EstimatorSettings,
) -> Result<EstimateVector> {
    match kind {
        EstimatorKind::Naive => naive(sample),
        EstimatorKind::GrandMean => grand_mean(sample),
        EstimatorKind::WeightedMean => weighted_mean(sample),
        EstimatorKind::EbMm => shrink_linear(sample, &fit_mm(sample, &settings.fit)?),
        EstimatorKind::EbMl => shrink_linear(sample, &fit_ml(sample, &settings.fit)?),
        EstimatorKind::Npeb => {
            let cfg = match settings.npeb_h {
                Some(h) => NpebConfig::new(h)?,
                None => NpebConfig::default_for(sample.len()),
            };
            npeb(sample, &cfg)
        }
        EstimatorKind::HarmonicBayes => harmonic_bayes(sample, &settings.hb),
        EstimatorKind::JamesStein => james_stein(sample),
    }
}
