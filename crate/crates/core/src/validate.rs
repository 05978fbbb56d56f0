//! Scoring of predictions against held-out second-period data.
//!
//! All criteria subtract the known sampling variance of the holdout, so they
//! estimate squared *estimation* error rather than raw prediction error, and
//! the starred variants normalize by the naive predictor so that
//! naive ≡ 1 by construction. Values can legitimately run negative and are
//! never clamped.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimators::EstimateVector;
use crate::ingest::{PlayerId, SplitTables};
use crate::transform::{stabilize, TransformConfig, TransformedSample};

/// One player's paired first/second-period observation.
#[derive(Debug, Clone)]
pub struct PairedObs {
    pub id: PlayerId,
    pub n1: u32,
    pub x1: f64,
    pub sigma1_sq: f64,
    /// First-period raw average, when counts are available.
    pub r1: Option<f64>,
    pub n2: u32,
    pub x2: f64,
    pub sigma2_sq: f64,
    /// Second-period raw average, when counts are available.
    pub r2: Option<f64>,
}

/// The matched estimation/holdout pairs over the validation intersection.
#[derive(Debug, Clone, Default)]
pub struct ValidationSet {
    pub pairs: Vec<PairedObs>,
}

/// The four break-even statistics and the season-length factor.
#[derive(Debug, Clone, Copy)]
pub struct BreakEven {
    /// Σ 1/(4N₁ᵢ) over the intersection.
    pub sum_inv_4n1: f64,
    /// Σ 1/(4N₂ᵢ) over the intersection.
    pub sum_inv_4n2: f64,
    /// Expected naive prediction error: the sum of the two entries above.
    pub expected_sspe_naive: f64,
    /// Holdout sum of squares about its own mean.
    pub sse_to_mean: f64,
    /// Factor by which first-period attempts must grow before the naive
    /// predictor catches the mean; None when the mean is never overtaken.
    pub c_factor: Option<f64>,
}

impl ValidationSet {
    /// Pair the split's estimation and validation tables on player id.
    pub fn from_split(split: &SplitTables, cfg: &TransformConfig) -> Result<Self> {
        let mut pairs = Vec::with_capacity(split.validation.rows.len());
        for row in &split.validation.rows {
            let est_row = split.estimation.row(&row.id).ok_or_else(|| {
                Error::domain(format!(
                    "validation player '{}' missing from the estimation table",
                    row.id
                ))
            })?;
            let c1 = est_row.counts[0];
            let c2 = row.counts[0];
            pairs.push(PairedObs {
                id: row.id.clone(),
                n1: c1.attempts,
                x1: stabilize(c1.successes, c1.attempts, cfg)?,
                sigma1_sq: 1.0 / (4.0 * c1.attempts as f64),
                r1: c1.rate(),
                n2: c2.attempts,
                x2: stabilize(c2.successes, c2.attempts, cfg)?,
                sigma2_sq: 1.0 / (4.0 * c2.attempts as f64),
                r2: c2.rate(),
            });
        }
        Ok(ValidationSet { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The estimation-side values of the intersection as a sample.
    pub fn first_period_sample(&self) -> TransformedSample {
        let mut s = TransformedSample::default();
        for p in &self.pairs {
            s.push(p.id.clone(), p.x1, p.n1).expect("attempts >= 1");
        }
        s
    }

    fn deltas_for(&self, estimates: &EstimateVector) -> Result<Vec<f64>> {
        let lookup: HashMap<&str, f64> = estimates
            .entries
            .iter()
            .map(|(id, d)| (id.as_str(), *d))
            .collect();
        self.pairs
            .iter()
            .map(|p| {
                lookup.get(p.id.as_str()).copied().ok_or_else(|| {
                    Error::domain(format!(
                        "estimator '{}' has no prediction for holdout player '{}'",
                        estimates.estimator.tag(),
                        p.id
                    ))
                })
            })
            .collect()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::domain("empty estimation/holdout intersection"));
        }
        Ok(())
    }

    /// Sum of squared prediction error Σ (X₂ᵢ − δᵢ)².
    pub fn sspe(&self, estimates: &EstimateVector) -> Result<f64> {
        self.require_nonempty()?;
        let deltas = self.deltas_for(estimates)?;
        Ok(self
            .pairs
            .iter()
            .zip(&deltas)
            .map(|(p, d)| (p.x2 - d).powi(2))
            .sum())
    }

    fn tse_hat_of(&self, deltas: &[f64]) -> f64 {
        let sspe: f64 = self
            .pairs
            .iter()
            .zip(deltas)
            .map(|(p, d)| (p.x2 - d).powi(2))
            .sum();
        let noise: f64 = self.pairs.iter().map(|p| p.sigma2_sq).sum();
        sspe - noise
    }

    fn naive_deltas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.x1).collect()
    }

    /// Estimated total squared error and its naive-normalized variant.
    pub fn tse(&self, estimates: &EstimateVector) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let hat = self.tse_hat_of(&self.deltas_for(estimates)?);
        let naive_hat = self.tse_hat_of(&self.naive_deltas());
        if naive_hat <= 0.0 {
            return Err(Error::numeric(format!(
                "degenerate normalizer: naive estimated squared error is {naive_hat}"
            )));
        }
        Ok((hat, hat / naive_hat))
    }

    /// Attempt-weighted variant with weights N₁ᵢ.
    pub fn twse(&self, estimates: &EstimateVector) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        let weighted_hat = |deltas: &[f64]| -> f64 {
            let sspe: f64 = self
                .pairs
                .iter()
                .zip(deltas)
                .map(|(p, d)| p.n1 as f64 * (p.x2 - d).powi(2))
                .sum();
            let noise: f64 = self
                .pairs
                .iter()
                .map(|p| p.n1 as f64 / (4.0 * p.n2 as f64))
                .sum();
            sspe - noise
        };
        let hat = weighted_hat(&self.deltas_for(estimates)?);
        let naive_hat = weighted_hat(&self.naive_deltas());
        if naive_hat <= 0.0 {
            return Err(Error::numeric(format!(
                "degenerate normalizer: naive weighted estimated squared error is {naive_hat}"
            )));
        }
        Ok((hat, hat / naive_hat))
    }

    fn tse_r_hat(&self, r_tilde: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (p, r) in self.pairs.iter().zip(r_tilde) {
            let r2 = p.r2.ok_or_else(|| {
                Error::domain("raw-scale criterion needs holdout counts, none available")
            })?;
            total += (r2 - r).powi(2) - r2 * (1.0 - r2) / p.n2 as f64;
        }
        Ok(total)
    }

    /// Raw-scale criterion for proportion predictions aligned with `pairs`.
    ///
    /// Normalized by first-period raw averages as the naive predictor.
    pub fn tse_r(&self, r_tilde: &[f64]) -> Result<(f64, f64)> {
        self.require_nonempty()?;
        if r_tilde.len() != self.pairs.len() {
            return Err(Error::domain(format!(
                "expected {} proportion predictions, got {}",
                self.pairs.len(),
                r_tilde.len()
            )));
        }
        if r_tilde.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::domain("proportion predictions must lie in [0, 1]"));
        }
        let hat = self.tse_r_hat(r_tilde)?;
        let naive: Vec<f64> = self
            .pairs
            .iter()
            .map(|p| {
                p.r1.ok_or_else(|| {
                    Error::domain("raw-scale criterion needs first-period counts, none available")
                })
            })
            .collect::<Result<_>>()?;
        let naive_hat = self.tse_r_hat(&naive)?;
        if naive_hat <= 0.0 {
            return Err(Error::numeric(format!(
                "degenerate normalizer: naive raw-scale estimated squared error is {naive_hat}"
            )));
        }
        Ok((hat, hat / naive_hat))
    }

    /// Raw-scale criterion for a transformed-scale estimator via R̃ = sin² δ.
    pub fn tse_r_transformed(&self, estimates: &EstimateVector) -> Result<(f64, f64)> {
        let props: Vec<f64> = self
            .deltas_for(estimates)?
            .into_iter()
            .map(|d| d.sin().powi(2))
            .collect();
        self.tse_r(&props)
    }

    /// The naive-vs-mean break-even statistics over the intersection.
    pub fn break_even(&self) -> Result<BreakEven> {
        self.require_nonempty()?;
        let sum_inv_4n1: f64 = self.pairs.iter().map(|p| p.sigma1_sq).sum();
        let sum_inv_4n2: f64 = self.pairs.iter().map(|p| p.sigma2_sq).sum();
        let mean_x2: f64 =
            self.pairs.iter().map(|p| p.x2).sum::<f64>() / self.pairs.len() as f64;
        let sse_to_mean: f64 = self
            .pairs
            .iter()
            .map(|p| (p.x2 - mean_x2).powi(2))
            .sum();
        let denom = sse_to_mean - sum_inv_4n2;
        Ok(BreakEven {
            sum_inv_4n1,
            sum_inv_4n2,
            expected_sspe_naive: sum_inv_4n1 + sum_inv_4n2,
            sse_to_mean,
            c_factor: (denom > 0.0).then(|| sum_inv_4n1 / denom),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use approx::assert_abs_diff_eq;

    fn pair(id: &str, n1: u32, x1: f64, r1: f64, n2: u32, x2: f64, r2: f64) -> PairedObs {
        PairedObs {
            id: PlayerId::from(id),
            n1,
            x1,
            sigma1_sq: 1.0 / (4.0 * n1 as f64),
            r1: Some(r1),
            n2,
            x2,
            sigma2_sq: 1.0 / (4.0 * n2 as f64),
            r2: Some(r2),
        }
    }

    fn small_set() -> ValidationSet {
        // Differences large enough that the naive normalizer stays positive.
        ValidationSet {
            pairs: vec![
                pair("a", 100, 0.52, 0.25, 120, 0.46, 0.20),
                pair("b", 40, 0.47, 0.21, 60, 0.58, 0.28),
                pair("c", 250, 0.58, 0.30, 200, 0.50, 0.26),
            ],
        }
    }

    fn estimates_of(set: &ValidationSet, kind: EstimatorKind, deltas: &[f64]) -> EstimateVector {
        EstimateVector::new(
            kind,
            set.pairs
                .iter()
                .zip(deltas)
                .map(|(p, d)| (p.id.clone(), *d))
                .collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn perfect_prediction_has_zero_sspe() {
        let set = small_set();
        let x2: Vec<f64> = set.pairs.iter().map(|p| p.x2).collect();
        let v = estimates_of(&set, EstimatorKind::Naive, &x2);
        assert_abs_diff_eq!(set.sspe(&v).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_player_offset_squares() {
        let set = ValidationSet {
            pairs: vec![pair("a", 100, 0.52, 0.25, 120, 0.50, 0.23)],
        };
        let v = estimates_of(&set, EstimatorKind::Naive, &[0.60]);
        assert_abs_diff_eq!(set.sspe(&v).unwrap(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn naive_normalizes_to_one_exactly() {
        let set = small_set();
        let x1: Vec<f64> = set.pairs.iter().map(|p| p.x1).collect();
        let naive = estimates_of(&set, EstimatorKind::Naive, &x1);
        let (_, star) = set.tse(&naive).unwrap();
        assert_eq!(star, 1.0);
        let (_, wstar) = set.twse(&naive).unwrap();
        assert_eq!(wstar, 1.0);
        let r1: Vec<f64> = set.pairs.iter().map(|p| p.r1.unwrap()).collect();
        let (_, rstar) = set.tse_r(&r1).unwrap();
        assert_eq!(rstar, 1.0);
    }

    #[test]
    fn tse_hat_can_be_negative_for_perfect_predictions() {
        let set = small_set();
        let x2: Vec<f64> = set.pairs.iter().map(|p| p.x2).collect();
        let v = estimates_of(&set, EstimatorKind::GrandMean, &x2);
        let (hat, _) = set.tse(&v).unwrap();
        let noise: f64 = set.pairs.iter().map(|p| p.sigma2_sq).sum();
        assert_abs_diff_eq!(hat, -noise, epsilon = 1e-12);
    }

    #[test]
    fn raw_scale_variance_term_sign() {
        let set = small_set();
        let r2: Vec<f64> = set.pairs.iter().map(|p| p.r2.unwrap()).collect();
        let hat = set.tse_r_hat(&r2).unwrap();
        assert!(hat < 0.0, "exact raw predictions must go negative, got {hat}");
    }

    #[test]
    fn equal_weights_make_twse_equal_tse() {
        let mut set = small_set();
        for p in &mut set.pairs {
            p.n1 = 50;
            p.sigma1_sq = 1.0 / 200.0;
        }
        let v = estimates_of(&set, EstimatorKind::GrandMean, &[0.5, 0.5, 0.5]);
        let (_, tse_star) = set.tse(&v).unwrap();
        let (_, twse_star) = set.twse(&v).unwrap();
        assert_abs_diff_eq!(tse_star, twse_star, epsilon = 1e-12);
    }

    #[test]
    fn weighted_hat_is_negative_for_perfect_prediction() {
        let set = small_set();
        let x2: Vec<f64> = set.pairs.iter().map(|p| p.x2).collect();
        let v = estimates_of(&set, EstimatorKind::GrandMean, &x2);
        let (hat, _) = set.twse(&v).unwrap();
        let expected: f64 = set
            .pairs
            .iter()
            .map(|p| p.n1 as f64 / (4.0 * p.n2 as f64))
            .sum();
        assert_abs_diff_eq!(hat, -expected, epsilon = 1e-12);
    }

    #[test]
    fn relabeling_players_does_not_change_scores() {
        let set = small_set();
        let mut reversed = set.clone();
        reversed.pairs.reverse();
        let deltas = [0.5, 0.52, 0.54];
        let v = estimates_of(&set, EstimatorKind::GrandMean, &deltas);
        let mut rev_deltas = deltas;
        rev_deltas.reverse();
        let rv = estimates_of(&reversed, EstimatorKind::GrandMean, &rev_deltas);
        assert_abs_diff_eq!(
            set.tse(&v).unwrap().0,
            reversed.tse(&rv).unwrap().0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn missing_player_is_an_error() {
        let set = small_set();
        let v = EstimateVector::new(
            EstimatorKind::Naive,
            vec![(PlayerId::from("a"), 0.5)],
            vec![],
        )
        .unwrap();
        assert!(set.sspe(&v).is_err());
    }

    #[test]
    fn break_even_arithmetic() {
        // Two players with N₁ = N₂ = 25 give both sums = 2/(4·25) = 0.02.
        let set = ValidationSet {
            pairs: vec![
                pair("a", 25, 0.50, 0.24, 25, 0.52, 0.26),
                pair("b", 25, 0.55, 0.28, 25, 0.49, 0.22),
            ],
        };
        let be = set.break_even().unwrap();
        assert_abs_diff_eq!(be.sum_inv_4n1, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(be.sum_inv_4n2, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(be.expected_sspe_naive, 0.04, epsilon = 1e-15);
        // Holdout values straddle their mean 0.505 by ±0.015.
        assert_abs_diff_eq!(be.sse_to_mean, 2.0 * 0.015f64.powi(2), epsilon = 1e-12);
        // SSE < Σ1/4N₂ here, so the mean is never overtaken.
        assert!(be.c_factor.is_none());
    }

    #[test]
    fn empty_intersection_is_an_error() {
        let set = ValidationSet::default();
        let v = EstimateVector::new(EstimatorKind::Naive, vec![], vec![]).unwrap();
        assert!(set.sspe(&v).is_err());
        assert!(set.break_even().is_err());
    }
}
