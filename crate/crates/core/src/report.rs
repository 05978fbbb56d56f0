//! Criterion reports for (estimator, split, cohort) cells: assembly, CSV
//! serialization and an aligned text rendering.

use crate::error::{Error, Result};
use crate::estimators::{EstimateVector, EstimatorKind};
use crate::validate::ValidationSet;

/// Which scoring criteria to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    TseStar,
    TseRStar,
    TwseStar,
}

impl Criterion {
    pub fn tag(&self) -> &'static str {
        match self {
            Criterion::TseStar => "tse-star",
            Criterion::TseRStar => "tse-r-star",
            Criterion::TwseStar => "twse-star",
        }
    }

    pub fn all() -> [Criterion; 3] {
        [Criterion::TseStar, Criterion::TseRStar, Criterion::TwseStar]
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::all()
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::domain(format!("unknown criterion '{s}'")))
    }
}

/// Everything needed to score one estimator against the holdout.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a> {
    pub validation: &'a ValidationSet,
    /// Mean of first-period raw averages over the estimation set; drives the
    /// raw-scale prediction of the mean estimator. None when the sample was
    /// generated without counts.
    pub estimation_raw_mean: Option<f64>,
}

impl<'a> ScoringContext<'a> {
    /// Raw-scale criterion, with the naive and mean rows predicted by raw
    /// first-period averages rather than back-transformed values.
    pub fn tse_r(&self, estimates: &EstimateVector) -> Result<(f64, f64)> {
        match estimates.estimator {
            EstimatorKind::Naive => {
                let r1: Vec<f64> = self
                    .validation
                    .pairs
                    .iter()
                    .map(|p| {
                        p.r1.ok_or_else(|| {
                            Error::domain("raw-scale criterion needs first-period counts")
                        })
                    })
                    .collect::<Result<_>>()?;
                self.validation.tse_r(&r1)
            }
            EstimatorKind::GrandMean => {
                let mean = self.estimation_raw_mean.ok_or_else(|| {
                    Error::domain("raw-scale criterion needs the estimation-set raw mean")
                })?;
                let r: Vec<f64> = vec![mean; self.validation.len()];
                self.validation.tse_r(&r)
            }
            _ => self.validation.tse_r_transformed(estimates),
        }
    }

    pub fn criterion_star(&self, estimates: &EstimateVector, criterion: Criterion) -> Result<f64> {
        Ok(match criterion {
            Criterion::TseStar => self.validation.tse(estimates)?.1,
            Criterion::TseRStar => self.tse_r(estimates)?.1,
            Criterion::TwseStar => self.validation.twse(estimates)?.1,
        })
    }
}

/// Scores for one (estimator, split, cohort) cell.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub cohort: String,
    pub split: String,
    pub estimator: EstimatorKind,
    pub n_estimation: usize,
    pub n_validation: usize,
    pub sspe: f64,
    pub tse_hat: f64,
    pub tse_star: f64,
    pub tse_r_star: Option<f64>,
    pub twse_star: Option<f64>,
    /// Thresholds, bandwidths and solver settings that produced the cell.
    pub provenance: Vec<(String, String)>,
}

/// Score a batch of fitted estimators against one holdout.
pub fn build_reports(
    ctx: &ScoringContext,
    cohort: &str,
    split: &str,
    n_estimation: usize,
    fitted: &[EstimateVector],
    criteria: &[Criterion],
    provenance: &[(String, String)],
) -> Result<Vec<CriterionReport>> {
    let mut out = Vec::with_capacity(fitted.len());
    for estimates in fitted {
        let sspe = ctx.validation.sspe(estimates)?;
        let (tse_hat, tse_star) = ctx.validation.tse(estimates)?;
        let tse_r_star = if criteria.contains(&Criterion::TseRStar) {
            Some(ctx.tse_r(estimates)?.1)
        } else {
            None
        };
        let twse_star = if criteria.contains(&Criterion::TwseStar) {
            Some(ctx.validation.twse(estimates)?.1)
        } else {
            None
        };
        let mut provenance = provenance.to_vec();
        for (k, v) in &estimates.params {
            provenance.push((format!("{}.{k}", estimates.estimator.tag()), v.clone()));
        }
        out.push(CriterionReport {
            cohort: cohort.to_owned(),
            split: split.to_owned(),
            estimator: estimates.estimator,
            n_estimation,
            n_validation: ctx.validation.len(),
            sspe,
            tse_hat,
            tse_star,
            tse_r_star,
            twse_star,
            provenance,
        });
    }
    Ok(out)
}

/// Long-form CSV: `cohort,split,estimator,criterion,value,n_est,n_val`.
pub fn reports_to_csv(reports: &[CriterionReport]) -> String {
    let mut out = String::from("cohort,split,estimator,criterion,value,n_est,n_val\n");
    for r in reports {
        let mut push = |criterion: &str, value: f64| {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{}\n",
                r.cohort,
                r.split,
                r.estimator.tag(),
                criterion,
                value,
                r.n_estimation,
                r.n_validation
            ));
        };
        push("sspe", r.sspe);
        push("tse-hat", r.tse_hat);
        push("tse-star", r.tse_star);
        if let Some(v) = r.tse_r_star {
            push("tse-r-star", v);
        }
        if let Some(v) = r.twse_star {
            push("twse-star", v);
        }
    }
    out
}

/// Aligned text table, one row per estimator.
pub fn render_table(title: &str, reports: &[CriterionReport]) -> String {
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    if let Some(first) = reports.first() {
        out.push_str(&format!(
            "P for estimation {}   P for validation {}\n",
            first.n_estimation, first.n_validation
        ));
    }
    let has_r = reports.iter().any(|r| r.tse_r_star.is_some());
    let has_w = reports.iter().any(|r| r.twse_star.is_some());
    out.push_str(&format!("{:<16}{:>10}", "Estimator", "TSE*"));
    if has_r {
        out.push_str(&format!("{:>10}", "TSE_R*"));
    }
    if has_w {
        out.push_str(&format!("{:>10}", "TWSE*"));
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{:<16}{:>10.3}",
            r.estimator.display_name(),
            r.tse_star
        ));
        if has_r {
            match r.tse_r_star {
                Some(v) => out.push_str(&format!("{v:>10.3}")),
                None => out.push_str(&format!("{:>10}", "-")),
            }
        }
        if has_w {
            match r.twse_star {
                Some(v) => out.push_str(&format!("{v:>10.3}")),
                None => out.push_str(&format!("{:>10}", "-")),
            }
        }
        out.push('\n');
    }
    out
}
