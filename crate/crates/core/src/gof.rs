//! Tests of the constant-rate independent-binomial assumption per player,
//! with family-wise and false-discovery-rate output, plus the short-segment
//! streakiness scan.
//!
//! On the stabilized scale each qualifying period contributes an
//! (approximately) standard normal deviation, so per-player dispersion across
//! periods is chi-squared with one degree of freedom fewer than the number of
//! qualifying periods.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ingest::{aggregate, PeriodScheme, PeriodTable, PlayerId, PlayerRecord};
use crate::numerics::{chisq_cdf, normal_quantile};
use crate::transform::{stabilize, TransformConfig};

/// Default per-period attempt floor for variance stabilization to hold.
pub const QUALIFYING_ATTEMPTS: u32 = 12;

/// One qualifying period of one player.
#[derive(Debug, Clone, Copy)]
pub struct QualifyingPeriod {
    pub period_index: usize,
    pub attempts: u32,
    pub x: f64,
}

/// Per-player qualifying periods (those meeting the attempt floor).
#[derive(Debug, Clone)]
pub struct MatrixRow {
    pub id: PlayerId,
    pub name: String,
    pub entries: Vec<QualifyingPeriod>,
}

impl MatrixRow {
    /// Number of qualifying periods.
    pub fn m(&self) -> usize {
        self.entries.len()
    }
}

/// Players with at least two qualifying periods, plus drop accounting.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    pub rows: Vec<MatrixRow>,
    /// Players considered before the m ≥ 2 filter.
    pub candidates: usize,
    /// How many periods the source table had.
    pub n_periods: usize,
}

/// Restrict a table to qualifying periods and players with m ≥ 2.
pub fn qualifying_matrix(
    table: &PeriodTable,
    min_attempts: u32,
    cfg: &TransformConfig,
) -> Result<PeriodMatrix> {
    let mut rows = Vec::new();
    let candidates = table.rows.len();
    for row in &table.rows {
        let mut entries = Vec::new();
        for (idx, counts) in row.counts.iter().enumerate() {
            if counts.attempts >= min_attempts {
                entries.push(QualifyingPeriod {
                    period_index: idx,
                    attempts: counts.attempts,
                    x: stabilize(counts.successes, counts.attempts, cfg)?,
                });
            }
        }
        if entries.len() >= 2 {
            rows.push(MatrixRow {
                id: row.id.clone(),
                name: row.name.clone(),
                entries,
            });
        }
    }
    Ok(PeriodMatrix {
        rows,
        candidates,
        n_periods: table.n_periods(),
    })
}

/// Two-period standardized contrasts Z_i = (X₁ᵢ − X₂ᵢ)/√(σ₁ᵢ² + σ₂ᵢ²).
///
/// Requires a matrix built from a two-period table; every retained player
/// qualifies in both periods by construction.
pub fn two_period_z(matrix: &PeriodMatrix) -> Result<Vec<(PlayerId, f64)>> {
    if matrix.n_periods != 2 {
        return Err(Error::domain(format!(
            "two-period contrast needs a 2-period table, got {} periods",
            matrix.n_periods
        )));
    }
    Ok(matrix
        .rows
        .iter()
        .map(|row| {
            let a = &row.entries[0];
            let b = &row.entries[1];
            let se = (1.0 / (4.0 * a.attempts as f64) + 1.0 / (4.0 * b.attempts as f64)).sqrt();
            (row.id.clone(), (a.x - b.x) / se)
        })
        .collect())
}

/// Per-player dispersion statistic and its null CDF position.
#[derive(Debug, Clone)]
pub struct ChisqStat {
    pub id: PlayerId,
    pub name: String,
    /// Qualifying period count.
    pub m: usize,
    /// Z²ᵢ = Σ 4N_ji (X_ji − X̂·ᵢ)² over qualifying periods.
    pub z2: f64,
    /// U_i = chi-squared CDF of Z²ᵢ at m − 1 degrees of freedom.
    pub u: f64,
    /// Φ⁻¹(U_i); ±∞ when U hits 0 or 1 exactly.
    pub phi_inv_u: f64,
}

impl ChisqStat {
    /// One-sided p-value for over-dispersion: P_i = 1 − U_i.
    pub fn p_one_sided(&self) -> f64 {
        1.0 - self.u
    }
}

/// Dispersion of each player's stabilized values about their attempt-weighted
/// mean, referred to the chi-squared null.
pub fn multi_period_chisq(matrix: &PeriodMatrix) -> Vec<ChisqStat> {
    matrix
        .rows
        .iter()
        .map(|row| {
            let total_n: f64 = row.entries.iter().map(|e| e.attempts as f64).sum();
            let center: f64 = row
                .entries
                .iter()
                .map(|e| e.attempts as f64 * e.x)
                .sum::<f64>()
                / total_n;
            let z2: f64 = row
                .entries
                .iter()
                .map(|e| 4.0 * e.attempts as f64 * (e.x - center).powi(2))
                .sum();
            let u = chisq_cdf(z2, (row.m() - 1) as u32);
            let phi_inv_u = if u <= 0.0 {
                f64::NEG_INFINITY
            } else if u >= 1.0 {
                f64::INFINITY
            } else {
                normal_quantile(u).expect("u strictly inside (0,1)")
            };
            ChisqStat {
                id: row.id.clone(),
                name: row.name.clone(),
                m: row.m(),
                z2,
                u,
                phi_inv_u,
            }
        })
        .collect()
}

/// Family-wise p-value for the largest U: P* = 1 − (max U)^P.
pub fn familywise_pstar(us: &[f64]) -> Result<f64> {
    if us.is_empty() {
        return Err(Error::domain("familywise_pstar requires at least one value"));
    }
    if us.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::domain("familywise_pstar requires values in [0, 1]"));
    }
    let max_u = us.iter().copied().fold(0.0f64, f64::max);
    Ok(1.0 - max_u.powi(us.len() as i32))
}

/// Ordered p-values, the step-up threshold index and the discovery set.
#[derive(Debug, Clone)]
pub struct FdrResult {
    pub q_star: f64,
    /// Largest i with P_(i) ≤ (i/m)·q*; 0 when no p-value passes.
    pub k_star: usize,
    /// P-values sorted ascending, ties broken by player id.
    pub ordered: Vec<(PlayerId, f64)>,
    pub discoveries: BTreeSet<PlayerId>,
}

impl FdrResult {
    pub fn n_discoveries(&self) -> usize {
        self.discoveries.len()
    }
}

/// Benjamini–Hochberg step-up procedure at rate `q_star`.
pub fn bh_fdr(p_values: &[(PlayerId, f64)], q_star: f64) -> Result<FdrResult> {
    if !(0.0 < q_star && q_star < 1.0) {
        return Err(Error::domain(format!("q* must lie in (0, 1), got {q_star}")));
    }
    if p_values.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
        return Err(Error::domain("p-values must lie in [0, 1]"));
    }
    let mut ordered: Vec<(PlayerId, f64)> = p_values.to_vec();
    ordered.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .expect("p-values are not NaN")
            .then_with(|| a.0.cmp(&b.0))
    });
    let m = ordered.len() as f64;
    let mut k_star = 0;
    for (i, (_, p)) in ordered.iter().enumerate() {
        if *p <= (i + 1) as f64 / m * q_star {
            k_star = i + 1;
        }
    }
    let discoveries = if k_star == 0 {
        BTreeSet::new()
    } else {
        let threshold = ordered[k_star - 1].1;
        ordered
            .iter()
            .filter(|(_, p)| *p <= threshold)
            .map(|(id, _)| id.clone())
            .collect()
    };
    Ok(FdrResult {
        q_star,
        k_star,
        ordered,
        discoveries,
    })
}

/// Ten-day batting-average series of one discovered player.
#[derive(Debug, Clone)]
pub struct DiscoverySeries {
    pub id: PlayerId,
    pub name: String,
    /// Raw average per segment; None where the player had no attempts.
    pub averages: Vec<Option<f64>>,
}

/// Output of the short-segment streakiness scan.
#[derive(Debug, Clone)]
pub struct ScanOutcome {
    /// Players meeting the season attempt floor.
    pub candidates: usize,
    /// Candidates that also had at least two qualifying segments.
    pub qualifying: usize,
    pub stats: Vec<ChisqStat>,
    pub fdr: FdrResult,
    pub series: Vec<DiscoverySeries>,
}

/// Segment-level scan for within-season rate changes: eligibility, per-player
/// dispersion tests, step-up FDR and per-discovery average series.
pub fn streakiness_scan(
    records: &[PlayerRecord],
    scheme: &PeriodScheme,
    min_season_attempts: u32,
    min_attempts: u32,
    q_star: f64,
    cfg: &TransformConfig,
) -> Result<ScanOutcome> {
    let eligible: Vec<PlayerRecord> = records
        .iter()
        .filter(|r| r.season_attempts() >= min_season_attempts)
        .cloned()
        .collect();
    if eligible.is_empty() {
        return Err(Error::domain(format!(
            "no players reach {min_season_attempts} season attempts"
        )));
    }
    let table = aggregate(&eligible, scheme)?;
    let matrix = qualifying_matrix(&table, min_attempts, cfg)?;
    if matrix.rows.is_empty() {
        return Err(Error::domain(
            "no players with at least two qualifying segments",
        ));
    }
    let stats = multi_period_chisq(&matrix);
    let p_values: Vec<(PlayerId, f64)> = stats
        .iter()
        .map(|s| (s.id.clone(), s.p_one_sided()))
        .collect();
    let fdr = bh_fdr(&p_values, q_star)?;

    let series = table
        .rows
        .iter()
        .filter(|row| fdr.discoveries.contains(&row.id))
        .map(|row| DiscoverySeries {
            id: row.id.clone(),
            name: row.name.clone(),
            averages: row.counts.iter().map(|c| c.rate()).collect(),
        })
        .collect();

    Ok(ScanOutcome {
        candidates: eligible.len(),
        qualifying: matrix.rows.len(),
        stats,
        fdr,
        series,
    })
}
