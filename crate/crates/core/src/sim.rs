//! Synthetic split-season data for calibration, power checks and stability
//! studies.
//!
//! Replications are seeded deterministically: the attempt arrays come from
//! stream 0 of the master seed and replication r uses stream r + 1, so any
//! replication can be regenerated independently.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{run_estimator, EstimatorKind, EstimatorSettings};
use crate::ingest::PlayerId;
use crate::report::{Criterion, ScoringContext};
use crate::transform::{stabilize, TransformConfig, TransformedSample};
use crate::validate::{PairedObs, ValidationSet};

/// Where per-period attempt counts come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AttemptSource {
    /// Explicit per-player arrays (for reusing observed attempt patterns).
    Fixed { first: Vec<u32>, second: Vec<u32> },
    /// Rounded, clipped log-normal attempts.
    Synthetic(SyntheticAttempts),
}

/// Log-normal attempt generator with an optional second-period collapse.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SyntheticAttempts {
    pub players: usize,
    /// Mean of log attempts.
    pub log_mean: f64,
    /// Standard deviation of log attempts.
    pub log_sd: f64,
    pub min: u32,
    pub max: u32,
    /// Probability that a player's second-period attempts drop to below the
    /// eligibility floor (injuries, call-downs, September call-up dilution).
    pub dropout: f64,
}

/// Distribution of the latent stabilized means.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ThetaModel {
    Normal {
        mu: f64,
        tau2: f64,
    },
    /// Two normal components (e.g. a weak-hitting subgroup plus the rest).
    TwoGroup {
        weight1: f64,
        mu1: f64,
        tau2_1: f64,
        mu2: f64,
        tau2_2: f64,
    },
    /// Ability tied to playing time: θ = a + b·ln N₁ + ε.
    AttemptCorrelated {
        intercept: f64,
        slope: f64,
        residual_sd: f64,
    },
}

/// How observations are generated around the latent means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// X_ji = θ_i + N(0, 1/(4N_ji)) directly on the stabilized scale.
    Gaussian,
    /// H_ji ~ Bin(N_ji, sin²θ_i), then stabilized.
    Binomial,
}

/// Full description of one simulation study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub attempts: AttemptSource,
    pub theta: ThetaModel,
    pub noise: NoiseModel,
    pub replications: usize,
    pub seed: u64,
    /// Attempt floor for entering the estimation/validation sets.
    pub eligibility_min_attempts: u32,
    pub transform: TransformConfig,
}

impl SimSpec {
    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::domain("simulation needs at least one replication"));
        }
        match &self.attempts {
            AttemptSource::Fixed { first, second } => {
                if first.is_empty() || first.len() != second.len() {
                    return Err(Error::domain(
                        "fixed attempt arrays must be nonempty and equal length",
                    ));
                }
            }
            AttemptSource::Synthetic(s) => {
                if s.players == 0 {
                    return Err(Error::domain("synthetic attempts need players > 0"));
                }
                if s.min == 0 || s.max < s.min {
                    return Err(Error::domain("synthetic attempts need 1 <= min <= max"));
                }
                if !(0.0..1.0).contains(&s.dropout) {
                    return Err(Error::domain("dropout must lie in [0, 1)"));
                }
            }
        }
        if let ThetaModel::TwoGroup { weight1, .. } = self.theta {
            if !(0.0..=1.0).contains(&weight1) {
                return Err(Error::domain("mixture weight must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a hash of the resolved configuration.
    pub fn config_hash(&self) -> String {
        let repr = format!("{self:?}");
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in repr.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{hash:016x}")
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Resolve the per-player attempt arrays (deterministic given the seed).
pub fn attempt_arrays(spec: &SimSpec) -> Result<(Vec<u32>, Vec<u32>)> {
    spec.validate()?;
    match &spec.attempts {
        AttemptSource::Fixed { first, second } => Ok((first.clone(), second.clone())),
        AttemptSource::Synthetic(s) => {
            let mut rng = stream_rng(spec.seed, 0);
            let draw = |rng: &mut ChaCha12Rng| -> u32 {
                let z: f64 = StandardNormal.sample(rng);
                let n = (s.log_mean + s.log_sd * z).exp().round();
                (n as u32).clamp(s.min, s.max)
            };
            let mut first = Vec::with_capacity(s.players);
            let mut second = Vec::with_capacity(s.players);
            for _ in 0..s.players {
                first.push(draw(&mut rng));
                let dropped = rng.gen::<f64>() < s.dropout;
                if dropped {
                    second.push(rng.gen_range(0..s.min.max(1)));
                } else {
                    second.push(draw(&mut rng));
                }
            }
            Ok((first, second))
        }
    }
}

/// One replication: estimation sample over the eligible first-period set and
/// paired holdout rows for players eligible in both periods.
#[derive(Debug, Clone)]
pub struct SimPair {
    pub estimation: TransformedSample,
    pub validation: ValidationSet,
    /// Mean first-period raw average over the estimation set (binomial mode).
    pub estimation_raw_mean: Option<f64>,
}

fn draw_theta(model: &ThetaModel, n1: u32, rng: &mut ChaCha12Rng) -> f64 {
    match model {
        ThetaModel::Normal { mu, tau2 } => {
            let z: f64 = StandardNormal.sample(rng);
            mu + tau2.sqrt() * z
        }
        ThetaModel::TwoGroup {
            weight1,
            mu1,
            tau2_1,
            mu2,
            tau2_2,
        } => {
            let z: f64 = StandardNormal.sample(rng);
            if rng.gen::<f64>() < *weight1 {
                mu1 + tau2_1.sqrt() * z
            } else {
                mu2 + tau2_2.sqrt() * z
            }
        }
        ThetaModel::AttemptCorrelated {
            intercept,
            slope,
            residual_sd,
        } => {
            let z: f64 = StandardNormal.sample(rng);
            intercept + slope * (n1 as f64).ln() + residual_sd * z
        }
    }
}

/// Generate replication `rep` (0-based) of the study.
pub fn simulate_one(spec: &SimSpec, first: &[u32], second: &[u32], rep: usize) -> Result<SimPair> {
    let mut rng = stream_rng(spec.seed, rep as u64 + 1);
    let mut estimation = TransformedSample::default();
    let mut pairs = Vec::new();
    let mut raw_sum = 0.0;
    let mut raw_count = 0usize;

    for (i, (&n1, &n2)) in first.iter().zip(second).enumerate() {
        let theta = draw_theta(&spec.theta, n1, &mut rng);
        // Consume identical RNG positions per player regardless of
        // eligibility so the index set never shifts the draws.
        let (x1, x2, r1, r2) = match spec.noise {
            NoiseModel::Gaussian => {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let x1 = theta + z1 / (4.0 * n1.max(1) as f64).sqrt();
                let x2 = theta + z2 / (4.0 * n2.max(1) as f64).sqrt();
                (x1, x2, None, None)
            }
            NoiseModel::Binomial => {
                let p = theta.sin().powi(2);
                if !(p > 0.0 && p < 1.0) || !(0.0..=crate::transform::HALF_PI).contains(&theta) {
                    return Err(Error::domain(format!(
                        "latent mean {theta} maps outside (0, 1) on the rate scale"
                    )));
                }
                let h1 = Binomial::new(n1.max(1) as u64, p)
                    .map_err(|e| Error::domain(e.to_string()))?
                    .sample(&mut rng) as u32;
                let h2 = Binomial::new(n2.max(1) as u64, p)
                    .map_err(|e| Error::domain(e.to_string()))?
                    .sample(&mut rng) as u32;
                let x1 = stabilize(h1, n1.max(1), &spec.transform)?;
                let x2 = stabilize(h2, n2.max(1), &spec.transform)?;
                (
                    x1,
                    x2,
                    Some(h1 as f64 / n1.max(1) as f64),
                    Some(h2 as f64 / n2.max(1) as f64),
                )
            }
        };

        if n1 < spec.eligibility_min_attempts {
            continue;
        }
        let id = PlayerId(format!("sim{i:05}"));
        estimation.push(id.clone(), x1, n1)?;
        if let Some(r) = r1 {
            raw_sum += r;
            raw_count += 1;
        }
        if n2 >= spec.eligibility_min_attempts {
            pairs.push(PairedObs {
                id,
                n1,
                x1,
                sigma1_sq: 1.0 / (4.0 * n1 as f64),
                r1,
                n2,
                x2,
                sigma2_sq: 1.0 / (4.0 * n2 as f64),
                r2,
            });
        }
    }
    if estimation.is_empty() {
        return Err(Error::domain("no eligible players in this replication"));
    }
    Ok(SimPair {
        estimation,
        validation: ValidationSet { pairs },
        estimation_raw_mean: (raw_count > 0).then(|| raw_sum / raw_count as f64),
    })
}

/// Mean/sd/quantile summary of one scalar across replications.
#[derive(Debug, Clone, Copy)]
pub struct SummaryStats {
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub n: usize,
}

impl SummaryStats {
    fn from_values(values: &[f64]) -> SummaryStats {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite criterion values"));
        let quantile = |q: f64| -> f64 {
            let pos = q * (n as f64 - 1.0);
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        };
        SummaryStats {
            mean,
            sd,
            q05: quantile(0.05),
            q50: quantile(0.50),
            q95: quantile(0.95),
            n,
        }
    }
}

/// Distribution summaries of criteria and their pairwise differences.
#[derive(Debug, Clone)]
pub struct BenchmarkSummary {
    pub config_hash: String,
    pub replications_requested: usize,
    pub replications_used: usize,
    pub failures: usize,
    pub cells: Vec<(EstimatorKind, Criterion, SummaryStats)>,
    /// (a, b, criterion) rows summarize the per-replication value a − b.
    pub pairwise: Vec<(EstimatorKind, EstimatorKind, Criterion, SummaryStats)>,
}

impl BenchmarkSummary {
    pub fn cell(&self, kind: EstimatorKind, criterion: Criterion) -> Option<&SummaryStats> {
        self.cells
            .iter()
            .find(|(k, c, _)| *k == kind && *c == criterion)
            .map(|(_, _, s)| s)
    }

    pub fn pair(
        &self,
        a: EstimatorKind,
        b: EstimatorKind,
        criterion: Criterion,
    ) -> Option<&SummaryStats> {
        self.pairwise
            .iter()
            .find(|(x, y, c, _)| *x == a && *y == b && *c == criterion)
            .map(|(_, _, _, s)| s)
    }

    /// Summary CSV: `config_hash,estimator,criterion,mean,sd,q05,q50,q95,reps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config_hash,estimator,criterion,mean,sd,q05,q50,q95,reps\n");
        let mut write_row = |label: String, criterion: Criterion, s: &SummaryStats| {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
                self.config_hash,
                label,
                criterion.tag(),
                s.mean,
                s.sd,
                s.q05,
                s.q50,
                s.q95,
                s.n
            ));
        };
        for (k, c, s) in &self.cells {
            write_row(k.tag().to_string(), *c, s);
        }
        for (a, b, c, s) in &self.pairwise {
            write_row(format!("{}-{}", a.tag(), b.tag()), *c, s);
        }
        out
    }
}

/// Run the full fit-and-score pipeline over every replication.
///
/// A replication where any estimator fails is excluded and counted.
pub fn benchmark(
    spec: &SimSpec,
    estimators: &[EstimatorKind],
    criteria: &[Criterion],
    settings: &EstimatorSettings,
) -> Result<BenchmarkSummary> {
    spec.validate()?;
    if estimators.is_empty() || criteria.is_empty() {
        return Err(Error::domain("benchmark needs estimators and criteria"));
    }
    if criteria.contains(&Criterion::TseRStar) && spec.noise == NoiseModel::Gaussian {
        return Err(Error::domain(
            "raw-scale criterion requires binomial noise (no counts in gaussian mode)",
        ));
    }
    let (first, second) = attempt_arrays(spec)?;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); estimators.len() * criteria.len()];
    let mut failures = 0usize;
    for rep in 0..spec.replications {
        let pair = match simulate_one(spec, &first, &second, rep) {
            Ok(p) => p,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if pair.validation.is_empty() {
            failures += 1;
            continue;
        }
        let ctx = ScoringContext {
            validation: &pair.validation,
            estimation_raw_mean: pair.estimation_raw_mean,
        };
        let mut rep_values = Vec::with_capacity(values.len());
        let mut failed = false;
        'fit: for kind in estimators {
            match run_estimator(*kind, &pair.estimation, settings) {
                Ok(fitted) => {
                    for criterion in criteria {
                        match ctx.criterion_star(&fitted, *criterion) {
                            Ok(v) => rep_values.push(v),
                            Err(_) => {
                                failed = true;
                                break 'fit;
                            }
                        }
                    }
                }
                Err(_) => {
                    failed = true;
                    break 'fit;
                }
            }
        }
        if failed {
            failures += 1;
            continue;
        }
        for (slot, v) in values.iter_mut().zip(rep_values) {
            slot.push(v);
        }
    }

    let used = values[0].len();
    if used == 0 {
        return Err(Error::numeric(
            "every replication failed; no benchmark summaries available",
        ));
    }

    let mut cells = Vec::new();
    for (ei, kind) in estimators.iter().enumerate() {
        for (ci, criterion) in criteria.iter().enumerate() {
            let slot = &values[ei * criteria.len() + ci];
            cells.push((*kind, *criterion, SummaryStats::from_values(slot)));
        }
    }
    let mut pairwise = Vec::new();
    for (ia, a) in estimators.iter().enumerate() {
        for (ib, b) in estimators.iter().enumerate().skip(ia + 1) {
            for (ci, criterion) in criteria.iter().enumerate() {
                let va = &values[ia * criteria.len() + ci];
                let vb = &values[ib * criteria.len() + ci];
                let diffs: Vec<f64> = va.iter().zip(vb).map(|(x, y)| x - y).collect();
                pairwise.push((*a, *b, *criterion, SummaryStats::from_values(&diffs)));
            }
        }
    }

    Ok(BenchmarkSummary {
        config_hash: spec.config_hash(),
        replications_requested: spec.replications,
        replications_used: used,
        failures,
        cells,
        pairwise,
    })
}

/// Attempt generator approximating a large nonpitcher cohort: the defaults
/// reproduce the observed scale (mean attempts ≈ 158, Σ1/(4N₁) ≈ 1.15 over
/// ~435 validated players out of 486).
pub fn nonpitcher_like_attempts() -> SyntheticAttempts {
    SyntheticAttempts {
        players: 486,
        log_mean: 4.80,
        log_sd: 0.72,
        min: 11,
        max: 620,
        dropout: 0.105,
    }
}
