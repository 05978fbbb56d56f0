//! Loading per-period success/attempt records, aggregating them under a
//! period scheme, and carving eligibility-filtered estimation/validation
//! splits.
//!
//! Input format (UTF-8 CSV, exact header):
//! `player_id,name,is_pitcher,month,ab,h` with `is_pitcher ∈ {0,1}`. For
//! monthly corpora the period column holds months 4–9 (9 = September plus
//! early October); segment-level corpora may use indices 1–18 instead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque player key, unique within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PlayerId {
    fn from(s: &str) -> Self {
        PlayerId(s.to_owned())
    }
}

/// Attempts and successes for one player in one period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub attempts: u32,
    pub successes: u32,
}

impl Counts {
    pub fn new(attempts: u32, successes: u32) -> Result<Self> {
        if successes > attempts {
            return Err(Error::domain(format!(
                "successes {successes} exceed attempts {attempts}"
            )));
        }
        Ok(Counts {
            attempts,
            successes,
        })
    }

    pub fn rate(&self) -> Option<f64> {
        (self.attempts > 0).then(|| self.successes as f64 / self.attempts as f64)
    }
}

/// One player's raw per-period record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerRecord {
    pub id: PlayerId,
    pub name: String,
    pub is_pitcher: bool,
    /// base period id → counts
    pub periods: BTreeMap<u32, Counts>,
}

impl PlayerRecord {
    pub fn season_attempts(&self) -> u32 {
        self.periods.values().map(|c| c.attempts).sum()
    }
}

/// Cohort selector used by splits and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cohort {
    All,
    Nonpitchers,
    Pitchers,
}

impl Cohort {
    pub fn includes(&self, is_pitcher: bool) -> bool {
        match self {
            Cohort::All => true,
            Cohort::Nonpitchers => !is_pitcher,
            Cohort::Pitchers => is_pitcher,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Cohort::All => "all",
            Cohort::Nonpitchers => "nonpitchers",
            Cohort::Pitchers => "pitchers",
        }
    }
}

impl std::str::FromStr for Cohort {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Cohort::All),
            "nonpitchers" => Ok(Cohort::Nonpitchers),
            "pitchers" => Ok(Cohort::Pitchers),
            other => Err(Error::domain(format!("unknown cohort '{other}'"))),
        }
    }
}

const EXPECTED_HEADER: [&str; 6] = ["player_id", "name", "is_pitcher", "month", "ab", "h"];
const MAX_BASE_PERIOD: u32 = 18;

/// Parse a CSV byte stream into per-player records.
///
/// Rows for the same player accumulate; a repeated (player, period) pair or a
/// success count above the attempt count is a domain error naming the player
/// and period.
pub fn load_dataset<R: Read>(source: R) -> Result<Vec<PlayerRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.iter().collect::<Vec<_>>() != EXPECTED_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header '{}', got '{}'",
                EXPECTED_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut players: BTreeMap<PlayerId, PlayerRecord> = BTreeMap::new();
    for row in reader.records() {
        let record = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).ok_or(Error::Parse {
                line,
                message: format!("missing field '{name}'"),
            })
        };
        let parse_u32 = |idx: usize, name: &str| -> Result<u32> {
            field(idx, name)?.parse::<u32>().map_err(|e| Error::Parse {
                line,
                message: format!("field '{name}': {e}"),
            })
        };

        let id = PlayerId(field(0, "player_id")?.to_owned());
        if id.0.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty player_id".into(),
            });
        }
        let name = field(1, "name")?.to_owned();
        let is_pitcher = match field(2, "is_pitcher")? {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("is_pitcher must be 0 or 1, got '{other}'"),
                })
            }
        };
        let period = parse_u32(3, "month")?;
        if period == 0 || period > MAX_BASE_PERIOD {
            return Err(Error::Parse {
                line,
                message: format!("period id {period} outside 1..={MAX_BASE_PERIOD}"),
            });
        }
        let attempts = parse_u32(4, "ab")?;
        let successes = parse_u32(5, "h")?;
        if successes > attempts {
            return Err(Error::domain(format!(
                "player '{id}' period {period}: successes {successes} exceed attempts {attempts}"
            )));
        }

        let entry = players.entry(id.clone()).or_insert_with(|| PlayerRecord {
            id: id.clone(),
            name: name.clone(),
            is_pitcher,
            periods: BTreeMap::new(),
        });
        if entry.is_pitcher != is_pitcher {
            return Err(Error::domain(format!(
                "player '{id}' has conflicting is_pitcher flags"
            )));
        }
        if entry
            .periods
            .insert(period, Counts::new(attempts, successes)?)
            .is_some()
        {
            return Err(Error::domain(format!(
                "duplicate record for player '{id}' period {period}"
            )));
        }
    }
    Ok(players.into_values().collect())
}

/// Named grouping of base periods into analysis periods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodScheme {
    pub name: String,
    /// Ordered (label, base period ids); groups are disjoint and nonempty.
    pub groups: Vec<(String, BTreeSet<u32>)>,
}

impl PeriodScheme {
    pub fn custom(name: &str, groups: Vec<(String, BTreeSet<u32>)>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::domain("period scheme needs at least one group"));
        }
        let mut seen = BTreeSet::new();
        for (label, base) in &groups {
            if base.is_empty() {
                return Err(Error::domain(format!("group '{label}' is empty")));
            }
            for id in base {
                if !seen.insert(*id) {
                    return Err(Error::domain(format!(
                        "base period {id} appears in more than one group"
                    )));
                }
            }
        }
        Ok(PeriodScheme {
            name: name.to_owned(),
            groups,
        })
    }

    /// Identity grouping of the six months.
    pub fn months() -> Self {
        let groups = (4..=9)
            .map(|m| (format!("month{m}"), BTreeSet::from([m])))
            .collect();
        PeriodScheme {
            name: "months".into(),
            groups,
        }
    }

    /// April–June vs July–September/October.
    pub fn halves() -> Self {
        PeriodScheme {
            name: "halves".into(),
            groups: vec![
                ("first_half".into(), BTreeSet::from([4, 5, 6])),
                ("second_half".into(), BTreeSet::from([7, 8, 9])),
            ],
        }
    }

    /// First five months vs the final month.
    pub fn five_one() -> Self {
        PeriodScheme {
            name: "five-one".into(),
            groups: vec![
                ("months4_8".into(), BTreeSet::from([4, 5, 6, 7, 8])),
                ("month9".into(), BTreeSet::from([9])),
            ],
        }
    }

    /// First month vs the rest of the season.
    pub fn month_one() -> Self {
        PeriodScheme {
            name: "month-one".into(),
            groups: vec![
                ("month4".into(), BTreeSet::from([4])),
                ("months5_9".into(), BTreeSet::from([5, 6, 7, 8, 9])),
            ],
        }
    }

    /// Eighteen ten-day segments (segment-level corpora only).
    pub fn ten_day() -> Self {
        let groups = (1..=18)
            .map(|s| (format!("segment{s:02}"), BTreeSet::from([s])))
            .collect();
        PeriodScheme {
            name: "ten-day".into(),
            groups,
        }
    }

    fn referenced(&self) -> BTreeSet<u32> {
        self.groups
            .iter()
            .flat_map(|(_, base)| base.iter().copied())
            .collect()
    }
}

/// Aggregated per-player table: one column per scheme group.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodTable {
    pub period_labels: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub id: PlayerId,
    pub name: String,
    pub is_pitcher: bool,
    /// Indexed like `period_labels`; absent periods carry (0, 0).
    pub counts: Vec<Counts>,
}

impl PeriodTable {
    pub fn n_periods(&self) -> usize {
        self.period_labels.len()
    }

    pub fn row(&self, id: &PlayerId) -> Option<&TableRow> {
        self.rows
            .binary_search_by(|r| r.id.cmp(id))
            .ok()
            .map(|i| &self.rows[i])
    }
}

/// Sum each player's counts over the scheme's base-period groups.
///
/// Every base period referenced by the scheme must occur somewhere in the
/// dataset; otherwise the data lacks the required granularity.
pub fn aggregate(records: &[PlayerRecord], scheme: &PeriodScheme) -> Result<PeriodTable> {
    let observed: BTreeSet<u32> = records
        .iter()
        .flat_map(|r| r.periods.keys().copied())
        .collect();
    let missing: Vec<u32> = scheme
        .referenced()
        .difference(&observed)
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::domain(format!(
            "scheme '{}' references base periods {:?} absent from the dataset",
            scheme.name, missing
        )));
    }

    let mut rows: Vec<TableRow> = records
        .iter()
        .map(|rec| {
            let counts = scheme
                .groups
                .iter()
                .map(|(_, base)| {
                    let mut agg = Counts::default();
                    for id in base {
                        if let Some(c) = rec.periods.get(id) {
                            agg.attempts += c.attempts;
                            agg.successes += c.successes;
                        }
                    }
                    agg
                })
                .collect();
            TableRow {
                id: rec.id.clone(),
                name: rec.name.clone(),
                is_pitcher: rec.is_pitcher,
                counts,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PeriodTable {
        period_labels: scheme.groups.iter().map(|(l, _)| l.clone()).collect(),
        rows,
    })
}

/// Attempt thresholds for inclusion (comparison is ≥ throughout).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityRule {
    /// Minimum attempts in the estimation period.
    pub min_attempts: u32,
    /// Minimum attempts in the validation period.
    pub min_attempts_validation: u32,
    /// Optional minimum attempts summed over all periods of the table.
    pub min_season_attempts: Option<u32>,
}

impl EligibilityRule {
    /// Same threshold for both periods, no season floor.
    pub fn symmetric(threshold: u32) -> Result<Self> {
        Self::new(threshold, threshold, None)
    }

    pub fn new(
        min_attempts: u32,
        min_attempts_validation: u32,
        min_season_attempts: Option<u32>,
    ) -> Result<Self> {
        if min_attempts == 0 || min_attempts_validation == 0 {
            return Err(Error::domain("eligibility thresholds must be positive"));
        }
        Ok(EligibilityRule {
            min_attempts,
            min_attempts_validation,
            min_season_attempts,
        })
    }
}

/// Matched estimation/validation tables for one cohort.
///
/// Every validation player also appears in the estimation table.
#[derive(Debug, Clone)]
pub struct SplitTables {
    pub cohort: Cohort,
    /// Period-1 aggregates over the eligible estimation set.
    pub estimation: PeriodTable,
    /// Period-2 aggregates over players eligible in both periods.
    pub validation: PeriodTable,
}

impl SplitTables {
    pub fn n_estimation(&self) -> usize {
        self.estimation.rows.len()
    }

    pub fn n_validation(&self) -> usize {
        self.validation.rows.len()
    }
}

/// Filter a two-period table into estimation and validation sets.
///
/// Periods 1 and 2 are the table's first two columns.
pub fn build_split(table: &PeriodTable, rule: &EligibilityRule, cohort: Cohort) -> Result<SplitTables> {
    if table.n_periods() < 2 {
        return Err(Error::domain(format!(
            "split needs at least 2 periods, table has {}",
            table.n_periods()
        )));
    }

    let season_ok = |row: &TableRow| match rule.min_season_attempts {
        Some(min) => row.counts.iter().map(|c| c.attempts).sum::<u32>() >= min,
        None => true,
    };

    let single_period = |row: &TableRow, idx: usize| TableRow {
        id: row.id.clone(),
        name: row.name.clone(),
        is_pitcher: row.is_pitcher,
        counts: vec![row.counts[idx]],
    };

    let mut estimation_rows = Vec::new();
    let mut validation_rows = Vec::new();
    for row in &table.rows {
        if !cohort.includes(row.is_pitcher) || !season_ok(row) {
            continue;
        }
        if row.counts[0].attempts >= rule.min_attempts {
            estimation_rows.push(single_period(row, 0));
            if row.counts[1].attempts >= rule.min_attempts_validation {
                validation_rows.push(single_period(row, 1));
            }
        }
    }
    if estimation_rows.is_empty() {
        return Err(Error::domain(format!(
            "estimation set is empty (cohort {}, min attempts {})",
            cohort.label(),
            rule.min_attempts
        )));
    }

    Ok(SplitTables {
        cohort,
        estimation: PeriodTable {
            period_labels: vec![table.period_labels[0].clone()],
            rows: estimation_rows,
        },
        validation: PeriodTable {
            period_labels: vec![table.period_labels[1].clone()],
            rows: validation_rows,
        },
    })
}
