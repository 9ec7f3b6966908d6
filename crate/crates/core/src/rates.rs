//! Empirical FNR/FPR per menagerie category over a threshold grid.
//!
//! A comparison is a match when `score >= threshold`. Rates are counted over
//! individual scores, and a category with no scores of a class reports an
//! undefined rate rather than zero.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menagerie::{Category, MenagerieAssignment};
use crate::scores::Population;

#[derive(Debug, Error, PartialEq)]
pub enum RatesError {
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("thresholds must be strictly increasing (position {0})")]
    NotIncreasing(usize),
    #[error("threshold {value} outside [0, {score_max}]")]
    OutOfRange { value: f64, score_max: f64 },
    #[error("subject `{0}` is categorized but absent from the population")]
    UnknownSubject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Match,
    NonMatch,
}

pub fn decide(score: f64, threshold: f64) -> Decision {
    if score >= threshold {
        Decision::Match
    } else {
        Decision::NonMatch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    thresholds: Vec<f64>,
}

impl ThresholdGrid {
    pub fn new(thresholds: Vec<f64>, score_max: f64) -> Result<Self, RatesError> {
        if thresholds.is_empty() {
            return Err(RatesError::EmptyGrid);
        }
        for &t in &thresholds {
            if !(t.is_finite() && (0.0..=score_max).contains(&t)) {
                return Err(RatesError::OutOfRange {
                    value: t,
                    score_max,
                });
            }
        }
        if let Some(pos) = thresholds.windows(2).position(|w| w[0] >= w[1]) {
            return Err(RatesError::NotIncreasing(pos + 1));
        }
        Ok(Self { thresholds })
    }

    /// `n` evenly spaced thresholds from 0 to `score_max` inclusive.
    pub fn uniform(n: usize, score_max: f64) -> Result<Self, RatesError> {
        match n {
            0 => Err(RatesError::EmptyGrid),
            1 => Self::new(vec![0.0], score_max),
            _ => {
                let step = score_max / (n - 1) as f64;
                let mut ts: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
                ts[n - 1] = score_max;
                Self::new(ts, score_max)
            }
        }
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// A menagerie category or the pooled population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateGroup {
    Category(Category),
    All,
}

impl RateGroup {
    pub const ALL: [RateGroup; 5] = [
        RateGroup::Category(Category::Sheep),
        RateGroup::Category(Category::Goat),
        RateGroup::Category(Category::WolfLamb),
        RateGroup::Category(Category::Worm),
        RateGroup::All,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RateGroup::Category(c) => c.as_str(),
            RateGroup::All => "all",
        }
    }
}

impl fmt::Display for RateGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error counts for one group at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    /// Genuine scores below the threshold.
    pub false_negatives: u64,
    pub n_genuine: u64,
    /// Impostor scores at or above the threshold.
    pub false_positives: u64,
    pub n_impostor: u64,
}

impl ErrorCounts {
    pub fn fnr(&self) -> Option<f64> {
        (self.n_genuine > 0).then(|| self.false_negatives as f64 / self.n_genuine as f64)
    }

    pub fn fpr(&self) -> Option<f64> {
        (self.n_impostor > 0).then(|| self.false_positives as f64 / self.n_impostor as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryErrorRates {
    grid: ThresholdGrid,
    /// Indexed by group, then by threshold position in the grid.
    counts: BTreeMap<RateGroup, Vec<ErrorCounts>>,
}

impl CategoryErrorRates {
    pub fn grid(&self) -> &ThresholdGrid {
        &self.grid
    }

    pub fn counts(&self, group: RateGroup) -> &[ErrorCounts] {
        self.counts.get(&group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn fnr(&self, group: RateGroup, idx: usize) -> Option<f64> {
        self.counts(group).get(idx).and_then(ErrorCounts::fnr)
    }

    pub fn fpr(&self, group: RateGroup, idx: usize) -> Option<f64> {
        self.counts(group).get(idx).and_then(ErrorCounts::fpr)
    }

    /// Long-form rows: `(group, threshold, counts)`.
    pub fn rows(&self) -> impl Iterator<Item = (RateGroup, f64, &ErrorCounts)> {
        self.counts.iter().flat_map(move |(g, v)| {
            v.iter()
                .zip(self.grid.thresholds())
                .map(move |(c, t)| (*g, *t, c))
        })
    }

    /// CSV `category,threshold,fnr,fpr,n_genuine,n_impostor`; undefined rates are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,threshold,fnr,fpr,n_genuine,n_impostor\n");
        for (g, t, c) in self.rows() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                g,
                t,
                fmt_opt(c.fnr()),
                fmt_opt(c.fpr()),
                c.n_genuine,
                c.n_impostor
            ));
        }
        out
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Default)]
struct Pooled {
    genuine: Vec<f64>,
    impostor: Vec<f64>,
}

/// Number of sorted `scores` strictly below `t`.
fn count_below(sorted: &[f64], t: f64) -> u64 {
    sorted.partition_point(|&s| s < t) as u64
}

pub fn sweep(
    pop: &Population,
    assign: &MenagerieAssignment,
    grid: &ThresholdGrid,
) -> Result<CategoryErrorRates, RatesError> {
    let mut pools: BTreeMap<RateGroup, Pooled> =
        RateGroup::ALL.iter().map(|g| (*g, Pooled::default())).collect();
    for (id, cat) in assign.iter() {
        let s = pop
            .get(id)
            .ok_or_else(|| RatesError::UnknownSubject(id.to_string()))?;
        for g in [RateGroup::Category(cat), RateGroup::All] {
            let pool = pools.get_mut(&g).expect("all groups present");
            pool.genuine.extend_from_slice(&s.genuine);
            pool.impostor.extend_from_slice(&s.impostor);
        }
    }

    let counts = pools
        .into_iter()
        .map(|(g, mut pool)| {
            pool.genuine.sort_by(f64::total_cmp);
            pool.impostor.sort_by(f64::total_cmp);
            let n_genuine = pool.genuine.len() as u64;
            let n_impostor = pool.impostor.len() as u64;
            let per_t = grid
                .thresholds()
                .iter()
                .map(|&t| ErrorCounts {
                    false_negatives: count_below(&pool.genuine, t),
                    n_genuine,
                    false_positives: n_impostor - count_below(&pool.impostor, t),
                    n_impostor,
                })
                .collect();
            (g, per_t)
        })
        .collect();

    Ok(CategoryErrorRates {
        grid: grid.clone(),
        counts,
    })
}
