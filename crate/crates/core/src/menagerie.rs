//! Doddington menagerie categorization by tail selection on aggregate scores.
//!
//! The bottom `k` subjects by genuine aggregate form the goat side, the top `k`
//! by impostor aggregate form the wolf/lamb side, and subjects on both sides
//! are worms. Everyone else is a sheep. `k = ceil(tail_fraction * N)` over the
//! eligible subjects, and ties at the cut are broken by ascending subject id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scores::{subject_aggregates, Aggregator, Population};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.025;

// Products like 0.025 * 40 land a hair above the integer; don't let that bump ceil().
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MenagerieError {
    #[error("tail fraction must lie in (0, 0.5), got {0}")]
    TailFraction(f64),
    #[error(
        "too few eligible subjects: {eligible} < {required} required for tail fraction {tail_fraction}"
    )]
    TooFewSubjects {
        eligible: usize,
        required: usize,
        tail_fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Sheep,
    Goat,
    WolfLamb,
    Worm,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::Sheep,
        Category::Goat,
        Category::WolfLamb,
        Category::Worm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Sheep => "sheep",
            Category::Goat => "goat",
            Category::WolfLamb => "wolf_lamb",
            Category::Worm => "worm",
        }
    }

    /// Categories whose members populate the false-negative tail.
    pub fn is_goat_side(self) -> bool {
        matches!(self, Category::Goat | Category::Worm)
    }

    /// Categories whose members populate the false-positive tail.
    pub fn is_wolf_side(self) -> bool {
        matches!(self, Category::WolfLamb | Category::Worm)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sheep" => Ok(Category::Sheep),
            "goat" => Ok(Category::Goat),
            "wolf_lamb" | "wolflamb" | "wl" => Ok(Category::WolfLamb),
            "worm" => Ok(Category::Worm),
            other => Err(format!("unknown category `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenagerieConfig {
    pub tail_fraction: f64,
    pub aggregator: Aggregator,
}

impl Default for MenagerieConfig {
    fn default() -> Self {
        Self {
            tail_fraction: DEFAULT_TAIL_FRACTION,
            aggregator: Aggregator::Mean,
        }
    }
}

impl MenagerieConfig {
    pub fn validate(&self) -> Result<(), MenagerieError> {
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(MenagerieError::TailFraction(self.tail_fraction));
        }
        Ok(())
    }

    /// Tail size for `n` eligible subjects.
    pub fn tail_count(&self, n: usize) -> usize {
        tail_count(self.tail_fraction, n)
    }

    /// Smallest eligible population for which the tail holds a full subject.
    pub fn min_subjects(&self) -> usize {
        (1.0 / self.tail_fraction - CEIL_SLACK).ceil() as usize
    }
}

/// `ceil(fraction * n)`, tolerant of floating-point noise just above an integer.
pub fn tail_count(fraction: f64, n: usize) -> usize {
    let raw = fraction * n as f64;
    (raw - CEIL_SLACK).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenagerieAssignment {
    categories: BTreeMap<String, Category>,
    tail_count: usize,
}

impl MenagerieAssignment {
    /// Builds an assignment directly from a category map, e.g. planted ground truth.
    pub fn from_categories(categories: BTreeMap<String, Category>, tail_count: usize) -> Self {
        Self {
            categories,
            tail_count,
        }
    }

    pub fn tail_count(&self) -> usize {
        self.tail_count
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn category(&self, id: &str) -> Option<Category> {
        self.categories.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Category)> {
        self.categories.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Members of `c`, sorted by subject id.
    pub fn members(&self, c: Category) -> Vec<&str> {
        self.iter()
            .filter(|(_, cat)| *cat == c)
            .map(|(id, _)| id)
            .collect()
    }

    pub fn count(&self, c: Category) -> usize {
        self.categories.values().filter(|v| **v == c).count()
    }

    pub fn goat_side(&self) -> BTreeSet<&str> {
        self.iter()
            .filter(|(_, c)| c.is_goat_side())
            .map(|(id, _)| id)
            .collect()
    }

    pub fn wolf_side(&self) -> BTreeSet<&str> {
        self.iter()
            .filter(|(_, c)| c.is_wolf_side())
            .map(|(id, _)| id)
            .collect()
    }

    /// Empirical membership fraction of each category.
    pub fn fractions(&self) -> BTreeMap<Category, f64> {
        let n = self.len().max(1) as f64;
        Category::ALL
            .iter()
            .map(|&c| (c, self.count(c) as f64 / n))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject_id,category\n");
        for (id, c) in self.iter() {
            out.push_str(id);
            out.push(',');
            out.push_str(c.as_str());
            out.push('\n');
        }
        out
    }

    /// JSON object keyed by subject id.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.categories).expect("string-keyed map serializes")
    }
}

pub fn categorize(
    pop: &Population,
    cfg: &MenagerieConfig,
) -> Result<MenagerieAssignment, MenagerieError> {
    cfg.validate()?;
    let aggs = subject_aggregates(pop, cfg.aggregator);
    let n = aggs.values.len();
    let required = cfg.min_subjects();
    if n < required {
        return Err(MenagerieError::TooFewSubjects {
            eligible: n,
            required,
            tail_fraction: cfg.tail_fraction,
        });
    }
    let k = cfg.tail_count(n);

    let mut by_genuine: Vec<(&str, f64)> = aggs
        .values
        .iter()
        .map(|(id, a)| (id.as_str(), a.genuine))
        .collect();
    by_genuine.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    let mut by_impostor: Vec<(&str, f64)> = aggs
        .values
        .iter()
        .map(|(id, a)| (id.as_str(), a.impostor))
        .collect();
    by_impostor.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(b.0),
        o => o,
    });

    let goat_side: BTreeSet<&str> = by_genuine.iter().take(k).map(|(id, _)| *id).collect();
    let wolf_side: BTreeSet<&str> = by_impostor.iter().take(k).map(|(id, _)| *id).collect();

    let categories = aggs
        .values
        .keys()
        .map(|id| {
            let id = id.as_str();
            let c = match (goat_side.contains(id), wolf_side.contains(id)) {
                (true, true) => Category::Worm,
                (true, false) => Category::Goat,
                (false, true) => Category::WolfLamb,
                (false, false) => Category::Sheep,
            };
            (id.to_string(), c)
        })
        .collect();

    Ok(MenagerieAssignment {
        categories,
        tail_count: k,
    })
}

pub fn category_members(assign: &MenagerieAssignment, c: Category) -> Vec<&str> {
    assign.members(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::MatchRecord;

    fn population(aggs: &[(String, f64, f64)]) -> Population {
        let mut records = Vec::new();
        for (id, g, i) in aggs {
            records.push(MatchRecord::new(id.clone(), id.clone(), *g).unwrap());
            records.push(MatchRecord::new(id.clone(), "gallery", *i).unwrap());
        }
        Population::from_records(records, 100.0).unwrap()
    }

    #[test]
    fn full_scale_quota() {
        assert_eq!(tail_count(0.025, 568), 15);
        assert_eq!(tail_count(0.025, 40), 1);
        assert_eq!(tail_count(0.025, 41), 2);
        let cfg = MenagerieConfig::default();
        assert_eq!(cfg.min_subjects(), 40);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let subjects: Vec<_> = ["d", "b", "a", "c"]
            .iter()
            .map(|s| (s.to_string(), 50.0, 50.0))
            .collect();
        let pop = population(&subjects);
        let cfg = MenagerieConfig {
            tail_fraction: 0.25,
            aggregator: Aggregator::Mean,
        };
        let a = categorize(&pop, &cfg).unwrap();
        assert_eq!(a.tail_count(), 1);
        // "a" is first in both orders, so it is the sole worm.
        assert_eq!(a.members(Category::Worm), vec!["a"]);
        assert_eq!(a.members(Category::Sheep), vec!["b", "c", "d"]);
        assert_eq!(a.goat_side().len(), 1);
        assert_eq!(a.wolf_side().len(), 1);
    }

    #[test]
    fn too_few_subjects_names_minimum() {
        let subjects: Vec<_> = (0..10).map(|i| (format!("s{i}"), 50.0, 10.0)).collect();
        let pop = population(&subjects);
        let err = categorize(&pop, &MenagerieConfig::default()).unwrap_err();
        assert_eq!(
            err,
            MenagerieError::TooFewSubjects {
                eligible: 10,
                required: 40,
                tail_fraction: 0.025
            }
        );
        assert!(err.to_string().contains("40"));
    }

    #[test]
    fn invalid_tail_fraction() {
        for tf in [0.0, 0.5, -0.1, f64::NAN] {
            let cfg = MenagerieConfig {
                tail_fraction: tf,
                aggregator: Aggregator::Mean,
            };
            assert!(matches!(cfg.validate(), Err(MenagerieError::TailFraction(_))));
        }
    }

    #[test]
    fn no_worms_means_empty_worm_list() {
        let mut subjects: Vec<_> = (0..40).map(|i| (format!("s{i:02}"), 80.0, 10.0)).collect();
        subjects[0].1 = 5.0;
        subjects[1].2 = 60.0;
        let a = categorize(&population(&subjects), &MenagerieConfig::default()).unwrap();
        assert!(category_members(&a, Category::Worm).is_empty());
        assert_eq!(category_members(&a, Category::Goat), vec!["s00"]);
        assert_eq!(category_members(&a, Category::WolfLamb), vec!["s01"]);
    }

    #[test]
    fn exports() {
        let mut subjects: Vec<_> = (0..40).map(|i| (format!("s{i:02}"), 80.0, 10.0)).collect();
        subjects[3].1 = 5.0;
        let a = categorize(&population(&subjects), &MenagerieConfig::default()).unwrap();
        let csv = a.to_csv();
        assert!(csv.starts_with("subject_id,category\n"));
        assert!(csv.contains("s03,goat\n"));
        assert_eq!(csv.lines().count(), 41);
        let json = a.to_json();
        assert_eq!(json["s03"], "goat");
        assert_eq!(json["s04"], "sheep");
    }

    #[test]
    fn category_names_round_trip() {
        for c in Category::ALL {
            assert_eq!(c.as_str().parse::<Category>().unwrap(), c);
            assert_eq!(serde_json::to_value(c).unwrap(), c.as_str());
        }
    }
}
