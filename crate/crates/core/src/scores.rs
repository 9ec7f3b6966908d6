//! Match-record ingestion and per-subject score populations.
//!
//! A record is genuine when the probe and gallery identifiers are equal and
//! impostor otherwise. Records are grouped by probe identifier, so a subject's
//! impostor list holds its scores as a probe against every other gallery entry.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound of the matcher score scale.
pub const DEFAULT_SCORE_MAX: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum ScoresError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: score {score} outside [0, {score_max}]")]
    OutOfRange { line: u64, score: f64, score_max: f64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("score_max must be finite and positive, got {0}")]
    InvalidScoreMax(f64),
    #[error("missing or wrong header: expected `probe_id,gallery_id,score`, found `{0}`")]
    Header(String),
    #[error("io: {0}")]
    Io(String),
}

/// One comparison of a probe sample against a gallery entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub probe_id: String,
    pub gallery_id: String,
    pub score: f64,
}

impl MatchRecord {
    pub fn new(
        probe_id: impl Into<String>,
        gallery_id: impl Into<String>,
        score: f64,
    ) -> Result<Self, ScoresError> {
        let record = Self {
            probe_id: probe_id.into(),
            gallery_id: gallery_id.into(),
            score,
        };
        record.validate()?;
        Ok(record)
    }

    fn validate(&self) -> Result<(), ScoresError> {
        if self.probe_id.is_empty() || self.gallery_id.is_empty() {
            return Err(ScoresError::InvalidRecord("empty subject identifier".into()));
        }
        if !self.score.is_finite() || self.score < 0.0 {
            return Err(ScoresError::InvalidRecord(format!(
                "score must be finite and non-negative, got {}",
                self.score
            )));
        }
        Ok(())
    }

    pub fn is_genuine(&self) -> bool {
        self.probe_id == self.gallery_id
    }
}

/// Genuine and impostor scores observed for one subject as probe.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubjectScores {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

impl SubjectScores {
    /// Eligible for menagerie categorization: both score classes present.
    pub fn is_eligible(&self) -> bool {
        !self.genuine.is_empty() && !self.impostor.is_empty()
    }

    pub fn len(&self) -> usize {
        self.genuine.len() + self.impostor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-subject score populations keyed by subject identifier.
///
/// Score lists are kept sorted ascending, which makes a population
/// independent of the order its records arrived in.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    subjects: BTreeMap<String, SubjectScores>,
    score_max: f64,
}

impl Population {
    pub fn empty(score_max: f64) -> Result<Self, ScoresError> {
        if !score_max.is_finite() || score_max <= 0.0 {
            return Err(ScoresError::InvalidScoreMax(score_max));
        }
        Ok(Self {
            subjects: BTreeMap::new(),
            score_max,
        })
    }

    /// Builds a population from already-parsed records.
    ///
    /// Errors carry the 1-based position of the offending record.
    pub fn from_records<I>(records: I, score_max: f64) -> Result<Self, ScoresError>
    where
        I: IntoIterator<Item = MatchRecord>,
    {
        let mut pop = Self::empty(score_max)?;
        for (i, record) in records.into_iter().enumerate() {
            pop.insert(record, i as u64 + 1)?;
        }
        pop.finish();
        Ok(pop)
    }

    /// Reads the `probe_id,gallery_id,score` CSV format.
    ///
    /// Lines starting with `#` are comments. A completely empty input yields
    /// an empty population.
    pub fn from_csv_reader<R: Read>(reader: R, score_max: f64) -> Result<Self, ScoresError> {
        let mut pop = Self::empty(score_max)?;
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let mut saw_header = false;
        let mut row = csv::StringRecord::new();
        loop {
            match rdr.read_record(&mut row) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => {
                    let line = e.position().map(|p| p.line()).unwrap_or(0);
                    return Err(match e.kind() {
                        csv::ErrorKind::Io(io) => ScoresError::Io(io.to_string()),
                        _ => ScoresError::Parse {
                            line,
                            message: e.to_string(),
                        },
                    });
                }
            }
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            if !saw_header {
                let fields: Vec<&str> = row.iter().collect();
                if fields != ["probe_id", "gallery_id", "score"] {
                    return Err(ScoresError::Header(fields.join(",")));
                }
                saw_header = true;
                continue;
            }
            if row.len() != 3 {
                return Err(ScoresError::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", row.len()),
                });
            }
            let score: f64 = row[2].parse().map_err(|_| ScoresError::Parse {
                line,
                message: format!("non-numeric score `{}`", &row[2]),
            })?;
            if row[0].is_empty() || row[1].is_empty() {
                return Err(ScoresError::Parse {
                    line,
                    message: "empty subject identifier".into(),
                });
            }
            let record = MatchRecord {
                probe_id: row[0].to_string(),
                gallery_id: row[1].to_string(),
                score,
            };
            pop.insert(record, line)?;
        }
        pop.finish();
        Ok(pop)
    }

    fn insert(&mut self, record: MatchRecord, line: u64) -> Result<(), ScoresError> {
        if record.probe_id.is_empty() || record.gallery_id.is_empty() {
            return Err(ScoresError::Parse {
                line,
                message: "empty subject identifier".into(),
            });
        }
        if !record.score.is_finite() || record.score < 0.0 || record.score > self.score_max {
            return Err(ScoresError::OutOfRange {
                line,
                score: record.score,
                score_max: self.score_max,
            });
        }
        let genuine = record.is_genuine();
        let entry = self.subjects.entry(record.probe_id).or_default();
        if genuine {
            entry.genuine.push(record.score);
        } else {
            entry.impostor.push(record.score);
        }
        Ok(())
    }

    fn finish(&mut self) {
        for s in self.subjects.values_mut() {
            s.genuine.sort_by(f64::total_cmp);
            s.impostor.sort_by(f64::total_cmp);
        }
    }

    pub fn score_max(&self) -> f64 {
        self.score_max
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SubjectScores> {
        self.subjects.get(id)
    }

    pub fn subjects(&self) -> impl Iterator<Item = (&str, &SubjectScores)> {
        self.subjects.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn eligible(&self) -> impl Iterator<Item = (&str, &SubjectScores)> {
        self.subjects().filter(|(_, s)| s.is_eligible())
    }

    pub fn ineligible_ids(&self) -> Vec<String> {
        self.subjects()
            .filter(|(_, s)| !s.is_eligible())
            .map(|(id, _)| id.to_string())
            .collect()
    }

    pub fn record_count(&self) -> usize {
        self.subjects.values().map(SubjectScores::len).sum()
    }
}

/// Statistic used to reduce a subject's score lists to one number per class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregator {
    #[default]
    Mean,
    /// Minimum genuine score and maximum impostor score.
    Extreme,
}

impl std::str::FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "extreme" | "min-genuine/max-impostor" => Ok(Self::Extreme),
            other => Err(format!("unknown aggregator `{other}` (expected mean|extreme)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectAggregate {
    pub genuine: f64,
    pub impostor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub values: BTreeMap<String, SubjectAggregate>,
    /// Subjects lacking genuine or impostor scores.
    pub skipped: BTreeSet<String>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn subject_aggregates(pop: &Population, aggregator: Aggregator) -> Aggregates {
    let mut values = BTreeMap::new();
    let mut skipped = BTreeSet::new();
    for (id, s) in pop.subjects() {
        if !s.is_eligible() {
            skipped.insert(id.to_string());
            continue;
        }
        let agg = match aggregator {
            Aggregator::Mean => SubjectAggregate {
                genuine: mean(&s.genuine),
                impostor: mean(&s.impostor),
            },
            // lists are sorted ascending
            Aggregator::Extreme => SubjectAggregate {
                genuine: s.genuine[0],
                impostor: s.impostor[s.impostor.len() - 1],
            },
        };
        values.insert(id.to_string(), agg);
    }
    Aggregates { values, skipped }
}
