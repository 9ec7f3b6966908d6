//! Detector II: relative entropy of a traveler's score distribution against
//! per-category reference distributions, folded into a Bayes risk.
//!
//! Histograms use equal-width bins over `[0, score_max]` with additive
//! smoothing `p_j = (count_j + eps) / (N + n_bins * eps)`, so every bin is
//! strictly positive and the divergence is always finite. Divergences are in
//! bits.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menagerie::{Category, MenagerieAssignment};
use crate::scores::Population;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_EPSILON: f64 = 0.5;
pub const DEFAULT_MIN_SCORES: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum EntropyError {
    #[error("insufficient data: {have} scores, need at least {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("invalid binning: {0}")]
    Binning(String),
    #[error("score {0} outside the histogram range")]
    ScoreOutOfRange(f64),
    #[error("histograms have different bin grids")]
    IncompatibleBins,
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("invalid loss vector: {0}")]
    Loss(String),
    #[error("incomplete assessment: no reference for {}", fmt_categories(.missing))]
    IncompleteReferences { missing: Vec<Category> },
}

fn fmt_categories(cs: &[Category]) -> String {
    cs.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub n_bins: usize,
    pub score_max: f64,
    pub epsilon: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_BINS,
            score_max: crate::scores::DEFAULT_SCORE_MAX,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl Binning {
    pub fn validate(&self) -> Result<(), EntropyError> {
        if self.n_bins < 2 {
            return Err(EntropyError::Binning(format!(
                "need at least 2 bins, got {}",
                self.n_bins
            )));
        }
        if !(self.score_max.is_finite() && self.score_max > 0.0) {
            return Err(EntropyError::Binning(format!(
                "score_max must be positive, got {}",
                self.score_max
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(EntropyError::Binning(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn edges(&self) -> Vec<f64> {
        let width = self.score_max / self.n_bins as f64;
        let mut edges: Vec<f64> = (0..=self.n_bins).map(|j| j as f64 * width).collect();
        edges[self.n_bins] = self.score_max;
        edges
    }

    /// Bin index of `score`; `score_max` itself lands in the last bin.
    fn bin_of(&self, score: f64) -> Result<usize, EntropyError> {
        if !(score.is_finite() && (0.0..=self.score_max).contains(&score)) {
            return Err(EntropyError::ScoreOutOfRange(score));
        }
        let j = (score / self.score_max * self.n_bins as f64).floor() as usize;
        Ok(j.min(self.n_bins - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub bin_edges: Vec<f64>,
    pub p: Vec<f64>,
    /// Raw counts per bin; empty when built from probabilities.
    pub counts: Vec<u64>,
    pub epsilon: f64,
}

impl ScoreHistogram {
    /// Wraps an explicit probability vector over equal-width bins on `[0, score_max]`.
    pub fn from_probabilities(p: Vec<f64>, score_max: f64) -> Result<Self, EntropyError> {
        if p.len() < 2 {
            return Err(EntropyError::Distribution("need at least 2 bins".into()));
        }
        if p.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(EntropyError::Distribution(
                "probabilities must be strictly positive".into(),
            ));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EntropyError::Distribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        let binning = Binning {
            n_bins: p.len(),
            score_max,
            epsilon: 1.0,
        };
        binning.validate()?;
        Ok(Self {
            bin_edges: binning.edges(),
            p,
            counts: Vec::new(),
            epsilon: 0.0,
        })
    }

    fn from_counts(counts: Vec<u64>, binning: &Binning) -> Self {
        let n: u64 = counts.iter().sum();
        let eps = binning.epsilon;
        let denom = n as f64 + binning.n_bins as f64 * eps;
        let p = counts.iter().map(|&c| (c as f64 + eps) / denom).collect();
        Self {
            bin_edges: binning.edges(),
            p,
            counts,
            epsilon: eps,
        }
    }

    /// Smoothed histogram of the union of the members' raw counts.
    ///
    /// Equivalent to the count-weighted average of the members' empirical
    /// distributions, smoothed once.
    pub fn pooled(members: &[&ScoreHistogram], binning: &Binning) -> Result<Self, EntropyError> {
        binning.validate()?;
        let edges = binning.edges();
        let mut counts = vec![0u64; binning.n_bins];
        let mut total = 0u64;
        for m in members {
            if m.bin_edges != edges || m.counts.len() != binning.n_bins {
                return Err(EntropyError::IncompatibleBins);
            }
            for (acc, c) in counts.iter_mut().zip(&m.counts) {
                *acc += c;
                total += c;
            }
        }
        if total == 0 {
            return Err(EntropyError::InsufficientData { have: 0, need: 1 });
        }
        Ok(Self::from_counts(counts, binning))
    }

    pub fn n_bins(&self) -> usize {
        self.p.len()
    }

    pub fn sample_count(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn build_histogram(scores: &[f64], binning: &Binning) -> Result<ScoreHistogram, EntropyError> {
    binning.validate()?;
    if scores.is_empty() {
        return Err(EntropyError::InsufficientData { have: 0, need: 1 });
    }
    let mut counts = vec![0u64; binning.n_bins];
    for &s in scores {
        counts[binning.bin_of(s)?] += 1;
    }
    Ok(ScoreHistogram::from_counts(counts, binning))
}

/// `D(P || Q) = sum_j p_j log2(p_j / q_j)`.
pub fn kl_divergence(p: &ScoreHistogram, q: &ScoreHistogram) -> Result<f64, EntropyError> {
    if p.bin_edges != q.bin_edges || p.p.len() != q.p.len() {
        return Err(EntropyError::IncompatibleBins);
    }
    let d: f64 = p
        .p
        .iter()
        .zip(&q.p)
        .filter(|(&pj, _)| pj > 0.0)
        .map(|(&pj, &qj)| pj * (pj / qj).log2())
        .sum();
    // Rounding can leave a tiny negative residue for nearly equal inputs.
    Ok(d.max(0.0))
}

/// Loss per category, `lambda(kl | w_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossVector {
    pub sheep: f64,
    pub goat: f64,
    pub wolf_lamb: f64,
}

impl Default for LossVector {
    fn default() -> Self {
        Self {
            sheep: 0.1,
            goat: 0.6,
            wolf_lamb: 0.3,
        }
    }
}

impl LossVector {
    pub fn new(sheep: f64, goat: f64, wolf_lamb: f64) -> Result<Self, EntropyError> {
        let loss = Self {
            sheep,
            goat,
            wolf_lamb,
        };
        loss.validate()?;
        Ok(loss)
    }

    pub fn validate(&self) -> Result<(), EntropyError> {
        let all = [self.sheep, self.goat, self.wolf_lamb];
        if all.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
            return Err(EntropyError::Loss("losses must be finite and non-negative".into()));
        }
        if all.iter().all(|&l| l == 0.0) {
            return Err(EntropyError::Loss("at least one loss must be positive".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            sheep: self.sheep * a,
            goat: self.goat * a,
            wolf_lamb: self.wolf_lamb * a,
        }
    }
}

impl FromStr for LossVector {
    type Err = EntropyError;

    /// Parses `sheep,goat,wolf_lamb`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EntropyError::Loss(e.to_string()))?;
        match parts.as_slice() {
            [s, g, wl] => Self::new(*s, *g, *wl),
            _ => Err(EntropyError::Loss(format!(
                "expected 3 comma-separated values, got {}",
                parts.len()
            ))),
        }
    }
}

/// `R(kl|x) = lambda_goat d_goat + lambda_wl d_wl + lambda_sheep d_sheep`.
pub fn traveler_bayes_risk(d_goat: f64, d_wl: f64, d_sheep: f64, loss: &LossVector) -> f64 {
    loss.goat * d_goat + loss.wolf_lamb * d_wl + loss.sheep * d_sheep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreClass {
    Genuine,
    Impostor,
}

impl ScoreClass {
    pub const ALL: [ScoreClass; 2] = [ScoreClass::Genuine, ScoreClass::Impostor];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreClass::Genuine => "genuine",
            ScoreClass::Impostor => "impostor",
        }
    }
}

/// Categories that carry a reference distribution and a loss weight.
pub const REFERENCE_CATEGORIES: [Category; 3] = [Category::Goat, Category::WolfLamb, Category::Sheep];

/// Reference histograms per (category, score class).
///
/// The goat reference pools the goat tail (goats and worms), the wolf/lamb
/// reference pools the wolf/lamb tail (wolves/lambs and worms).
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReference {
    refs: BTreeMap<(Category, ScoreClass), Option<ScoreHistogram>>,
    binning: Binning,
}

impl CategoryReference {
    pub fn get(&self, c: Category, class: ScoreClass) -> Option<&ScoreHistogram> {
        self.refs.get(&(c, class)).and_then(Option::as_ref)
    }

    pub fn binning(&self) -> &Binning {
        &self.binning
    }

    pub fn missing(&self, class: ScoreClass) -> Vec<Category> {
        REFERENCE_CATEGORIES
            .iter()
            .copied()
            .filter(|&c| self.get(c, class).is_none())
            .collect()
    }
}

fn reference_members(assign: &MenagerieAssignment, c: Category) -> Vec<&str> {
    assign
        .iter()
        .filter(|(_, cat)| match c {
            Category::Goat => cat.is_goat_side(),
            Category::WolfLamb => cat.is_wolf_side(),
            other => *cat == other,
        })
        .map(|(id, _)| id)
        .collect()
}

pub fn build_references(
    pop: &Population,
    assign: &MenagerieAssignment,
    binning: &Binning,
) -> Result<CategoryReference, EntropyError> {
    binning.validate()?;
    let mut refs = BTreeMap::new();
    for c in REFERENCE_CATEGORIES {
        let members = reference_members(assign, c);
        for class in ScoreClass::ALL {
            let scores: Vec<f64> = members
                .iter()
                .filter_map(|id| pop.get(id))
                .flat_map(|s| match class {
                    ScoreClass::Genuine => s.genuine.iter(),
                    ScoreClass::Impostor => s.impostor.iter(),
                })
                .copied()
                .collect();
            let hist = if scores.is_empty() {
                None
            } else {
                Some(build_histogram(&scores, binning)?)
            };
            refs.insert((c, class), hist);
        }
    }
    Ok(CategoryReference {
        refs,
        binning: *binning,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlOrientation {
    /// `D(reference || traveler)`.
    #[default]
    RefFirst,
    /// `D(traveler || reference)`.
    TravelerFirst,
}

impl FromStr for KlOrientation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ref-first" => Ok(Self::RefFirst),
            "traveler-first" => Ok(Self::TravelerFirst),
            other => Err(format!(
                "unknown orientation `{other}` (expected ref-first|traveler-first)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskBand {
    Low,
    Medium,
    High,
}

impl RiskBand {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskBand::Low => "low",
            RiskBand::Medium => "medium",
            RiskBand::High => "high",
        }
    }

    /// Band implied by the nearest reference category.
    pub fn for_category(c: Category) -> Self {
        match c {
            Category::Goat | Category::Worm => RiskBand::High,
            Category::WolfLamb => RiskBand::Medium,
            Category::Sheep => RiskBand::Low,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergences {
    pub goat: f64,
    pub wolf_lamb: f64,
    pub sheep: f64,
}

impl Divergences {
    /// Category with the smallest divergence. Ties resolve goat, wolf/lamb, sheep.
    pub fn nearest(&self) -> Category {
        let mut best = (Category::Goat, self.goat);
        for (c, d) in [(Category::WolfLamb, self.wolf_lamb), (Category::Sheep, self.sheep)] {
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelerRisk {
    pub traveler_id: String,
    pub class: ScoreClass,
    pub d: Divergences,
    pub r: f64,
    pub nearest_category: Category,
    pub band: RiskBand,
}

impl TravelerRisk {
    /// Risk from divergences computed elsewhere.
    pub fn from_divergences(
        traveler_id: impl Into<String>,
        class: ScoreClass,
        d: Divergences,
        loss: &LossVector,
    ) -> Result<Self, EntropyError> {
        if [d.goat, d.wolf_lamb, d.sheep]
            .iter()
            .any(|&x| !(x.is_finite() && x >= 0.0))
        {
            return Err(EntropyError::Distribution(
                "divergences must be finite and non-negative".into(),
            ));
        }
        let nearest = d.nearest();
        Ok(Self {
            traveler_id: traveler_id.into(),
            class,
            d,
            r: traveler_bayes_risk(d.goat, d.wolf_lamb, d.sheep, loss),
            nearest_category: nearest,
            band: RiskBand::for_category(nearest),
        })
    }

    pub const CSV_HEADER: &'static str = "traveler_id,class,d_goat,d_wl,d_sheep,r,nearest_category,band";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.traveler_id,
            self.class.as_str(),
            self.d.goat,
            self.d.wolf_lamb,
            self.d.sheep,
            self.r,
            self.nearest_category,
            self.band.as_str()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssessConfig {
    pub loss: LossVector,
    pub orientation: KlOrientation,
    pub min_scores: usize,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            loss: LossVector::default(),
            orientation: KlOrientation::RefFirst,
            min_scores: DEFAULT_MIN_SCORES,
        }
    }
}

pub fn assess_traveler(
    traveler_id: &str,
    scores: &[f64],
    class: ScoreClass,
    refs: &CategoryReference,
    cfg: &AssessConfig,
) -> Result<TravelerRisk, EntropyError> {
    cfg.loss.validate()?;
    if scores.len() < cfg.min_scores.max(1) {
        return Err(EntropyError::InsufficientData {
            have: scores.len(),
            need: cfg.min_scores.max(1),
        });
    }
    let missing = refs.missing(class);
    if !missing.is_empty() {
        return Err(EntropyError::IncompleteReferences { missing });
    }
    let traveler = build_histogram(scores, refs.binning())?;
    let div = |c: Category| -> Result<f64, EntropyError> {
        let reference = refs.get(c, class).expect("checked above");
        match cfg.orientation {
            KlOrientation::RefFirst => kl_divergence(reference, &traveler),
            KlOrientation::TravelerFirst => kl_divergence(&traveler, reference),
        }
    };
    let d = Divergences {
        goat: div(Category::Goat)?,
        wolf_lamb: div(Category::WolfLamb)?,
        sheep: div(Category::Sheep)?,
    };
    TravelerRisk::from_divergences(traveler_id, class, d, &cfg.loss)
}
