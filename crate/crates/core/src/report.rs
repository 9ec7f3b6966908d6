//! Level-I / Level-II risk reports and the pipelines that fill them.
//!
//! Level I is the watchlist-wide landscape: menagerie summary, per-category
//! error rates and the cost landscape. Level II holds per-traveler entropy
//! assessments. Every report echoes the effective [`AnalysisConfig`] so the
//! same input and config reproduce it byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::{category_costs, CostParams, Landscape};
use crate::entropy::{
    assess_traveler, build_references, AssessConfig, Binning, Divergences, EntropyError,
    KlOrientation, LossVector, ScoreClass, TravelerRisk, REFERENCE_CATEGORIES,
};
use crate::error::{Error, Result};
use crate::menagerie::{categorize, Category, MenagerieAssignment, MenagerieConfig};
use crate::rates::{sweep, CategoryErrorRates, ThresholdGrid};
use crate::scores::{Aggregator, Population};

pub const SCHEMA_VERSION: u32 = 1;

/// Every tunable of the pipeline. Echoed verbatim into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub score_max: f64,
    pub tail_fraction: f64,
    pub aggregator: Aggregator,
    /// Defaults to 10%, 50% and 100% of `score_max`.
    pub thresholds: Option<Vec<f64>>,
    pub c_fn: f64,
    pub c_fp: f64,
    pub p_g: f64,
    /// Category priors; empirical category fractions when unset.
    pub p_cat: Option<BTreeMap<Category, f64>>,
    pub loss: LossVector,
    pub bins: usize,
    pub epsilon: f64,
    pub kl_orientation: KlOrientation,
    pub min_scores: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            score_max: crate::scores::DEFAULT_SCORE_MAX,
            tail_fraction: crate::menagerie::DEFAULT_TAIL_FRACTION,
            aggregator: Aggregator::Mean,
            thresholds: None,
            c_fn: crate::cost::DEFAULT_C_FN,
            c_fp: crate::cost::DEFAULT_C_FP,
            p_g: crate::cost::DEFAULT_P_G,
            p_cat: None,
            loss: LossVector::default(),
            bins: crate::entropy::DEFAULT_BINS,
            epsilon: crate::entropy::DEFAULT_EPSILON,
            kl_orientation: KlOrientation::RefFirst,
            min_scores: crate::entropy::DEFAULT_MIN_SCORES,
        }
    }
}

impl AnalysisConfig {
    pub fn menagerie(&self) -> MenagerieConfig {
        MenagerieConfig {
            tail_fraction: self.tail_fraction,
            aggregator: self.aggregator,
        }
    }

    pub fn grid(&self) -> Result<ThresholdGrid> {
        let ts = self.thresholds.clone().unwrap_or_else(|| {
            [0.1, 0.5, 1.0]
                .iter()
                .map(|f| f * self.score_max)
                .collect()
        });
        Ok(ThresholdGrid::new(ts, self.score_max)?)
    }

    pub fn binning(&self) -> Binning {
        Binning {
            n_bins: self.bins,
            score_max: self.score_max,
            epsilon: self.epsilon,
        }
    }

    pub fn assess(&self) -> AssessConfig {
        AssessConfig {
            loss: self.loss,
            orientation: self.kl_orientation,
            min_scores: self.min_scores,
        }
    }

    /// Cost parameters, with empirical priors from `assign` unless configured.
    pub fn cost_params(&self, assign: &MenagerieAssignment) -> Result<CostParams> {
        let base = CostParams::new(self.c_fn, self.c_fp, self.p_g)?;
        Ok(match &self.p_cat {
            Some(p) => base.with_priors(p.clone())?,
            None => base.with_empirical_priors(assign),
        })
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        crate::scores::Population::empty(self.score_max)?;
        self.menagerie().validate()?;
        self.grid()?;
        let params = CostParams::new(self.c_fn, self.c_fp, self.p_g)?;
        crate::cost::risk_coefficient(&params)?;
        if let Some(p) = &self.p_cat {
            params.with_priors(p.clone())?;
        }
        self.binning().validate()?;
        self.loss.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: "watchrisk".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub sha256: String,
    pub n_records: usize,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenagerieSummary {
    pub n_subjects: usize,
    pub n_eligible: usize,
    /// Subjects lacking genuine or impostor scores.
    pub ineligible: Vec<String>,
    pub tail_count: usize,
    pub counts: BTreeMap<Category, usize>,
    pub members: BTreeMap<Category, Vec<String>>,
    /// P(D_i) used by the cost landscape.
    pub priors: BTreeMap<Category, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub category: String,
    pub threshold: f64,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
    pub false_negatives: u64,
    pub n_genuine: u64,
    pub false_positives: u64,
    pub n_impostor: u64,
}

fn rate_rows(rates: &CategoryErrorRates) -> Vec<RateRow> {
    rates
        .rows()
        .map(|(g, t, c)| RateRow {
            category: g.to_string(),
            threshold: t,
            fnr: c.fnr(),
            fpr: c.fpr(),
            false_negatives: c.false_negatives,
            n_genuine: c.n_genuine,
            false_positives: c.false_positives,
            n_impostor: c.n_impostor,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level1 {
    pub menagerie: MenagerieSummary,
    pub rates: Vec<RateRow>,
    pub landscape: Landscape,
}

/// Full Level-I output, keeping the typed intermediates for side tables.
#[derive(Debug, Clone)]
pub struct LandscapeRun {
    pub assignment: MenagerieAssignment,
    pub rates: CategoryErrorRates,
    pub level1: Level1,
}

pub fn run_landscape(pop: &Population, cfg: &AnalysisConfig) -> Result<LandscapeRun> {
    cfg.validate()?;
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let assignment = categorize(pop, &cfg.menagerie())?;
    let grid = cfg.grid()?;
    let rates = sweep(pop, &assignment, &grid)?;
    let params = cfg.cost_params(&assignment)?;
    let landscape = category_costs(&rates, &params)?;

    let menagerie = MenagerieSummary {
        n_subjects: pop.len(),
        n_eligible: assignment.len(),
        ineligible: pop.ineligible_ids(),
        tail_count: assignment.tail_count(),
        counts: Category::ALL
            .iter()
            .map(|&c| (c, assignment.count(c)))
            .collect(),
        members: Category::ALL
            .iter()
            .map(|&c| {
                (
                    c,
                    assignment.members(c).into_iter().map(String::from).collect(),
                )
            })
            .collect(),
        priors: params.p_cat.clone(),
    };
    let level1 = Level1 {
        menagerie,
        rates: rate_rows(&rates),
        landscape,
    };
    Ok(LandscapeRun {
        assignment,
        rates,
        level1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub traveler_id: String,
    pub class: Option<ScoreClass>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub category: Category,
    pub class: ScoreClass,
    /// Pooled score count, `None` when the reference is unavailable.
    pub n_scores: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level2 {
    pub references: Vec<ReferenceInfo>,
    pub travelers: Vec<TravelerRisk>,
    pub skipped: Vec<Skipped>,
}

impl Level2 {
    pub fn travelers_csv(&self) -> String {
        let mut out = String::from(TravelerRisk::CSV_HEADER);
        out.push('\n');
        for t in &self.travelers {
            out.push_str(&t.csv_row());
            out.push('\n');
        }
        out
    }
}

/// Assesses the requested travelers (all subjects when `None`) in each class.
///
/// Unknown ids, short score lists and missing references become `skipped`
/// entries rather than errors.
pub fn run_assess(
    pop: &Population,
    travelers: Option<&[String]>,
    classes: &[ScoreClass],
    cfg: &AnalysisConfig,
) -> Result<Level2> {
    cfg.validate()?;
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let assignment = categorize(pop, &cfg.menagerie())?;
    let binning = cfg.binning();
    let refs = build_references(pop, &assignment, &binning)?;
    let assess_cfg = cfg.assess();

    let references = REFERENCE_CATEGORIES
        .iter()
        .flat_map(|&category| {
            let refs = &refs;
            classes.iter().map(move |&class| ReferenceInfo {
                category,
                class,
                n_scores: refs.get(category, class).map(|h| h.sample_count()),
            })
        })
        .collect();

    let ids: Vec<String> = match travelers {
        Some(ids) => ids.to_vec(),
        None => pop.subjects().map(|(id, _)| id.to_string()).collect(),
    };

    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for id in ids {
        let Some(subject) = pop.get(&id) else {
            skipped.push(Skipped {
                traveler_id: id,
                class: None,
                reason: "unknown traveler id".into(),
            });
            continue;
        };
        for &class in classes {
            let scores = match class {
                ScoreClass::Genuine => &subject.genuine,
                ScoreClass::Impostor => &subject.impostor,
            };
            match assess_traveler(&id, scores, class, &refs, &assess_cfg) {
                Ok(r) => out.push(r),
                Err(
                    e @ (EntropyError::InsufficientData { .. }
                    | EntropyError::IncompleteReferences { .. }),
                ) => skipped.push(Skipped {
                    traveler_id: id.clone(),
                    class: Some(class),
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(Level2 {
        references,
        travelers: out,
        skipped,
    })
}

/// Level II from externally supplied divergences.
pub fn assess_from_divergences(
    traveler_id: &str,
    class: ScoreClass,
    d: Divergences,
    cfg: &AnalysisConfig,
) -> Result<Level2> {
    cfg.loss.validate()?;
    let risk = TravelerRisk::from_divergences(traveler_id, class, d, &cfg.loss)?;
    Ok(Level2 {
        references: Vec::new(),
        travelers: vec![risk],
        skipped: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    /// Seconds since the Unix epoch; pinned or omitted for reproducible output.
    pub generated_at_unix: Option<u64>,
    pub input: Option<InputInfo>,
    pub config: AnalysisConfig,
    pub level1: Option<Level1>,
    pub level2: Option<Level2>,
}

impl RiskReport {
    pub fn new(config: AnalysisConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: ToolInfo::default(),
            generated_at_unix: None,
            input: None,
            config,
            level1: None,
            level2: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_scales_with_score_max() {
        let cfg = AnalysisConfig::default();
        assert_eq!(cfg.grid().unwrap().thresholds(), &[10.0, 50.0, 100.0]);
        let cfg = AnalysisConfig {
            score_max: 1.0,
            ..AnalysisConfig::default()
        };
        assert_eq!(cfg.grid().unwrap().thresholds(), &[0.1, 0.5, 1.0]);
    }

    #[test]
    fn config_validation_flags_config_errors() {
        let bad = AnalysisConfig {
            tail_fraction: 0.7,
            ..AnalysisConfig::default()
        };
        let e = bad.validate().unwrap_err();
        assert!(e.is_config(), "{e}");
        let bad = AnalysisConfig {
            c_fp: 0.0,
            ..AnalysisConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_config());
        let bad = AnalysisConfig {
            bins: 1,
            ..AnalysisConfig::default()
        };
        assert!(bad.validate().unwrap_err().is_config());
    }

    #[test]
    fn empty_population_is_input_error() {
        let pop = Population::empty(100.0).unwrap();
        let e = run_landscape(&pop, &AnalysisConfig::default()).unwrap_err();
        assert_eq!(e, Error::EmptyPopulation);
        assert!(!e.is_config());
    }

    #[test]
    fn injected_divergences() {
        let l2 = assess_from_divergences(
            "4408",
            ScoreClass::Genuine,
            Divergences {
                goat: 44.6677,
                wolf_lamb: 1.1112,
                sheep: 0.3347,
            },
            &AnalysisConfig::default(),
        )
        .unwrap();
        assert!((l2.travelers[0].r - 27.1675).abs() <= 5e-4);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = AnalysisConfig {
            thresholds: Some(vec![5.0, 25.0]),
            p_cat: Some([(Category::Goat, 0.1)].into_iter().collect()),
            ..AnalysisConfig::default()
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: AnalysisConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
