//! Detector I: multiparametric cost assessment over menagerie categories.
//!
//! Produces the Level-I risk landscape. Per category and threshold:
//!
//! ```text
//! cost_g = c_fn * FNR_i(T) * P(G, D_i)      (goat and worm rows)
//! cost_i = c_fp * FPR_i(T) * P(I, D_i)      (wolf/lamb and worm rows)
//! risk   = FNR(T) + [c_fn (1 - p_g)] / [c_fp p_g] * FPR(T)
//! ```
//!
//! The risk coefficient keeps `c_fn` paired with the impostor prior. With
//! `c_fn = 10 c_fp` and `p_g = 0.1` it evaluates to 90.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menagerie::{Category, MenagerieAssignment};
use crate::rates::{fmt_opt, CategoryErrorRates, RateGroup};

pub const DEFAULT_C_FN: f64 = 10.0;
pub const DEFAULT_C_FP: f64 = 1.0;
pub const DEFAULT_P_G: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("costs must be finite and non-negative (c_fn={c_fn}, c_fp={c_fp})")]
    Costs { c_fn: f64, c_fp: f64 },
    #[error("genuine prior must lie in (0, 1), got {0}")]
    GenuinePrior(f64),
    #[error("category prior for {category} must lie in [0, 1], got {value}")]
    CategoryPrior { category: Category, value: f64 },
    #[error("category priors sum to {0} > 1")]
    CategoryPriorSum(f64),
    #[error("risk coefficient undefined: c_fp * p_g is zero")]
    DivisionDomain,
    #[error("no prior configured for category {0}")]
    MissingCategoryPrior(Category),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Genuine,
    Impostor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub c_fn: f64,
    pub c_fp: f64,
    pub p_g: f64,
    /// Prior of category membership, P(D_i).
    pub p_cat: BTreeMap<Category, f64>,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            c_fn: DEFAULT_C_FN,
            c_fp: DEFAULT_C_FP,
            p_g: DEFAULT_P_G,
            p_cat: BTreeMap::new(),
        }
    }
}

impl CostParams {
    pub fn new(c_fn: f64, c_fp: f64, p_g: f64) -> Result<Self, CostError> {
        let params = Self {
            c_fn,
            c_fp,
            p_g,
            p_cat: BTreeMap::new(),
        };
        params.validate()?;
        Ok(params)
    }

    /// Uses the empirical category fractions of `assign` as P(D_i).
    pub fn with_empirical_priors(mut self, assign: &MenagerieAssignment) -> Self {
        self.p_cat = assign.fractions();
        self
    }

    pub fn with_priors(mut self, p_cat: BTreeMap<Category, f64>) -> Result<Self, CostError> {
        self.p_cat = p_cat;
        self.validate()?;
        Ok(self)
    }

    pub fn p_i(&self) -> f64 {
        1.0 - self.p_g
    }

    pub fn validate(&self) -> Result<(), CostError> {
        let ok = |c: f64| c.is_finite() && c >= 0.0;
        if !ok(self.c_fn) || !ok(self.c_fp) {
            return Err(CostError::Costs {
                c_fn: self.c_fn,
                c_fp: self.c_fp,
            });
        }
        if !(self.p_g > 0.0 && self.p_g < 1.0) {
            return Err(CostError::GenuinePrior(self.p_g));
        }
        for (&category, &value) in &self.p_cat {
            if !(0.0..=1.0).contains(&value) {
                return Err(CostError::CategoryPrior { category, value });
            }
        }
        let sum: f64 = self.p_cat.values().sum();
        if sum > 1.0 + 1e-9 {
            return Err(CostError::CategoryPriorSum(sum));
        }
        Ok(())
    }
}

/// Expected overall error rate: `far * p_i + frr * p_g`.
pub fn expected_error(far: f64, frr: f64, params: &CostParams) -> f64 {
    far * params.p_i() + frr * params.p_g
}

/// Expected cost of one match decision.
pub fn expected_cost(fnr: f64, fpr: f64, params: &CostParams) -> f64 {
    params.c_fn * fnr * params.p_g + params.c_fp * fpr * (1.0 - params.p_g)
}

/// The weight on FPR in the threshold risk, `c_fn (1 - p_g) / (c_fp p_g)`.
pub fn risk_coefficient(params: &CostParams) -> Result<f64, CostError> {
    let denom = params.c_fp * params.p_g;
    if denom == 0.0 {
        return Err(CostError::DivisionDomain);
    }
    Ok(params.c_fn * (1.0 - params.p_g) / denom)
}

pub fn risk_at_threshold(fnr_t: f64, fpr_t: f64, params: &CostParams) -> Result<f64, CostError> {
    Ok(fnr_t + risk_coefficient(params)? * fpr_t)
}

/// Joint prior P(G, D_i) or P(I, D_i).
pub fn joint_prior(
    kind: ScoreKind,
    category: Category,
    params: &CostParams,
) -> Result<f64, CostError> {
    let p_cat = params
        .p_cat
        .get(&category)
        .copied()
        .ok_or(CostError::MissingCategoryPrior(category))?;
    Ok(match kind {
        ScoreKind::Genuine => params.p_g * p_cat,
        ScoreKind::Impostor => params.p_i() * p_cat,
    })
}

/// One cell of the risk landscape.
///
/// `cost_g_units_cfn` is the FNR cost expressed in multiples of `c_fn`
/// (likewise `cost_i_units_cfp`), `cost_g`/`cost_i` are absolute. A `None`
/// cost means the underlying rate is undefined for lack of data. Columns not
/// attributed to the category are zero with the matching flag unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeEntry {
    pub category: Category,
    pub threshold: f64,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
    pub cost_g_attributed: bool,
    pub cost_i_attributed: bool,
    pub cost_g_units_cfn: Option<f64>,
    pub cost_i_units_cfp: Option<f64>,
    pub cost_g: Option<f64>,
    pub cost_i: Option<f64>,
    pub risk: Option<f64>,
}

/// Pooled-population summary at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledRisk {
    pub threshold: f64,
    pub fnr: Option<f64>,
    pub fpr: Option<f64>,
    pub expected_error: Option<f64>,
    pub expected_cost: Option<f64>,
    pub risk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    /// FPR weight used in every `risk` value.
    pub risk_coefficient: f64,
    pub entries: Vec<LandscapeEntry>,
    pub pooled: Vec<PooledRisk>,
}

impl Landscape {
    pub fn entries_for(&self, c: Category) -> impl Iterator<Item = &LandscapeEntry> {
        self.entries.iter().filter(move |e| e.category == c)
    }

    /// CSV `category,threshold,cost_g_units_cfn,cost_i_units_cfp,risk`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,threshold,cost_g_units_cfn,cost_i_units_cfp,risk\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.category,
                e.threshold,
                fmt_opt(e.cost_g_units_cfn),
                fmt_opt(e.cost_i_units_cfp),
                fmt_opt(e.risk)
            ));
        }
        out
    }
}

pub fn category_costs(
    rates: &CategoryErrorRates,
    params: &CostParams,
) -> Result<Landscape, CostError> {
    params.validate()?;
    let coefficient = risk_coefficient(params)?;
    let risk = |fnr: Option<f64>, fpr: Option<f64>| match (fnr, fpr) {
        (Some(n), Some(p)) => Some(n + coefficient * p),
        _ => None,
    };

    let mut entries = Vec::new();
    for c in Category::ALL {
        let group = RateGroup::Category(c);
        let p_gd = joint_prior(ScoreKind::Genuine, c, params)?;
        let p_id = joint_prior(ScoreKind::Impostor, c, params)?;
        for (idx, &t) in rates.grid().thresholds().iter().enumerate() {
            let fnr = rates.fnr(group, idx);
            let fpr = rates.fpr(group, idx);
            let (g_units, i_units) = (
                if c.is_goat_side() {
                    fnr.map(|r| r * p_gd)
                } else {
                    Some(0.0)
                },
                if c.is_wolf_side() {
                    fpr.map(|r| r * p_id)
                } else {
                    Some(0.0)
                },
            );
            entries.push(LandscapeEntry {
                category: c,
                threshold: t,
                fnr,
                fpr,
                cost_g_attributed: c.is_goat_side(),
                cost_i_attributed: c.is_wolf_side(),
                cost_g_units_cfn: g_units,
                cost_i_units_cfp: i_units,
                cost_g: g_units.map(|u| u * params.c_fn),
                cost_i: i_units.map(|u| u * params.c_fp),
                risk: risk(fnr, fpr),
            });
        }
    }

    let pooled = rates
        .grid()
        .thresholds()
        .iter()
        .enumerate()
        .map(|(idx, &t)| {
            let fnr = rates.fnr(RateGroup::All, idx);
            let fpr = rates.fpr(RateGroup::All, idx);
            let both = fnr.zip(fpr);
            PooledRisk {
                threshold: t,
                fnr,
                fpr,
                expected_error: both.map(|(n, p)| expected_error(p, n, params)),
                expected_cost: both.map(|(n, p)| expected_cost(n, p, params)),
                risk: risk(fnr, fpr),
            }
        })
        .collect();

    Ok(Landscape {
        risk_coefficient: coefficient,
        entries,
        pooled,
    })
}
