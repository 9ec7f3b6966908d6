//! Watchlist risk detectors over biometric match-score populations.
//!
//! The pipeline runs in two levels:
//!
//! * **Level I** (risk landscape): [`scores`] ingests match records,
//!   [`menagerie`] assigns Doddington categories, [`rates`] sweeps FNR/FPR
//!   over a threshold grid and [`cost`] turns those rates into per-category
//!   costs and threshold risk.
//! * **Level II** (per traveler): [`entropy`] compares a traveler's score
//!   histogram with category reference histograms and weighs the divergences
//!   into a Bayes risk and a Low/Medium/High band.
//!
//! [`synth`] generates seeded populations with planted categories and
//! [`report`] bundles both levels into a serializable [`RiskReport`].

pub mod cost;
pub mod entropy;
mod error;
pub mod menagerie;
pub mod rates;
pub mod report;
pub mod scores;
pub mod synth;

pub use cost::{CostParams, Landscape, LandscapeEntry};
pub use entropy::{
    Binning, CategoryReference, KlOrientation, LossVector, RiskBand, ScoreClass, ScoreHistogram,
    TravelerRisk,
};
pub use error::{Error, Result};
pub use menagerie::{Category, MenagerieAssignment, MenagerieConfig};
pub use rates::{CategoryErrorRates, RateGroup, ThresholdGrid};
pub use report::{AnalysisConfig, RiskReport};
pub use scores::{Aggregator, MatchRecord, Population};
pub use synth::{SynthOutput, SynthSpec};
