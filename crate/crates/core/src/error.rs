use thiserror::Error;

use crate::cost::CostError;
use crate::entropy::EntropyError;
use crate::menagerie::MenagerieError;
use crate::rates::RatesError;
use crate::scores::ScoresError;
use crate::synth::SynthError;

/// Pipeline error, tagged with the stage that produced it.
#[derive(Debug, Error, PartialEq)]
pub enum Error {
    #[error("scores: {0}")]
    Scores(#[from] ScoresError),
    #[error("menagerie: {0}")]
    Menagerie(#[from] MenagerieError),
    #[error("rates: {0}")]
    Rates(#[from] RatesError),
    #[error("cost: {0}")]
    Cost(#[from] CostError),
    #[error("entropy: {0}")]
    Entropy(#[from] EntropyError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("scores: population is empty")]
    EmptyPopulation,
}

impl Error {
    /// True when the error stems from configuration rather than input data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Scores(ScoresError::InvalidScoreMax(_)) => true,
            Error::Scores(_) | Error::EmptyPopulation => false,
            Error::Menagerie(_) => true,
            Error::Rates(RatesError::UnknownSubject(_)) => false,
            Error::Rates(_) => true,
            Error::Cost(_) => true,
            Error::Entropy(
                EntropyError::Binning(_) | EntropyError::Loss(_) | EntropyError::IncompatibleBins,
            ) => true,
            Error::Entropy(_) => false,
            Error::Synth(SynthError::Invalid(_)) => true,
            Error::Synth(SynthError::Scores(_)) => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
