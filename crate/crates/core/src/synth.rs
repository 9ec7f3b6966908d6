//! Seeded synthetic populations with planted menagerie structure.
//!
//! Each subject draws from a per-subject ChaCha stream: the generator is
//! seeded with `seed` and subject `i` (in id order) reads stream `i`. The
//! planted-class shuffle reads stream `u64::MAX`. Subjects can therefore be
//! generated in any order with identical output.
//!
//! Scores follow normal distributions truncated to `[0, score_max]` by
//! rejection.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::menagerie::{tail_count, Category, MenagerieAssignment};
use crate::scores::{MatchRecord, Population, ScoresError};

const SHUFFLE_STREAM: u64 = u64::MAX;
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scores(#[from] ScoresError),
}

/// Truncated normal on `[0, score_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDist {
    pub center: f64,
    pub spread: f64,
}

impl ScoreDist {
    pub const fn new(center: f64, spread: f64) -> Self {
        Self { center, spread }
    }

    fn validate(&self, score_max: f64, what: &str) -> Result<(), SynthError> {
        if !(self.center.is_finite() && (0.0..=score_max).contains(&self.center)) {
            return Err(SynthError::Invalid(format!(
                "{what}: center {} outside [0, {score_max}]",
                self.center
            )));
        }
        if !(self.spread.is_finite() && self.spread > 0.0) {
            return Err(SynthError::Invalid(format!(
                "{what}: spread must be positive, got {}",
                self.spread
            )));
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R, score_max: f64) -> f64 {
        let normal = Normal::new(self.center, self.spread).expect("validated spread");
        for _ in 0..MAX_REJECTIONS {
            let x = normal.sample(rng);
            if (0.0..=score_max).contains(&x) {
                return x;
            }
        }
        self.center
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub genuine: ScoreDist,
    pub impostor: ScoreDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Profiles {
    pub sheep: ClassProfile,
    pub goat: ClassProfile,
    pub wolf_lamb: ClassProfile,
    pub worm: ClassProfile,
}

impl Profiles {
    /// Goat genuine centers sit `separation` spreads below the sheep genuine
    /// center; wolf/lamb impostor centers sit `separation` spreads above the
    /// sheep impostor center.
    pub fn separated(separation: f64, spread: f64) -> Self {
        let gen_hi = 80.0;
        let imp_lo = 20.0;
        let gen_lo = gen_hi - separation * spread;
        let imp_hi = imp_lo + separation * spread;
        let d = |c| ScoreDist::new(c, spread);
        Self {
            sheep: ClassProfile {
                genuine: d(gen_hi),
                impostor: d(imp_lo),
            },
            goat: ClassProfile {
                genuine: d(gen_lo),
                impostor: d(imp_lo),
            },
            wolf_lamb: ClassProfile {
                genuine: d(gen_hi),
                impostor: d(imp_hi),
            },
            worm: ClassProfile {
                genuine: d(gen_lo),
                impostor: d(imp_hi),
            },
        }
    }

    fn get(&self, c: Category) -> &ClassProfile {
        match c {
            Category::Sheep => &self.sheep,
            Category::Goat => &self.goat,
            Category::WolfLamb => &self.wolf_lamb,
            Category::Worm => &self.worm,
        }
    }
}

impl Default for Profiles {
    fn default() -> Self {
        Self::separated(10.0, 4.0)
    }
}

/// Planted class fractions; the remainder are sheep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fractions {
    pub goat: f64,
    pub wolf_lamb: f64,
    pub worm: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Self {
            goat: 0.025,
            wolf_lamb: 0.025,
            worm: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub n_genuine_per_subject: usize,
    pub n_impostor_per_subject: usize,
    pub seed: u64,
    pub score_max: f64,
    pub profiles: Profiles,
    pub fractions: Fractions,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_subjects: 568,
            n_genuine_per_subject: 5,
            n_impostor_per_subject: 20,
            seed: 0,
            score_max: crate::scores::DEFAULT_SCORE_MAX,
            profiles: Profiles::default(),
            fractions: Fractions::default(),
        }
    }
}

impl SynthSpec {
    /// Planted count of each class, `ceil(fraction * n)` for non-sheep classes.
    pub fn planted_counts(&self) -> BTreeMap<Category, usize> {
        let n = self.n_subjects;
        let goat = tail_count(self.fractions.goat, n);
        let wolf_lamb = tail_count(self.fractions.wolf_lamb, n);
        let worm = tail_count(self.fractions.worm, n);
        let sheep = n.saturating_sub(goat + wolf_lamb + worm);
        [
            (Category::Sheep, sheep),
            (Category::Goat, goat),
            (Category::WolfLamb, wolf_lamb),
            (Category::Worm, worm),
        ]
        .into_iter()
        .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_subjects < 2 {
            return Err(SynthError::Invalid(
                "need at least 2 subjects for impostor comparisons".into(),
            ));
        }
        if !(self.score_max.is_finite() && self.score_max > 0.0) {
            return Err(SynthError::Invalid(format!(
                "score_max must be positive, got {}",
                self.score_max
            )));
        }
        let f = &self.fractions;
        for (name, v) in [("goat", f.goat), ("wolf_lamb", f.wolf_lamb), ("worm", f.worm)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(SynthError::Invalid(format!(
                    "{name} fraction {v} outside [0, 1]"
                )));
            }
        }
        if f.goat + f.wolf_lamb + f.worm > 1.0 + 1e-12 {
            return Err(SynthError::Invalid("fractions sum to more than 1".into()));
        }
        let counts = self.planted_counts();
        let planted: usize = counts
            .iter()
            .filter(|(c, _)| **c != Category::Sheep)
            .map(|(_, n)| n)
            .sum();
        if planted > self.n_subjects {
            return Err(SynthError::Invalid(format!(
                "planted classes need {planted} subjects, only {} available",
                self.n_subjects
            )));
        }
        for c in Category::ALL {
            let p = self.profiles.get(c);
            p.genuine
                .validate(self.score_max, &format!("{c} genuine"))?;
            p.impostor
                .validate(self.score_max, &format!("{c} impostor"))?;
        }
        Ok(())
    }

    pub fn subject_id(i: usize) -> String {
        format!("S{i:05}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<MatchRecord>,
    pub population: Population,
    pub ground_truth: MenagerieAssignment,
}

impl SynthOutput {
    /// Scores CSV in the ingestion format.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("probe_id,gallery_id,score\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.probe_id, r.gallery_id, r.score));
        }
        out
    }

    /// `subject_id,planted_class`.
    pub fn ground_truth_csv(&self) -> String {
        let mut out = String::from("subject_id,planted_class\n");
        for (id, c) in self.ground_truth.iter() {
            out.push_str(&format!("{id},{c}\n"));
        }
        out
    }
}

fn planted_classes(spec: &SynthSpec) -> Vec<Category> {
    let counts = spec.planted_counts();
    let mut classes: Vec<Category> = Category::ALL
        .iter()
        .flat_map(|c| std::iter::repeat_n(*c, counts[c]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(SHUFFLE_STREAM);
    classes.shuffle(&mut rng);
    classes
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    spec.validate()?;
    let n = spec.n_subjects;
    let classes = planted_classes(spec);
    let ids: Vec<String> = (0..n).map(SynthSpec::subject_id).collect();

    let mut records = Vec::with_capacity(n * (spec.n_genuine_per_subject + spec.n_impostor_per_subject));
    for (i, (id, class)) in ids.iter().zip(&classes).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let profile = spec.profiles.get(*class);
        for _ in 0..spec.n_genuine_per_subject {
            let score = profile.genuine.sample(&mut rng, spec.score_max);
            records.push(MatchRecord::new(id.clone(), id.clone(), score)?);
        }
        for _ in 0..spec.n_impostor_per_subject {
            // uniform over the other n - 1 gallery subjects
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let score = profile.impostor.sample(&mut rng, spec.score_max);
            records.push(MatchRecord::new(id.clone(), ids[j].clone(), score)?);
        }
    }

    let population = Population::from_records(records.iter().cloned(), spec.score_max)?;
    let counts = spec.planted_counts();
    let tail = (counts[&Category::Goat] + counts[&Category::Worm])
        .max(counts[&Category::WolfLamb] + counts[&Category::Worm]);
    let ground_truth = MenagerieAssignment::from_categories(
        ids.into_iter().zip(classes).collect(),
        tail,
    );
    Ok(SynthOutput {
        records,
        population,
        ground_truth,
    })
}
