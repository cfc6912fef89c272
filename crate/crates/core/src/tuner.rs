//! Hyperparameter tuners: turn a search-space declaration into the batch of
//! configurations the driver trains.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluator::EvaluationResult;
use crate::space::{grid_enumerate, ModelConfig, ParamValue, SearchSpace, SpaceError};

/// Source of configurations for a search.
///
/// Static tuners produce everything from `propose` and ignore `observe`.
/// An adaptive tuner would use the feedback to shape its next proposal.
pub trait Tuner {
    fn propose(&mut self) -> Result<Vec<ModelConfig>, SpaceError>;

    fn observe(&mut self, _results: &[EvaluationResult]) {}
}

/// Exhaustive grid search.
#[derive(Debug, Clone)]
pub struct GridTuner {
    space: SearchSpace,
}

impl GridTuner {
    pub fn new(space: SearchSpace) -> Self {
        Self { space }
    }
}

impl Tuner for GridTuner {
    fn propose(&mut self) -> Result<Vec<ModelConfig>, SpaceError> {
        tune_grid(&self.space)
    }
}

pub fn tune_grid(space: &SearchSpace) -> Result<Vec<ModelConfig>, SpaceError> {
    grid_enumerate(space)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RangeKind {
    /// Uniform real in `[low, high)`.
    RealUniform { low: f64, high: f64 },
    /// Uniform integer in `[low, high]`.
    IntUniform { low: i64, high: i64 },
    Choice { values: Vec<ParamValue> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomRange {
    pub name: String,
    #[serde(flatten)]
    pub kind: RangeKind,
}

impl RandomRange {
    pub fn real(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self {
            name: name.into(),
            kind: RangeKind::RealUniform { low, high },
        }
    }

    pub fn int(name: impl Into<String>, low: i64, high: i64) -> Self {
        Self {
            name: name.into(),
            kind: RangeKind::IntUniform { low, high },
        }
    }

    pub fn choice(name: impl Into<String>, values: Vec<ParamValue>) -> Self {
        Self {
            name: name.into(),
            kind: RangeKind::Choice { values },
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let bad = |reason: &str| {
            Err(SpaceError::InvalidRange {
                name: self.name.clone(),
                reason: reason.to_owned(),
            })
        };
        match &self.kind {
            RangeKind::RealUniform { low, high } => {
                if !(low.is_finite() && high.is_finite()) {
                    return bad("bounds must be finite");
                }
                if low >= high {
                    return bad("lower bound must be below upper bound");
                }
            }
            RangeKind::IntUniform { low, high } if low >= high => {
                return bad("lower bound must be below upper bound")
            }
            RangeKind::Choice { values } if values.is_empty() => return bad("empty choice list"),
            _ => {}
        }
        Ok(())
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> ParamValue {
        match &self.kind {
            RangeKind::RealUniform { low, high } => ParamValue::Real(rng.random_range(*low..*high)),
            RangeKind::IntUniform { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
            RangeKind::Choice { values } => values[rng.random_range(0..values.len())].clone(),
        }
    }
}

/// Random search over independent per-parameter ranges.
#[derive(Debug, Clone)]
pub struct RandomTuner {
    pub algorithm: String,
    pub ranges: Vec<RandomRange>,
    pub n: usize,
    pub seed: u64,
}

impl Tuner for RandomTuner {
    fn propose(&mut self) -> Result<Vec<ModelConfig>, SpaceError> {
        tune_random(&self.algorithm, &self.ranges, self.n, self.seed)
    }
}

/// Draws `n` configurations, each parameter independently from its range.
/// The same seed always yields the same configurations.
pub fn tune_random(
    algorithm: &str,
    ranges: &[RandomRange],
    n: usize,
    seed: u64,
) -> Result<Vec<ModelConfig>, SpaceError> {
    if n == 0 {
        return Err(SpaceError::ZeroCount(n));
    }
    ranges.iter().try_for_each(RandomRange::validate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|config_id| {
            let params: IndexMap<_, _> = ranges
                .iter()
                .map(|r| (r.name.clone(), r.draw(&mut rng)))
                .collect();
            ModelConfig {
                config_id,
                algorithm: algorithm.to_owned(),
                params,
            }
        })
        .collect())
}
