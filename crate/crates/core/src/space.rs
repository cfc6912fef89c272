//! Search-space declaration and exhaustive grid enumeration.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("search space declares no grids")]
    NoGrids,
    #[error("grid `{algorithm}`: parameter `{param}` has an empty value list")]
    EmptyValues { algorithm: String, param: String },
    #[error("grid `{algorithm}`: parameter `{param}` declared twice")]
    DuplicateParam { algorithm: String, param: String },
    #[error("grid `{algorithm}`: parameter `{param}` lists value {value} more than once")]
    DuplicateValue {
        algorithm: String,
        param: String,
        value: String,
    },
    #[error("configuration {0} is produced by more than one grid")]
    DuplicateConfig(String),
    #[error("random range `{name}`: {reason}")]
    InvalidRange { name: String, reason: String },
    #[error("requested {0} random configurations, need at least one")]
    ZeroCount(usize),
}

/// A single hyperparameter value.
///
/// Serialized untagged: JSON integers become `Int`, other numbers `Real`,
/// strings `Str`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Str(String),
}

impl ParamValue {
    fn rank(&self) -> u8 {
        match self {
            ParamValue::Int(_) => 0,
            ParamValue::Real(_) => 1,
            ParamValue::Str(_) => 2,
        }
    }

    /// Numeric view; integers widen to reals.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Real(r) => Some(r),
            ParamValue::Str(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            ParamValue::Int(i) => Some(i),
            ParamValue::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Some(r as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl PartialEq for ParamValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ParamValue {}

impl PartialOrd for ParamValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Values of different variants order by variant (`Int < Real < Str`);
/// reals use IEEE total order.
impl Ord for ParamValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ParamValue::Int(a), ParamValue::Int(b)) => a.cmp(b),
            (ParamValue::Real(a), ParamValue::Real(b)) => a.total_cmp(b),
            (ParamValue::Str(a), ParamValue::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl std::hash::Hash for ParamValue {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            ParamValue::Int(i) => i.hash(state),
            ParamValue::Real(r) => r.to_bits().hash(state),
            ParamValue::Str(s) => s.hash(state),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r:?}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_owned())
    }
}

/// One algorithm's hyperparameter grid. Parameter order is significant:
/// the last declared parameter varies fastest during enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub algorithm: String,
    pub params: IndexMap<String, Vec<ParamValue>>,
}

impl GridSpec {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            params: IndexMap::new(),
        }
    }

    /// Builder-style parameter declaration.
    pub fn add_grid<V: Into<ParamValue>>(
        mut self,
        name: impl Into<String>,
        values: impl IntoIterator<Item = V>,
    ) -> Result<Self, SpaceError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(SpaceError::DuplicateParam {
                algorithm: self.algorithm,
                param: name,
            });
        }
        let values = values.into_iter().map(Into::into).collect();
        self.params.insert(name, values);
        Ok(self)
    }

    /// Number of points in this grid's Cartesian product.
    pub fn size(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        for (name, values) in &self.params {
            if values.is_empty() {
                return Err(SpaceError::EmptyValues {
                    algorithm: self.algorithm.clone(),
                    param: name.clone(),
                });
            }
            let mut seen = HashSet::new();
            for v in values {
                if !seen.insert(v) {
                    return Err(SpaceError::DuplicateValue {
                        algorithm: self.algorithm.clone(),
                        param: name.clone(),
                        value: v.to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub grids: Vec<GridSpec>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_space(mut self, grid: GridSpec) -> Self {
        self.grids.push(grid);
        self
    }

    pub fn size(&self) -> usize {
        self.grids.iter().map(GridSpec::size).sum()
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.grids.is_empty() {
            return Err(SpaceError::NoGrids);
        }
        self.grids.iter().try_for_each(GridSpec::validate)
    }
}

/// A concrete point of the search: one algorithm with one value per
/// hyperparameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub config_id: usize,
    pub algorithm: String,
    pub params: IndexMap<String, ParamValue>,
}

impl ModelConfig {
    pub fn param(&self, name: &str) -> Option<&ParamValue> {
        self.params.get(name)
    }

    /// Canonical `(algorithm, sorted params)` key used for uniqueness checks.
    pub fn identity(&self) -> (String, Vec<(String, ParamValue)>) {
        let mut params: Vec<_> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        params.sort();
        (self.algorithm.clone(), params)
    }
}

impl fmt::Display for ModelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{} {}(", self.config_id, self.algorithm)?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Expands every grid into its Cartesian product, grid by grid in
/// declaration order, assigning `config_id`s from zero.
pub fn grid_enumerate(space: &SearchSpace) -> Result<Vec<ModelConfig>, SpaceError> {
    space.validate()?;
    let mut out = Vec::with_capacity(space.size());
    let mut seen = HashSet::with_capacity(space.size());
    for grid in &space.grids {
        let names: Vec<&String> = grid.params.keys().collect();
        let lists: Vec<&Vec<ParamValue>> = grid.params.values().collect();
        // odometer over value indices; the last position turns fastest
        let mut idx = vec![0usize; lists.len()];
        loop {
            let params = names
                .iter()
                .zip(&lists)
                .zip(&idx)
                .map(|((n, l), &i)| ((*n).clone(), l[i].clone()))
                .collect();
            let config = ModelConfig {
                config_id: out.len(),
                algorithm: grid.algorithm.clone(),
                params,
            };
            if !seen.insert(config.identity()) {
                return Err(SpaceError::DuplicateConfig(config.to_string()));
            }
            out.push(config);

            let mut pos = lists.len();
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < lists[pos].len() {
                    break;
                }
                idx[pos] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    Ok(out)
}
