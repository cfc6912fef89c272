//! Scoring trained models on held-out data and picking the winner.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::executor::{map_dynamic, predict, TaskFailure, TrainedModel, TrainerRegistry};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("AUC is undefined when only one class is present")]
    SingleClass,
    #[error("label {0} is not 0 or 1")]
    BadLabel(String),
    #[error("score at index {0} is NaN")]
    NanScore(usize),
    #[error("no results to select from")]
    Empty,
    #[error("result for config {config_id} uses metric {found}, expected {expected}")]
    MetricMismatch {
        config_id: usize,
        found: Metric,
        expected: Metric,
    },
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auc,
    Accuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Metric {
    /// Both supported metrics are higher-is-better.
    pub fn direction(self) -> Direction {
        Direction::Maximize
    }

    pub fn compute<T: Scalar>(self, scores: &[T], labels: &[T]) -> Result<f64, MetricError> {
        match self {
            Metric::Auc => auc(scores, labels),
            Metric::Accuracy => accuracy(scores, labels, T::lit(0.5)),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Auc => "auc",
            Metric::Accuracy => "accuracy",
        })
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auc" => Ok(Metric::Auc),
            "accuracy" => Ok(Metric::Accuracy),
            other => Err(MetricError::UnknownMetric(other.to_owned())),
        }
    }
}

fn check_lengths<T>(scores: &[T], labels: &[T]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half.
///
/// Computed from average ranks (Mann-Whitney U) in `O(n log n)`.
pub fn auc<T: Scalar>(scores: &[T], labels: &[T]) -> Result<f64, MetricError> {
    check_lengths(scores, labels)?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(MetricError::NanScore(i));
    }
    let mut positives = 0usize;
    for &y in labels {
        if y == T::one() {
            positives += 1;
        } else if y != T::zero() {
            return Err(MetricError::BadLabel(y.to_string()));
        }
    }
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN rejected above"));
    // Sum of 1-based ranks of positives, ties sharing their average rank.
    // Ranks are integers or half-integers, so this is exact in f64.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] == T::one()).count();
        pos_rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let p = positives as f64;
    let u = pos_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Fraction of rows where `score >= threshold` agrees with the label.
pub fn accuracy<T: Scalar>(scores: &[T], labels: &[T], threshold: T) -> Result<f64, MetricError> {
    check_lengths(scores, labels)?;
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= threshold) == (y == T::one()))
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub config_id: usize,
    pub metric: Metric,
    /// Metric on the validation set; drives selection.
    pub value: f64,
    /// Metric on the test set, when one was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_value: Option<f64>,
    pub train_seconds: f64,
}

/// Scores every model on `ds` using up to `workers` threads. Models whose
/// prediction or metric fails are returned as failures.
pub fn validate_all<T: Scalar>(
    models: &[TrainedModel<T>],
    ds: &Dataset<T>,
    registry: &TrainerRegistry<T>,
    metric: Metric,
    workers: usize,
) -> (Vec<EvaluationResult>, Vec<TaskFailure>) {
    let outcomes = map_dynamic(models, workers, |m, _| {
        let scores = predict(m, ds, registry).map_err(|e| e.to_string())?;
        metric.compute(&scores, ds.labels()).map_err(|e| e.to_string())
    });
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for (m, outcome) in models.iter().zip(outcomes) {
        match outcome {
            Ok(value) => results.push(EvaluationResult {
                config_id: m.config_id,
                metric,
                value,
                test_value: None,
                train_seconds: m.train_seconds,
            }),
            Err(message) => failures.push(TaskFailure {
                config_id: m.config_id,
                algorithm: m.algorithm.clone(),
                message,
            }),
        }
    }
    (results, failures)
}

/// Extremal result in the given direction; equal values resolve to the
/// lowest `config_id`.
pub fn select_best(results: &[EvaluationResult], metric: Metric, direction: Direction) -> Result<usize, MetricError> {
    if let Some(r) = results.iter().find(|r| r.metric != metric) {
        return Err(MetricError::MetricMismatch {
            config_id: r.config_id,
            found: r.metric,
            expected: metric,
        });
    }
    let better = |a: f64, b: f64| match direction {
        Direction::Maximize => a > b,
        Direction::Minimize => a < b,
    };
    results
        .iter()
        .reduce(|best, r| {
            if better(r.value, best.value) || (r.value == best.value && r.config_id < best.config_id) {
                r
            } else {
                best
            }
        })
        .map(|r| r.config_id)
        .ok_or(MetricError::Empty)
}
