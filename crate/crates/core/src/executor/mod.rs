//! Worker pool and trainer registry.
//!
//! A worker is an in-process execution slot. Workers run concurrently, each
//! processing its own task list in order; the dataset is shared read-only.

mod logistic;
mod params;
mod synthetic;
mod tree;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::plugin::{PluginError, PluginModelRef};
use crate::scalar::Scalar;
use crate::scheduler::Schedule;
use crate::space::ModelConfig;

pub use logistic::{logistic_gradient, logistic_loss, LogisticModel, LogisticTrainer};
pub(crate) use params::Params;
pub use synthetic::{SyntheticModel, SyntheticTrainer};
pub use tree::{grow_tree, DecisionTree, Forest, ForestSettings, ForestTrainer, Node, TreeSettings, TreeTrainer};

pub const LOGISTIC_REGRESSION: &str = "logistic_regression";
pub const DECISION_TREE: &str = "decision_tree";
pub const RANDOM_FOREST: &str = "random_forest";
pub const SYNTHETIC: &str = "synthetic";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("algorithm `{0}` is not registered")]
    UnknownAlgorithm(String),
    #[error("model expects {expected} feature columns, data has {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("trainer `{0}` cannot use this model payload")]
    PayloadMismatch(String),
    #[error("plugin: {0}")]
    Plugin(#[from] PluginError),
    #[error("trainer panicked: {0}")]
    Panicked(String),
    #[error("{0}")]
    Other(String),
}

/// Where a task is running. Trainers that hold per-worker resources key
/// them by `worker_index`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TaskContext {
    pub worker_index: usize,
}

/// Trained model state, as understood by the trainer that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelPayload<T> {
    Logistic(LogisticModel<T>),
    Tree(DecisionTree<T>),
    Forest(Forest<T>),
    Synthetic(SyntheticModel<T>),
    Plugin(PluginModelRef),
    Bytes { data: Vec<u8> },
}

impl<T> ModelPayload<T> {
    /// Training time measured by the trainer itself, when it reports one.
    pub fn reported_train_seconds(&self) -> Option<f64> {
        match self {
            ModelPayload::Plugin(m) if m.train_seconds.is_finite() && m.train_seconds >= 0.0 => Some(m.train_seconds),
            _ => None,
        }
    }
}

/// Common training/prediction interface every implementation plugs into.
pub trait Trainer<T: Scalar>: Send + Sync {
    fn train(&self, config: &ModelConfig, ds: &Dataset<T>, ctx: TaskContext) -> Result<ModelPayload<T>, TrainError>;

    /// One score in `[0, 1]` per row.
    fn predict(&self, model: &ModelPayload<T>, ds: &Dataset<T>) -> Result<Vec<T>, TrainError>;
}

/// Algorithm key to trainer.
#[derive(Clone)]
pub struct TrainerRegistry<T> {
    trainers: BTreeMap<String, Arc<dyn Trainer<T>>>,
}

impl<T: Scalar> Default for TrainerRegistry<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> std::fmt::Debug for TrainerRegistry<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.trainers.keys()).finish()
    }
}

impl<T: Scalar> TrainerRegistry<T> {
    pub fn new() -> Self {
        Self {
            trainers: BTreeMap::new(),
        }
    }

    /// Registry holding the in-process trainers.
    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(LOGISTIC_REGRESSION, Arc::new(LogisticTrainer));
        r.register(DECISION_TREE, Arc::new(TreeTrainer));
        r.register(RANDOM_FOREST, Arc::new(ForestTrainer));
        r.register(SYNTHETIC, Arc::new(SyntheticTrainer));
        r
    }

    /// Adds or replaces a trainer; returns the previous one for that key.
    pub fn register(&mut self, algorithm: impl Into<String>, trainer: Arc<dyn Trainer<T>>) -> Option<Arc<dyn Trainer<T>>> {
        self.trainers.insert(algorithm.into(), trainer)
    }

    pub fn get(&self, algorithm: &str) -> Result<&Arc<dyn Trainer<T>>, TrainError> {
        self.trainers
            .get(algorithm)
            .ok_or_else(|| TrainError::UnknownAlgorithm(algorithm.to_owned()))
    }

    pub fn contains(&self, algorithm: &str) -> bool {
        self.trainers.contains_key(algorithm)
    }

    pub fn algorithms(&self) -> impl Iterator<Item = &str> {
        self.trainers.keys().map(String::as_str)
    }

    /// Algorithms referenced by `configs` that have no trainer, deduplicated.
    pub fn missing<'c>(&self, configs: &'c [ModelConfig]) -> Vec<&'c str> {
        let mut out: Vec<&str> = configs
            .iter()
            .map(|c| c.algorithm.as_str())
            .filter(|a| !self.contains(a))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel<T> {
    pub config_id: usize,
    pub algorithm: String,
    pub payload: ModelPayload<T>,
    pub train_seconds: f64,
    pub worker_index: usize,
    pub n_cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub config_id: usize,
    pub algorithm: String,
    pub message: String,
}

/// Result of executing a schedule. Models and failures are sorted by
/// `config_id` regardless of completion order.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    pub models: Vec<TrainedModel<T>>,
    pub failures: Vec<TaskFailure>,
    /// Wall time each worker spent on its list.
    pub worker_seconds: Vec<f64>,
    pub wall_seconds: f64,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".to_owned())
}

/// Trains one config, timing only the `train` call. Trainers that report
/// their own time (plugins) are taken at their word, which keeps process
/// startup and data transfer out of the figure.
pub fn train_one<T: Scalar>(
    config: &ModelConfig,
    ds: &Dataset<T>,
    registry: &TrainerRegistry<T>,
    ctx: TaskContext,
) -> Result<TrainedModel<T>, TaskFailure> {
    let fail = |e: TrainError| TaskFailure {
        config_id: config.config_id,
        algorithm: config.algorithm.clone(),
        message: e.to_string(),
    };
    let trainer = registry.get(&config.algorithm).map_err(fail)?;
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| trainer.train(config, ds, ctx)));
    let elapsed = start.elapsed().as_secs_f64();
    let payload = match result {
        Ok(r) => r.map_err(fail)?,
        Err(p) => return Err(fail(TrainError::Panicked(panic_message(p)))),
    };
    let train_seconds = payload.reported_train_seconds().unwrap_or(elapsed);
    Ok(TrainedModel {
        config_id: config.config_id,
        algorithm: config.algorithm.clone(),
        payload,
        train_seconds,
        worker_index: ctx.worker_index,
        n_cols: ds.n_cols(),
    })
}

type TaskResult<T> = Result<TrainedModel<T>, TaskFailure>;

/// Executes every worker's list concurrently. A failing task is recorded and
/// the rest keep running.
pub fn run_schedule<T: Scalar>(
    schedule: &Schedule,
    configs: &[ModelConfig],
    ds: &Dataset<T>,
    registry: &TrainerRegistry<T>,
) -> RunOutcome<T> {
    let by_id: HashMap<usize, &ModelConfig> = configs.iter().map(|c| (c.config_id, c)).collect();
    let start = Instant::now();
    let per_worker: Vec<(Vec<TaskResult<T>>, f64)> = thread::scope(|s| {
        let handles: Vec<_> = schedule
            .assignments
            .iter()
            .enumerate()
            .map(|(worker_index, tasks)| {
                let by_id = &by_id;
                s.spawn(move || {
                    let t0 = Instant::now();
                    let ctx = TaskContext { worker_index };
                    let results = tasks
                        .iter()
                        .map(|id| match by_id.get(id) {
                            Some(config) => train_one(config, ds, registry, ctx),
                            None => Err(TaskFailure {
                                config_id: *id,
                                algorithm: String::new(),
                                message: "scheduled id has no configuration".to_owned(),
                            }),
                        })
                        .collect();
                    (results, t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker threads catch trainer panics"))
            .collect()
    });
    let wall_seconds = start.elapsed().as_secs_f64();

    let mut models = Vec::new();
    let mut failures = Vec::new();
    let mut worker_seconds = Vec::with_capacity(per_worker.len());
    for (results, secs) in per_worker {
        worker_seconds.push(secs);
        for r in results {
            match r {
                Ok(m) => models.push(m),
                Err(f) => failures.push(f),
            }
        }
    }
    models.sort_by_key(|m| m.config_id);
    failures.sort_by_key(|f| f.config_id);
    RunOutcome {
        models,
        failures,
        worker_seconds,
        wall_seconds,
    }
}

/// Scores `ds` with a trained model.
pub fn predict<T: Scalar>(model: &TrainedModel<T>, ds: &Dataset<T>, registry: &TrainerRegistry<T>) -> Result<Vec<T>, TrainError> {
    if ds.n_cols() != model.n_cols {
        return Err(TrainError::ColumnMismatch {
            expected: model.n_cols,
            got: ds.n_cols(),
        });
    }
    let trainer = registry.get(&model.algorithm)?;
    match catch_unwind(AssertUnwindSafe(|| trainer.predict(&model.payload, ds))) {
        Ok(r) => r,
        Err(p) => Err(TrainError::Panicked(panic_message(p))),
    }
}

/// Runs `f` over `items` on `workers` threads that pull the next index from
/// a shared counter. Output order matches input order.
pub fn map_dynamic<I, O, F>(items: &[I], workers: usize, f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I, TaskContext) -> O + Sync,
{
    let next = AtomicUsize::new(0);
    let workers = workers.clamp(1, items.len().max(1));
    let mut indexed: Vec<(usize, O)> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|worker_index| {
                let (next, f) = (&next, &f);
                s.spawn(move || {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i], TaskContext { worker_index })));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("pool worker panicked")).collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, o)| o).collect()
}
