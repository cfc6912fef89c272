//! The search driver: tune, profile, schedule, train, validate, select.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ColumnStats, DataError, Dataset};
use crate::evaluator::{select_best, validate_all, Direction, EvaluationResult, Metric};
use crate::executor::{map_dynamic, predict, run_schedule, TaskFailure, TrainerRegistry};
use crate::plugin::{PluginError, PluginOptions, PluginTrainer};
use crate::profiler::{overhead_ratio, profile_all, ProfileError, TaskProfile};
use crate::scalar::Scalar;
use crate::scheduler::{makespan, schedule_greedy, schedule_random, Durations, Schedule, ScheduleError};
use crate::space::{GridSpec, ModelConfig, SearchSpace, SpaceError};
use crate::tuner::{GridTuner, Tuner};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search space: {0}")]
    Space(#[from] SpaceError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("profiling: {0}")]
    Profile(#[from] ProfileError),
    #[error("scheduling: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("plugin `{command}`: {source}")]
    Plugin { command: String, source: PluginError },
    #[error("plugin `{command}` does not advertise algorithm `{algorithm}` (it serves: {advertised})")]
    PluginAlgorithm {
        command: String,
        algorithm: String,
        advertised: String,
    },
    #[error("no trainer registered for: {}", .0.join(", "))]
    Unregistered(Vec<String>),
    #[error("config {path}: {source}")]
    Config { path: String, source: serde_json::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown scheduler `{0}` (expected profile or random)")]
    UnknownScheduler(String),
}

/// A trainer subprocess declared in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PluginSpec {
    pub command: Vec<String>,
    pub algorithms: Vec<String>,
}

/// On-disk search declaration. Relative paths are taken relative to the
/// config file's directory by [`SearchConfig::from_path`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub train_csv: PathBuf,
    pub validate_csv: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_csv: Option<PathBuf>,
    pub label_column: String,
    /// Standardize every split with the training split's column statistics.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub standardize: bool,
    pub grids: Vec<GridSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plugins: Vec<PluginSpec>,
}

impl FromStr for SearchConfig {
    type Err = serde_json::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_str(s)
    }
}

impl SearchConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SearchError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut config: Self = text.parse().map_err(|source| SearchError::Config {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut config.train_csv);
        resolve(&mut config.validate_csv);
        if let Some(p) = config.test_csv.as_mut() {
            resolve(p);
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace {
            grids: self.grids.clone(),
        }
    }

    /// Train, validate and optional test splits, standardized if requested.
    pub fn load_data<T: Scalar>(&self) -> Result<Splits<T>, SearchError> {
        let train = Dataset::from_csv_path(&self.train_csv, &self.label_column)?;
        let validate = Dataset::from_csv_path(&self.validate_csv, &self.label_column)?;
        let test = self
            .test_csv
            .as_ref()
            .map(|p| Dataset::from_csv_path(p, &self.label_column))
            .transpose()?;
        if !self.standardize {
            return Ok(Splits { train, validate, test });
        }
        let stats = ColumnStats::fit(&train);
        Ok(Splits {
            validate: stats.apply(&validate),
            test: test.as_ref().map(|t| stats.apply(t)),
            train: stats.apply(&train),
        })
    }

    /// Built-in trainers plus one [`PluginTrainer`] per declared plugin,
    /// each with `slots` subprocess slots.
    pub fn registry<T: Scalar>(&self, slots: usize, options: &PluginOptions) -> Result<TrainerRegistry<T>, SearchError> {
        let mut registry = TrainerRegistry::with_builtins();
        for spec in &self.plugins {
            let command = spec.command.join(" ");
            let trainer = PluginTrainer::start(spec.command.clone(), slots, options.clone()).map_err(|source| {
                SearchError::Plugin {
                    command: command.clone(),
                    source,
                }
            })?;
            let trainer = Arc::new(trainer);
            for algorithm in &spec.algorithms {
                if !trainer.algorithms().contains(algorithm) {
                    return Err(SearchError::PluginAlgorithm {
                        command,
                        algorithm: algorithm.clone(),
                        advertised: trainer.algorithms().join(", "),
                    });
                }
                registry.register(algorithm.clone(), trainer.clone());
            }
        }
        Ok(registry)
    }
}

#[derive(Debug, Clone)]
pub struct Splits<T> {
    pub train: Dataset<T>,
    pub validate: Dataset<T>,
    pub test: Option<Dataset<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    /// Profile on a sample, then LPT on the estimates.
    Profile,
    /// Equal task counts per worker, seeded shuffle.
    Random,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerKind::Profile => "profile",
            SchedulerKind::Random => "random",
        })
    }
}

impl FromStr for SchedulerKind {
    type Err = SearchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "profile" => Ok(SchedulerKind::Profile),
            "random" => Ok(SchedulerKind::Random),
            other => Err(SearchError::UnknownScheduler(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub workers: usize,
    pub scheduler: SchedulerKind,
    pub sample_rate: f64,
    pub seed: u64,
    pub metric: Metric,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            scheduler: SchedulerKind::Profile,
            sample_rate: 0.01,
            seed: 0,
            metric: Metric::Auc,
        }
    }
}

/// Everything a search produced. Timing fields are measured wall-clock
/// values; see [`SearchReport::normalized`] for comparing runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub metric: Metric,
    pub direction: Direction,
    pub scheduler: SchedulerKind,
    pub workers: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<f64>,
    pub configs: Vec<ModelConfig>,
    /// Validation (and test, when available) metric per trained model.
    pub results: Vec<EvaluationResult>,
    /// Configs that failed to train or to evaluate.
    pub failures: Vec<TaskFailure>,
    pub profiling_failures: Vec<TaskFailure>,
    pub best_config_id: Option<usize>,
    pub best_value: Option<f64>,
    pub best_test_value: Option<f64>,
    pub schedule: Schedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_seconds: Option<Durations<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_makespan_seconds: Option<f64>,
    /// Measured busy seconds per worker.
    pub worker_loads: Vec<f64>,
    pub makespan_seconds: f64,
    pub profiling_wall_seconds: f64,
    pub overhead_ratio: Option<f64>,
    pub total_wall_seconds: f64,
}

impl SearchReport {
    /// Copy with every measured-time field zeroed. Under the profile
    /// scheduler the schedule and estimates derive from measurements too, so
    /// they are cleared as well.
    pub fn normalized(&self) -> Self {
        let mut r = self.clone();
        for res in &mut r.results {
            res.train_seconds = 0.0;
        }
        r.worker_loads.iter_mut().for_each(|w| *w = 0.0);
        r.makespan_seconds = 0.0;
        r.profiling_wall_seconds = 0.0;
        r.total_wall_seconds = 0.0;
        r.overhead_ratio = r.overhead_ratio.map(|_| 0.0);
        r.estimated_seconds = None;
        r.estimated_makespan_seconds = None;
        if r.scheduler == SchedulerKind::Profile {
            r.schedule.assignments.iter_mut().for_each(Vec::clear);
        }
        r
    }

    pub fn best(&self) -> Option<&EvaluationResult> {
        let id = self.best_config_id?;
        self.results.iter().find(|r| r.config_id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Grid-tunes `space` and runs the search.
pub fn run_search<T: Scalar>(
    space: &SearchSpace,
    splits: &Splits<T>,
    registry: &TrainerRegistry<T>,
    options: &SearchOptions,
) -> Result<SearchReport, SearchError> {
    let configs = GridTuner::new(space.clone()).propose()?;
    run_configs(&configs, splits, registry, options)
}

/// Runs the pipeline on an explicit configuration list.
pub fn run_configs<T: Scalar>(
    configs: &[ModelConfig],
    splits: &Splits<T>,
    registry: &TrainerRegistry<T>,
    options: &SearchOptions,
) -> Result<SearchReport, SearchError> {
    let missing = registry.missing(configs);
    if !missing.is_empty() {
        return Err(SearchError::Unregistered(missing.into_iter().map(str::to_owned).collect()));
    }
    if options.workers == 0 {
        return Err(ScheduleError::NoWorkers.into());
    }
    let workers = options.workers;
    let start = Instant::now();

    let (schedule, profile): (Schedule, Option<TaskProfile>) = match options.scheduler {
        SchedulerKind::Profile => {
            let p = profile_all(configs, &splits.train, options.sample_rate, options.seed, registry, workers)?;
            (schedule_greedy(&p.entries, workers)?, Some(p))
        }
        SchedulerKind::Random => {
            let ids: Vec<usize> = configs.iter().map(|c| c.config_id).collect();
            (schedule_random(&ids, workers, options.seed)?, None)
        }
    };
    log::info!(
        "scheduled {} tasks on {} workers ({})",
        configs.len(),
        workers,
        options.scheduler
    );

    let outcome = run_schedule(&schedule, configs, &splits.train, registry);
    let (mut results, eval_failures) =
        validate_all(&outcome.models, &splits.validate, registry, options.metric, workers);

    if let Some(test) = &splits.test {
        let models: Vec<_> = results
            .iter()
            .filter_map(|r| outcome.models.iter().find(|m| m.config_id == r.config_id))
            .collect();
        let test_values = map_dynamic(&models, workers, |m, _| {
            predict(m, test, registry)
                .map_err(|e| e.to_string())
                .and_then(|s| options.metric.compute(&s, test.labels()).map_err(|e| e.to_string()))
        });
        for (r, v) in results.iter_mut().zip(test_values) {
            match v {
                Ok(v) => r.test_value = Some(v),
                Err(e) => log::warn!("test metric for config {}: {e}", r.config_id),
            }
        }
    }

    let direction = options.metric.direction();
    let best_config_id = select_best(&results, options.metric, direction).ok();
    let best = best_config_id.and_then(|id| results.iter().find(|r| r.config_id == id));
    let (best_value, best_test_value) = (best.map(|r| r.value), best.and_then(|r| r.test_value));

    let mut failures = outcome.failures;
    failures.extend(eval_failures);
    failures.sort_by_key(|f| f.config_id);

    let total_wall_seconds = start.elapsed().as_secs_f64();
    let profiling_wall_seconds = profile.as_ref().map_or(0.0, |p| p.profiling_wall_seconds);
    let estimated_makespan_seconds = match &profile {
        Some(p) => Some(makespan(&schedule, &p.entries)?),
        None => None,
    };
    Ok(SearchReport {
        metric: options.metric,
        direction,
        scheduler: options.scheduler,
        workers,
        seed: options.seed,
        sample_rate: profile.as_ref().map(|p| p.sampling_rate),
        configs: configs.to_vec(),
        results,
        failures,
        profiling_failures: profile.as_ref().map(|p| p.failures.clone()).unwrap_or_default(),
        best_config_id,
        best_value,
        best_test_value,
        schedule,
        estimated_seconds: profile.as_ref().map(|p| p.entries.clone()),
        estimated_makespan_seconds,
        makespan_seconds: outcome.worker_seconds.iter().copied().fold(0.0, f64::max),
        worker_loads: outcome.worker_seconds,
        profiling_wall_seconds,
        overhead_ratio: profile.and_then(|p| overhead_ratio(p.profiling_wall_seconds, total_wall_seconds).ok()),
        total_wall_seconds,
    })
}
