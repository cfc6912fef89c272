//! Model search across pluggable trainer implementations.
//!
//! A search declares hyperparameter grids per algorithm. The driver
//! enumerates configurations, estimates each one's training cost from a
//! sampled run, assigns tasks to parallel workers with LPT scheduling,
//! trains, validates on held-out data and returns the best model.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); scheduling is
//! generic over [`scheduler::TaskCost`], which also admits exact rationals.
//! The aliases at the crate root fix the common `f64` instantiation.
//!
//! ```
//! use modelsearch::{run_search, synth, GridSpec, SearchOptions, SearchSpace, Splits, TrainerRegistry};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let space = SearchSpace::new()
//!     .add_space(GridSpec::new("decision_tree").add_grid("max_depth", [2i64, 4, 6])?)
//!     .add_space(GridSpec::new("logistic_regression").add_grid("learning_rate", [0.1, 0.5])?);
//! let splits = Splits {
//!     train: synth::xor(1000, 0, 0.0, 1),
//!     validate: synth::xor(500, 0, 0.0, 2),
//!     test: None,
//! };
//! let options = SearchOptions { workers: 4, ..SearchOptions::default() };
//! let report = run_search(&space, &splits, &TrainerRegistry::with_builtins(), &options)?;
//! assert_eq!(report.configs[report.best_config_id.unwrap()].algorithm, "decision_tree");
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod evaluator;
pub mod executor;
pub mod plugin;
pub mod profiler;
pub mod scalar;
pub mod scheduler;
pub mod search;
pub mod space;
pub mod synth;
pub mod tuner;

pub use evaluator::{accuracy, auc, select_best, validate_all, Direction, EvaluationResult, Metric, MetricError};
pub use executor::{run_schedule, TaskContext, TaskFailure, TrainError, Trainer};
pub use plugin::{PluginError, PluginHandle, PluginOptions, PluginTrainer};
pub use profiler::{overhead_ratio, profile_all, TaskProfile};
pub use scalar::Scalar;
pub use scheduler::{makespan, schedule_greedy, schedule_optimal, schedule_random, Schedule, ScheduleError};
pub use search::{run_configs, run_search, SchedulerKind, SearchConfig, SearchError, SearchOptions, SearchReport};
pub use space::{grid_enumerate, GridSpec, ModelConfig, ParamValue, SearchSpace, SpaceError};
pub use tuner::{tune_grid, tune_random, RandomRange, Tuner};

pub type Dataset = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type Durations = scheduler::Durations<f64>;
pub type TrainerRegistry = executor::TrainerRegistry<f64>;
pub type TrainedModel = executor::TrainedModel<f64>;
pub type ModelPayload = executor::ModelPayload<f64>;
pub type RunOutcome = executor::RunOutcome<f64>;
pub type Splits = search::Splits<f64>;
