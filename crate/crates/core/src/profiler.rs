//! Duration estimates from sampled training runs.
//!
//! Every configuration is trained once on a small uniform sample of the
//! training data. Assuming cost proportional to row count, the full-data
//! estimate is the measured time divided by the sampling rate.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::time::Instant;

use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::executor::{map_dynamic, train_one, TaskFailure, TrainerRegistry};
use crate::scalar::Scalar;
use crate::scheduler::Durations;
use crate::space::ModelConfig;

/// Floor applied to estimates so every task has a positive duration even
/// when the timer resolves a sampled run to zero.
pub const MIN_ESTIMATE_SECONDS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("every profiling run failed; first error: {0}")]
    AllFailed(String),
    #[error("no configurations to profile")]
    NoConfigs,
    #[error("total wall time must be positive, got {0}")]
    NonPositiveTotal(f64),
    #[error("profiling time {profiling} is outside [0, total = {total}]")]
    ProfilingOutOfRange { profiling: f64, total: f64 },
    #[error("duration table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskProfile {
    /// Estimated full-data seconds per config id.
    pub entries: Durations<f64>,
    /// Raw sampled-run seconds for configs that trained successfully.
    pub measured: BTreeMap<usize, f64>,
    pub sampling_rate: f64,
    pub profiling_wall_seconds: f64,
    /// Configs whose sampled run failed; their entry is the largest
    /// successful estimate.
    pub failures: Vec<TaskFailure>,
}

/// `measured / rate`, floored at [`MIN_ESTIMATE_SECONDS`].
pub fn estimate_seconds(measured: f64, rate: f64) -> f64 {
    (measured / rate).max(MIN_ESTIMATE_SECONDS)
}

/// Trains every config once on `ds.sample(rate, seed)` using `workers`
/// parallel slots and scales the measured training time.
pub fn profile_all<T: Scalar>(
    configs: &[ModelConfig],
    ds: &Dataset<T>,
    rate: f64,
    seed: u64,
    registry: &TrainerRegistry<T>,
    workers: usize,
) -> Result<TaskProfile, ProfileError> {
    if configs.is_empty() {
        return Err(ProfileError::NoConfigs);
    }
    let start = Instant::now();
    let sample = ds.sample(rate, seed)?;
    let runs = map_dynamic(configs, workers, |config, ctx| {
        train_one(config, &sample, registry, ctx).map(|m| m.train_seconds)
    });
    let profiling_wall_seconds = start.elapsed().as_secs_f64();

    let mut measured = BTreeMap::new();
    let mut failures = Vec::new();
    for (config, run) in configs.iter().zip(runs) {
        match run {
            Ok(secs) => {
                measured.insert(config.config_id, secs);
            }
            Err(f) => {
                log::warn!("profiling config {} failed: {}", f.config_id, f.message);
                failures.push(f);
            }
        }
    }
    if measured.is_empty() {
        return Err(ProfileError::AllFailed(
            failures.first().map(|f| f.message.clone()).unwrap_or_default(),
        ));
    }
    let mut entries: Durations<f64> = measured
        .iter()
        .map(|(&id, &secs)| (id, estimate_seconds(secs, rate)))
        .collect();
    let pessimistic = entries.values().copied().fold(MIN_ESTIMATE_SECONDS, f64::max);
    for f in &failures {
        entries.insert(f.config_id, pessimistic);
    }
    Ok(TaskProfile {
        entries,
        measured,
        sampling_rate: rate,
        profiling_wall_seconds,
        failures,
    })
}

/// Share of the overall run spent profiling.
pub fn overhead_ratio(profiling_wall_seconds: f64, total_wall_seconds: f64) -> Result<f64, ProfileError> {
    if total_wall_seconds.partial_cmp(&0.0) != Some(Ordering::Greater) {
        return Err(ProfileError::NonPositiveTotal(total_wall_seconds));
    }
    if !(0.0..=total_wall_seconds).contains(&profiling_wall_seconds) {
        return Err(ProfileError::ProfilingOutOfRange {
            profiling: profiling_wall_seconds,
            total: total_wall_seconds,
        });
    }
    Ok(profiling_wall_seconds / total_wall_seconds)
}

impl TaskProfile {
    pub fn overhead_ratio(&self, total_wall_seconds: f64) -> Result<f64, ProfileError> {
        overhead_ratio(self.profiling_wall_seconds, total_wall_seconds)
    }

    pub fn to_table(&self) -> String {
        durations_to_table(&self.entries)
    }
}

/// Two-column `config_id,estimated_seconds` table with a header line.
pub fn durations_to_table(durations: &Durations<f64>) -> String {
    let mut out = String::from("config_id,estimated_seconds\n");
    for (id, secs) in durations {
        let _ = writeln!(out, "{id},{secs}");
    }
    out
}

/// Parses a duration table. Columns may be separated by a comma or by
/// whitespace; a non-numeric first line is taken as a header; blank lines
/// and `#` comments are skipped.
pub fn durations_from_table<R: BufRead>(reader: R) -> Result<Durations<f64>, ProfileError> {
    let mut out = Durations::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let err = |reason: String| ProfileError::Table { line: lineno, reason };
        if fields.len() != 2 {
            return Err(err(format!("expected 2 columns, found {}", fields.len())));
        }
        let Ok(id) = fields[0].parse::<usize>() else {
            if out.is_empty() && lineno == 1 {
                continue;
            }
            return Err(err(format!("bad config id `{}`", fields[0])));
        };
        let secs: f64 = fields[1]
            .parse()
            .map_err(|_| err(format!("bad duration `{}`", fields[1])))?;
        if out.insert(id, secs).is_some() {
            return Err(err(format!("config id {id} listed twice")));
        }
    }
    Ok(out)
}
