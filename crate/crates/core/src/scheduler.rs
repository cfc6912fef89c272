//! Static assignment of training tasks to workers.
//!
//! Each task runs wholly on one worker and workers are identical, so the
//! problem is makespan minimization on identical parallel machines. The
//! profile-driven scheduler uses LPT list scheduling; the random scheduler is
//! the equal-count baseline; the exhaustive solver is a small-instance oracle.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Debug;

use num_traits::{FromPrimitive, Num};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum task count accepted by [`schedule_optimal`].
pub const OPTIMAL_MAX_TASKS: usize = 14;
/// Maximum worker count accepted by [`schedule_optimal`].
pub const OPTIMAL_MAX_WORKERS: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("no tasks to schedule")]
    NoTasks,
    #[error("task {0} has a non-positive duration")]
    NonPositive(usize),
    #[error("task {0} is scheduled but has no duration")]
    MissingDuration(usize),
    #[error("instance with {tasks} tasks on {workers} workers exceeds the exhaustive-search guard")]
    TooLarge { tasks: usize, workers: usize },
}

/// Numeric type usable as a task cost: floats, or exact rationals.
pub trait TaskCost: Num + Copy + PartialOrd + FromPrimitive + Debug {}

impl<T: Num + Copy + PartialOrd + FromPrimitive + Debug> TaskCost for T {}

/// Estimated (or simulated) duration per task id.
pub type Durations<T> = BTreeMap<usize, T>;

/// Per-worker ordered task lists. Worker `w` runs `assignments[w]` in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub assignments: Vec<Vec<usize>>,
}

impl Schedule {
    pub fn workers(&self) -> usize {
        self.assignments.len()
    }

    pub fn task_count(&self) -> usize {
        self.assignments.iter().map(Vec::len).sum()
    }

    /// Summed cost per worker.
    pub fn loads<T: TaskCost>(&self, durations: &Durations<T>) -> Result<Vec<T>, ScheduleError> {
        self.assignments
            .iter()
            .map(|tasks| {
                tasks.iter().try_fold(T::zero(), |acc, id| {
                    durations
                        .get(id)
                        .map(|&d| acc + d)
                        .ok_or(ScheduleError::MissingDuration(*id))
                })
            })
            .collect()
    }

    /// Worker index that owns each task.
    pub fn owner_map(&self) -> BTreeMap<usize, usize> {
        self.assignments
            .iter()
            .enumerate()
            .flat_map(|(w, tasks)| tasks.iter().map(move |&id| (id, w)))
            .collect()
    }
}

fn check<T: TaskCost>(durations: &Durations<T>, workers: usize) -> Result<(), ScheduleError> {
    if workers == 0 {
        return Err(ScheduleError::NoWorkers);
    }
    if durations.is_empty() {
        return Err(ScheduleError::NoTasks);
    }
    // NaN compares as None and is rejected along with non-positive values
    match durations.iter().find(|(_, &d)| d.partial_cmp(&T::zero()) != Some(Ordering::Greater)) {
        Some((&id, _)) => Err(ScheduleError::NonPositive(id)),
        None => Ok(()),
    }
}

fn max_of<T: TaskCost>(values: impl IntoIterator<Item = T>) -> T {
    values
        .into_iter()
        .fold(T::zero(), |m, v| if v > m { v } else { m })
}

/// Largest per-worker load. Empty workers count as zero.
pub fn makespan<T: TaskCost>(schedule: &Schedule, durations: &Durations<T>) -> Result<T, ScheduleError> {
    Ok(max_of(schedule.loads(durations)?))
}

/// `max(longest task, total / workers)`; no schedule can beat this.
pub fn makespan_lower_bound<T: TaskCost>(durations: &Durations<T>, workers: usize) -> T {
    let total = durations.values().fold(T::zero(), |a, &d| a + d);
    let share = match T::from_usize(workers.max(1)) {
        Some(m) => total / m,
        None => T::zero(),
    };
    let longest = max_of(durations.values().copied());
    if longest > share {
        longest
    } else {
        share
    }
}

/// Longest-processing-time list scheduling.
///
/// Tasks are taken in descending duration (ties: lower id first) and each
/// goes to the currently least-loaded worker (ties: lower worker index).
/// The result is within `4/3 - 1/(3m)` of optimal.
pub fn schedule_greedy<T: TaskCost>(durations: &Durations<T>, workers: usize) -> Result<Schedule, ScheduleError> {
    check(durations, workers)?;
    let mut order: Vec<(usize, T)> = durations.iter().map(|(&id, &d)| (id, d)).collect();
    // BTreeMap iteration is id-ascending and the sort is stable
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("durations validated as positive"));

    let mut loads = vec![T::zero(); workers];
    let mut assignments = vec![Vec::new(); workers];
    for (id, d) in order {
        let mut target = 0;
        for w in 1..workers {
            if loads[w] < loads[target] {
                target = w;
            }
        }
        loads[target] = loads[target] + d;
        assignments[target].push(id);
    }
    Ok(Schedule { assignments })
}

/// Equal-count baseline: shuffle with a seeded RNG, then deal round-robin so
/// per-worker task counts differ by at most one.
pub fn schedule_random(ids: &[usize], workers: usize, seed: u64) -> Result<Schedule, ScheduleError> {
    if workers == 0 {
        return Err(ScheduleError::NoWorkers);
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![Vec::with_capacity(ids.len() / workers + 1); workers];
    for (i, id) in shuffled.into_iter().enumerate() {
        assignments[i % workers].push(id);
    }
    Ok(Schedule { assignments })
}

/// Exact minimum-makespan schedule by depth-first branch and bound.
///
/// Guarded to at most [`OPTIMAL_MAX_TASKS`] tasks and
/// [`OPTIMAL_MAX_WORKERS`] workers. Tasks are placed longest first; a task
/// is only ever placed on the first of several empty workers, and any branch
/// whose partial makespan reaches the incumbent is cut.
pub fn schedule_optimal<T: TaskCost>(durations: &Durations<T>, workers: usize) -> Result<Schedule, ScheduleError> {
    check(durations, workers)?;
    if durations.len() > OPTIMAL_MAX_TASKS || workers > OPTIMAL_MAX_WORKERS {
        return Err(ScheduleError::TooLarge {
            tasks: durations.len(),
            workers,
        });
    }
    let mut tasks: Vec<(usize, T)> = durations.iter().map(|(&id, &d)| (id, d)).collect();
    tasks.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("durations validated as positive"));

    let incumbent = schedule_greedy(durations, workers)?;
    let mut search = BranchAndBound {
        tasks: &tasks,
        lower_bound: makespan_lower_bound(durations, workers),
        best: makespan(&incumbent, durations)?,
        best_owner: None,
        owner: vec![0; tasks.len()],
        loads: vec![T::zero(); workers],
    };
    search.descend(0, T::zero());

    let Some(owner) = search.best_owner else {
        return Ok(incumbent);
    };
    let mut assignments = vec![Vec::new(); workers];
    for (&(id, _), &w) in tasks.iter().zip(&owner) {
        assignments[w].push(id);
    }
    Ok(Schedule { assignments })
}

struct BranchAndBound<'a, T> {
    tasks: &'a [(usize, T)],
    lower_bound: T,
    best: T,
    best_owner: Option<Vec<usize>>,
    owner: Vec<usize>,
    loads: Vec<T>,
}

impl<T: TaskCost> BranchAndBound<'_, T> {
    /// Returns true once a schedule meeting the lower bound is found.
    fn descend(&mut self, depth: usize, current: T) -> bool {
        if depth == self.tasks.len() {
            if current < self.best {
                self.best = current;
                self.best_owner = Some(self.owner.clone());
            }
            return self.best <= self.lower_bound;
        }
        let d = self.tasks[depth].1;
        let mut tried_empty = false;
        for w in 0..self.loads.len() {
            if self.loads[w] == T::zero() {
                if tried_empty {
                    continue;
                }
                tried_empty = true;
            }
            let before = self.loads[w];
            let load = before + d;
            if load >= self.best {
                continue;
            }
            let next = if load > current { load } else { current };
            self.loads[w] = load;
            self.owner[depth] = w;
            let done = self.descend(depth + 1, next);
            self.loads[w] = before;
            if done {
                return true;
            }
        }
        false
    }
}
