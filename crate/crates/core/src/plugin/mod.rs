//! External trainers hosted as long-lived subprocesses.
//!
//! A plugin announces itself with `hello`, then serves `train` / `predict`
//! requests one at a time until told to `shutdown`. Datasets travel as CSV
//! files (features, then a `label` column) whose paths go in `data_ref`.

mod host;
pub mod protocol;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::executor::{ModelPayload, TaskContext, TrainError, Trainer};
use crate::scalar::Scalar;
use crate::space::ModelConfig;

pub use host::{PluginHandle, PluginOptions, PluginState, PluginTrained, INTERCHANGE_LABEL};
pub use protocol::{Message, PROTOCOL_VERSION};

#[derive(Debug, Error)]
pub enum PluginError {
    #[error("plugin command is empty")]
    EmptyCommand,
    #[error("failed to start plugin {0}")]
    Spawn(String),
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("plugin speaks protocol version {got}, host requires {expected}")]
    VersionMismatch { expected: u32, got: u32 },
    #[error("no reply within {seconds} s")]
    Timeout { seconds: f64 },
    #[error("plugin process is dead: {0}")]
    Dead(String),
    #[error("plugin reported: {0}")]
    Remote(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("handle is {0:?}, not ready")]
    NotReady(PluginState),
    #[error("plugin does not serve algorithm `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("model was trained by an earlier plugin process")]
    StaleModel,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Reference to a model living inside a plugin process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginModelRef {
    pub slot: usize,
    /// Which spawn of the slot's process produced the model.
    pub generation: usize,
    pub model_id: String,
    /// Training time as measured by the plugin itself.
    #[serde(default)]
    pub train_seconds: f64,
}

struct Slot {
    handle: Option<PluginHandle>,
    generation: usize,
}

/// [`Trainer`] backed by a plugin command.
///
/// Holds one subprocess per slot, started on first use and reused for every
/// later task on that slot. Worker `w` uses slot `w % slots`, so with one
/// slot per worker no two workers share a process.
pub struct PluginTrainer {
    command: Vec<String>,
    options: PluginOptions,
    algorithms: Vec<String>,
    slots: Vec<Mutex<Slot>>,
    spawns: AtomicUsize,
}

impl std::fmt::Debug for PluginTrainer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginTrainer")
            .field("command", &self.command)
            .field("algorithms", &self.algorithms)
            .field("slots", &self.slots.len())
            .finish()
    }
}

impl PluginTrainer {
    /// Starts slot 0 right away so a broken command fails early and the
    /// advertised algorithm list is known.
    pub fn start(command: Vec<String>, slots: usize, options: PluginOptions) -> Result<Self, PluginError> {
        let first = PluginHandle::spawn(&command, options.clone())?;
        let algorithms = first.algorithms().to_vec();
        let mut all: Vec<Mutex<Slot>> = (0..slots.max(1))
            .map(|_| {
                Mutex::new(Slot {
                    handle: None,
                    generation: 0,
                })
            })
            .collect();
        all[0] = Mutex::new(Slot {
            handle: Some(first),
            generation: 1,
        });
        Ok(Self {
            command,
            options,
            algorithms,
            slots: all,
            spawns: AtomicUsize::new(1),
        })
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    /// Subprocesses started so far, including respawns after a crash.
    pub fn spawn_count(&self) -> usize {
        self.spawns.load(Ordering::SeqCst)
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    fn with_slot<R>(
        &self,
        index: usize,
        respawn: bool,
        f: impl FnOnce(&mut PluginHandle, usize) -> Result<R, PluginError>,
    ) -> Result<R, PluginError> {
        let mut slot = self.slots[index].lock().unwrap_or_else(|p| p.into_inner());
        let alive = slot.handle.as_ref().is_some_and(|h| h.state() != PluginState::Dead);
        if !alive {
            if !respawn {
                return Err(PluginError::StaleModel);
            }
            slot.handle = Some(PluginHandle::spawn(&self.command, self.options.clone())?);
            slot.generation += 1;
            self.spawns.fetch_add(1, Ordering::SeqCst);
        }
        let generation = slot.generation;
        f(slot.handle.as_mut().expect("slot populated above"), generation)
    }

    /// Shuts down every running subprocess.
    pub fn shutdown(&self) {
        for slot in &self.slots {
            let mut slot = slot.lock().unwrap_or_else(|p| p.into_inner());
            if let Some(h) = slot.handle.as_mut() {
                h.shutdown();
            }
        }
    }
}

impl Drop for PluginTrainer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl<T: Scalar> Trainer<T> for PluginTrainer {
    fn train(&self, config: &ModelConfig, ds: &Dataset<T>, ctx: TaskContext) -> Result<ModelPayload<T>, TrainError> {
        let slot = ctx.worker_index % self.slots.len();
        let model = self.with_slot(slot, true, |h, generation| {
            let trained = h.train(config, ds)?;
            Ok(PluginModelRef {
                slot,
                generation,
                model_id: trained.model_id,
                train_seconds: trained.train_seconds,
            })
        })?;
        Ok(ModelPayload::Plugin(model))
    }

    fn predict(&self, model: &ModelPayload<T>, ds: &Dataset<T>) -> Result<Vec<T>, TrainError> {
        let ModelPayload::Plugin(model) = model else {
            return Err(TrainError::PayloadMismatch(self.command.join(" ")));
        };
        if model.slot >= self.slots.len() {
            return Err(PluginError::StaleModel.into());
        }
        let scores = self.with_slot(model.slot, false, |h, generation| {
            if generation != model.generation {
                return Err(PluginError::StaleModel);
            }
            h.predict(&model.model_id, ds)
        })?;
        Ok(scores.into_iter().map(T::lit).collect())
    }
}
