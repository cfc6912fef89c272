use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use crate::data::Dataset;
use crate::scalar::Scalar;
use crate::space::ModelConfig;

use super::protocol::{Message, PROTOCOL_VERSION};
use super::PluginError;

/// Column name given to labels in interchange files.
pub const INTERCHANGE_LABEL: &str = "label";

#[derive(Debug, Clone)]
pub struct PluginOptions {
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
    /// Grace period between `shutdown` and a forced kill.
    pub shutdown_grace: Duration,
    /// Directory for interchange files; the system temp dir when `None`.
    pub interchange_dir: Option<PathBuf>,
}

impl Default for PluginOptions {
    fn default() -> Self {
        Self {
            handshake_timeout: Duration::from_secs(10),
            request_timeout: Duration::from_secs(600),
            shutdown_grace: Duration::from_secs(2),
            interchange_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PluginState {
    Starting,
    Ready,
    Busy,
    Dead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginTrained {
    pub config_id: usize,
    pub model_id: String,
    pub train_seconds: f64,
}

/// A long-lived trainer subprocess. One request is in flight at a time.
pub struct PluginHandle {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    protocol_version: u32,
    algorithms: Vec<String>,
    state: PluginState,
    options: PluginOptions,
    label: String,
}

impl std::fmt::Debug for PluginHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginHandle")
            .field("pid", &self.child.id())
            .field("command", &self.label)
            .field("state", &self.state)
            .field("algorithms", &self.algorithms)
            .finish()
    }
}

impl PluginHandle {
    /// Starts the subprocess and completes the `hello` / `hello_ack`
    /// exchange.
    pub fn spawn(command: &[String], options: PluginOptions) -> Result<Self, PluginError> {
        let (program, args) = command.split_first().ok_or(PluginError::EmptyCommand)?;
        let label = command.join(" ");
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| PluginError::Spawn(format!("{label}: {e}")))?;

        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = child.stderr.take().expect("stderr is piped");
        let pid = child.id();
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(Result::ok) {
                log::debug!("plugin[{pid}]: {line}");
            }
        });

        let mut handle = Self {
            stdin: child.stdin.take(),
            child,
            lines,
            protocol_version: 0,
            algorithms: Vec::new(),
            state: PluginState::Starting,
            options,
            label,
        };
        match handle.handshake() {
            Ok(()) => Ok(handle),
            Err(e) => {
                handle.kill();
                Err(e)
            }
        }
    }

    fn handshake(&mut self) -> Result<(), PluginError> {
        let timeout = self.options.handshake_timeout;
        let hello = self.recv(timeout).map_err(|e| match e {
            PluginError::Dead(msg) => PluginError::Handshake(format!("plugin exited before hello ({msg})")),
            PluginError::Timeout { .. } => PluginError::Handshake(format!("no hello within {timeout:?}")),
            other => PluginError::Handshake(other.to_string()),
        })?;
        match hello {
            Message::Hello { version, algorithms } => {
                if version != PROTOCOL_VERSION {
                    self.state = PluginState::Dead;
                    return Err(PluginError::VersionMismatch {
                        expected: PROTOCOL_VERSION,
                        got: version,
                    });
                }
                self.send(&Message::HelloAck {
                    version: PROTOCOL_VERSION,
                })?;
                self.protocol_version = version;
                self.algorithms = algorithms;
                self.state = PluginState::Ready;
                Ok(())
            }
            other => Err(PluginError::Handshake(format!("expected hello, got {}", other.kind()))),
        }
    }

    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    pub fn state(&self) -> PluginState {
        self.state
    }

    pub fn protocol_version(&self) -> u32 {
        self.protocol_version
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn supports(&self, algorithm: &str) -> bool {
        self.algorithms.iter().any(|a| a == algorithm)
    }

    fn send(&mut self, msg: &Message) -> Result<(), PluginError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| PluginError::Dead("stdin closed".into()))?;
        let line = msg.encode();
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
            self.state = PluginState::Dead;
            return Err(PluginError::Dead(format!("write failed: {e}")));
        }
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<Message, PluginError> {
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => {
                    self.state = PluginState::Dead;
                    return Err(PluginError::Dead(format!("read failed: {e}")));
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(PluginError::Timeout {
                        seconds: timeout.as_secs_f64(),
                    })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.state = PluginState::Dead;
                    let status = match self.child.try_wait() {
                        Ok(Some(s)) => s.to_string(),
                        _ => "stdout closed".to_owned(),
                    };
                    return Err(PluginError::Dead(format!("process ended ({status})")));
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return Message::decode(&line).map_err(|e| {
                self.state = PluginState::Dead;
                PluginError::Protocol(format!("unparsable line `{line}`: {e}"))
            });
        }
    }

    /// Sends one request and waits for its reply. A timeout or broken pipe
    /// kills the process, since request/reply pairing can no longer be
    /// trusted.
    fn request(&mut self, msg: &Message) -> Result<Message, PluginError> {
        if self.state != PluginState::Ready {
            return Err(PluginError::NotReady(self.state));
        }
        self.state = PluginState::Busy;
        let reply = self.send(msg).and_then(|_| self.recv(self.options.request_timeout));
        match reply {
            Ok(m) => {
                self.state = PluginState::Ready;
                Ok(m)
            }
            Err(e) => {
                self.kill();
                Err(e)
            }
        }
    }

    fn interchange_file<T: Scalar>(&self, ds: &Dataset<T>) -> Result<tempfile::NamedTempFile, PluginError> {
        let mut builder = tempfile::Builder::new();
        builder.prefix("modelsearch-").suffix(".csv");
        let mut file = match &self.options.interchange_dir {
            Some(dir) => builder.tempfile_in(dir)?,
            None => builder.tempfile()?,
        };
        ds.write_csv(file.as_file_mut(), INTERCHANGE_LABEL)
            .map_err(|e| PluginError::Io(std::io::Error::other(e.to_string())))?;
        Ok(file)
    }

    /// Trains `config` on `ds`, handing data over through a temporary CSV
    /// that is removed once the plugin replies.
    pub fn train<T: Scalar>(&mut self, config: &ModelConfig, ds: &Dataset<T>) -> Result<PluginTrained, PluginError> {
        if !self.supports(&config.algorithm) {
            return Err(PluginError::UnsupportedAlgorithm(config.algorithm.clone()));
        }
        let file = self.interchange_file(ds)?;
        let reply = self.request(&Message::Train {
            config_id: config.config_id,
            algorithm: config.algorithm.clone(),
            params: config.params.clone(),
            data_ref: file.path().to_string_lossy().into_owned(),
        });
        drop(file);
        match reply? {
            Message::Trained {
                config_id,
                model_id,
                train_seconds,
            } if config_id == config.config_id => Ok(PluginTrained {
                config_id,
                model_id,
                train_seconds,
            }),
            Message::Error { message, .. } => Err(PluginError::Remote(message)),
            other => {
                self.kill();
                Err(PluginError::Protocol(format!(
                    "train for config {} answered with {}",
                    config.config_id,
                    other.encode().trim_end()
                )))
            }
        }
    }

    /// Scores every row of `ds` with a model this process trained.
    pub fn predict<T: Scalar>(&mut self, model_id: &str, ds: &Dataset<T>) -> Result<Vec<f64>, PluginError> {
        let file = self.interchange_file(ds)?;
        let reply = self.request(&Message::Predict {
            model_id: model_id.to_owned(),
            data_ref: file.path().to_string_lossy().into_owned(),
        });
        drop(file);
        match reply? {
            Message::Scores { model_id: id, values } if id == model_id => {
                if values.len() != ds.n_rows() {
                    return Err(PluginError::Protocol(format!(
                        "{} scores for {} rows",
                        values.len(),
                        ds.n_rows()
                    )));
                }
                if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(PluginError::Protocol(format!("score {v} outside [0, 1]")));
                }
                Ok(values)
            }
            Message::Error { message, .. } => Err(PluginError::Remote(message)),
            other => {
                self.kill();
                Err(PluginError::Protocol(format!(
                    "predict for model {model_id} answered with {}",
                    other.encode().trim_end()
                )))
            }
        }
    }

    fn kill(&mut self) {
        self.state = PluginState::Dead;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Asks the plugin to exit, waits up to the grace period, then kills it.
    /// Calling it again is a no-op.
    pub fn shutdown(&mut self) {
        if self.state == PluginState::Dead {
            return;
        }
        let _ = self.send(&Message::Shutdown);
        self.stdin = None;
        let deadline = Instant::now() + self.options.shutdown_grace;
        loop {
            match self.child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => {
                    log::warn!("plugin `{}` ignored shutdown; killing", self.label);
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    break;
                }
            }
        }
        self.state = PluginState::Dead;
    }
}

impl Drop for PluginHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}
