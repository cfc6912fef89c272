use std::cell::RefCell;
use std::collections::HashSet;

use crate::space::{ModelConfig, ParamValue};

use super::TrainError;

/// Typed accessor over a config's parameter map that remembers which keys
/// were read, so leftovers can be reported as unknown.
pub(crate) struct Params<'a> {
    config: &'a ModelConfig,
    used: RefCell<HashSet<&'a str>>,
}

impl<'a> Params<'a> {
    pub fn new(config: &'a ModelConfig) -> Self {
        Self {
            config,
            used: RefCell::new(HashSet::new()),
        }
    }

    fn raw(&self, name: &'static str) -> Option<&'a ParamValue> {
        let (key, value) = self.config.params.get_key_value(name)?;
        self.used.borrow_mut().insert(key.as_str());
        Some(value)
    }

    fn invalid(name: &str, reason: impl Into<String>) -> TrainError {
        TrainError::InvalidParam {
            name: name.to_owned(),
            reason: reason.into(),
        }
    }

    pub fn real(&self, name: &'static str, default: f64) -> Result<f64, TrainError> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Self::invalid(name, format!("expected a finite number, got {v}"))),
        }
    }

    pub fn int(&self, name: &'static str, default: i64) -> Result<i64, TrainError> {
        match self.raw(name) {
            None => Ok(default),
            Some(v) => v
                .as_i64()
                .ok_or_else(|| Self::invalid(name, format!("expected an integer, got {v}"))),
        }
    }

    pub fn flag(&self, name: &'static str, default: bool) -> Result<bool, TrainError> {
        match self.raw(name) {
            None => Ok(default),
            Some(ParamValue::Int(0)) => Ok(false),
            Some(ParamValue::Int(1)) => Ok(true),
            Some(ParamValue::Str(s)) if s == "true" => Ok(true),
            Some(ParamValue::Str(s)) if s == "false" => Ok(false),
            Some(v) => Err(Self::invalid(name, format!("expected true/false or 0/1, got {v}"))),
        }
    }

    /// Integer that must be at least `min`.
    pub fn count(&self, name: &'static str, default: i64, min: i64) -> Result<usize, TrainError> {
        let v = self.int(name, default)?;
        if v < min {
            return Err(Self::invalid(name, format!("must be >= {min}, got {v}")));
        }
        Ok(v as usize)
    }

    pub fn check(&self, name: &'static str, ok: bool, reason: &str) -> Result<(), TrainError> {
        if ok {
            Ok(())
        } else {
            Err(Self::invalid(name, reason))
        }
    }

    /// Fails on the first parameter that was never read.
    pub fn finish(self) -> Result<(), TrainError> {
        let used = self.used.into_inner();
        match self.config.params.keys().find(|k| !used.contains(k.as_str())) {
            Some(k) => Err(Self::invalid(k, format!("unknown parameter for `{}`", self.config.algorithm))),
            None => Ok(()),
        }
    }
}
