use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::scalar::{sigmoid, Scalar};
use crate::space::ModelConfig;

use super::{ModelPayload, Params, TaskContext, TrainError, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel<T> {
    pub weight: T,
}

/// Trainer with a dialled-in cost: it sleeps for
/// `base_seconds + seconds_per_row * n_rows` and returns a model scoring
/// `sigmoid(weight * x0)`.
///
/// Parameters: `seconds_per_row` (default 0), `base_seconds` (default 0),
/// `weight` (default 1), `fail` (0/1; when set, training errors).
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticTrainer;

impl SyntheticTrainer {
    pub fn cost_seconds(seconds_per_row: f64, base_seconds: f64, n_rows: usize) -> f64 {
        base_seconds + seconds_per_row * n_rows as f64
    }
}

impl<T: Scalar> Trainer<T> for SyntheticTrainer {
    fn train(&self, config: &ModelConfig, ds: &Dataset<T>, _ctx: TaskContext) -> Result<ModelPayload<T>, TrainError> {
        let p = Params::new(config);
        let per_row = p.real("seconds_per_row", 0.0)?;
        p.check("seconds_per_row", per_row >= 0.0, "must be >= 0")?;
        let base = p.real("base_seconds", 0.0)?;
        p.check("base_seconds", base >= 0.0, "must be >= 0")?;
        let weight = p.real("weight", 1.0)?;
        let fail = p.flag("fail", false)?;
        p.finish()?;
        if fail {
            return Err(TrainError::Other(format!("configured to fail (config {})", config.config_id)));
        }
        let secs = Self::cost_seconds(per_row, base, ds.n_rows());
        if secs > 0.0 {
            thread::sleep(Duration::from_secs_f64(secs));
        }
        Ok(ModelPayload::Synthetic(SyntheticModel { weight: T::lit(weight) }))
    }

    fn predict(&self, model: &ModelPayload<T>, ds: &Dataset<T>) -> Result<Vec<T>, TrainError> {
        match model {
            ModelPayload::Synthetic(m) => Ok(ds.rows().map(|r| sigmoid(m.weight * r[0])).collect()),
            _ => Err(TrainError::PayloadMismatch(super::SYNTHETIC.into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamValue;
    use std::time::Instant;

    #[test]
    fn sleeps_in_proportion_to_rows() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let ds = Dataset::from_rows(&rows, vec![0.0; 200]).unwrap();
        let config = ModelConfig {
            config_id: 0,
            algorithm: "synthetic".into(),
            params: [("seconds_per_row".to_string(), ParamValue::Real(1e-4))].into_iter().collect(),
        };
        let t0 = Instant::now();
        let m = SyntheticTrainer.train(&config, &ds, TaskContext::default()).unwrap();
        let took = t0.elapsed().as_secs_f64();
        assert!((0.02..0.5).contains(&took), "{took}");
        let s = SyntheticTrainer.predict(&m, &ds).unwrap();
        assert_eq!(s[0], 0.5);
        assert!(s[199] > 0.99);
    }
}
