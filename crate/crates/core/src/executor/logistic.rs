use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::scalar::{sigmoid, Scalar};
use crate::space::ModelConfig;

use super::{ModelPayload, Params, TaskContext, TrainError, Trainer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel<T> {
    pub weights: Vec<T>,
    pub intercept: T,
}

impl<T: Scalar> LogisticModel<T> {
    pub fn zeros(n_cols: usize) -> Self {
        Self {
            weights: vec![T::zero(); n_cols],
            intercept: T::zero(),
        }
    }

    fn margin(&self, row: &[T]) -> T {
        row.iter().zip(&self.weights).fold(self.intercept, |acc, (&x, &w)| acc + x * w)
    }

    pub fn predict(&self, ds: &Dataset<T>) -> Vec<T> {
        ds.rows().map(|r| sigmoid(self.margin(r))).collect()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2`; the intercept is not penalized.
pub fn logistic_loss<T: Scalar>(model: &LogisticModel<T>, ds: &Dataset<T>, l2: T) -> T {
    let n = T::from_usize_lossy(ds.n_rows());
    let data: T = ds
        .rows()
        .zip(ds.labels())
        .map(|(r, &y)| {
            // log(1 + e^z) - y z, stable for large |z|
            let z = model.margin(r);
            let softplus = if z > T::zero() {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - y * z
        })
        .sum();
    let penalty = model.weights.iter().map(|&w| w * w).sum::<T>() * l2 / T::lit(2.0);
    data / n + penalty
}

/// Gradient of [`logistic_loss`]: `(X^T (p - y) / n + l2 w, mean(p - y))`.
pub fn logistic_gradient<T: Scalar>(model: &LogisticModel<T>, ds: &Dataset<T>, l2: T) -> LogisticModel<T> {
    let n = T::from_usize_lossy(ds.n_rows());
    let mut grad = LogisticModel::zeros(ds.n_cols());
    for (row, &y) in ds.rows().zip(ds.labels()) {
        let residual = sigmoid(model.margin(row)) - y;
        for (g, &x) in grad.weights.iter_mut().zip(row) {
            *g = *g + residual * x;
        }
        grad.intercept = grad.intercept + residual;
    }
    for (g, &w) in grad.weights.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    grad.intercept = grad.intercept / n;
    grad
}

/// Full-batch gradient descent from zero weights.
///
/// Parameters: `learning_rate` (> 0, default 0.1), `iterations` (>= 0,
/// default 100), `l2` (>= 0, default 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticTrainer;

impl LogisticTrainer {
    pub fn fit<T: Scalar>(ds: &Dataset<T>, learning_rate: T, iterations: usize, l2: T) -> LogisticModel<T> {
        let mut model = LogisticModel::zeros(ds.n_cols());
        for _ in 0..iterations {
            let g = logistic_gradient(&model, ds, l2);
            for (w, gw) in model.weights.iter_mut().zip(g.weights) {
                *w = *w - learning_rate * gw;
            }
            model.intercept = model.intercept - learning_rate * g.intercept;
        }
        model
    }
}

impl<T: Scalar> Trainer<T> for LogisticTrainer {
    fn train(&self, config: &ModelConfig, ds: &Dataset<T>, _ctx: TaskContext) -> Result<ModelPayload<T>, TrainError> {
        let p = Params::new(config);
        let lr = p.real("learning_rate", 0.1)?;
        p.check("learning_rate", lr > 0.0, "must be > 0")?;
        let iterations = p.count("iterations", 100, 0)?;
        let l2 = p.real("l2", 0.0)?;
        p.check("l2", l2 >= 0.0, "must be >= 0")?;
        p.finish()?;
        Ok(ModelPayload::Logistic(Self::fit(ds, T::lit(lr), iterations, T::lit(l2))))
    }

    fn predict(&self, model: &ModelPayload<T>, ds: &Dataset<T>) -> Result<Vec<T>, TrainError> {
        match model {
            ModelPayload::Logistic(m) => Ok(m.predict(ds)),
            _ => Err(TrainError::PayloadMismatch(super::LOGISTIC_REGRESSION.into())),
        }
    }
}
