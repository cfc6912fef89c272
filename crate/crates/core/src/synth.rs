//! Seeded synthetic datasets for benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::scalar::Scalar;

/// Two-feature XOR: `x0, x1` uniform on `[-1, 1]`, label 1 when they share a
/// sign. `noise_features` extra uniform columns carry no signal, and each
/// label is flipped with probability `flip`.
pub fn xor<T: Scalar>(n_rows: usize, noise_features: usize, flip: f64, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = 2 + noise_features;
    let mut features = Vec::with_capacity(n_rows * cols);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut y = row[0] * row[1] > 0.0;
        if rng.random::<f64>() < flip {
            y = !y;
        }
        features.extend(row.into_iter().map(T::lit));
        labels.push(if y { T::one() } else { T::zero() });
    }
    let names = (0..cols).map(|j| format!("x{j}")).collect();
    Dataset::new(features, labels, names).expect("generated rows are well formed")
}

/// Rows `x0` uniform on `[-1, 1]` with `P(y = 1) = sigmoid(slope * x0)`.
/// Handy for trainers whose cost depends only on the row count.
pub fn linear<T: Scalar>(n_rows: usize, slope: f64, seed: u64) -> Dataset<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let x: f64 = rng.random_range(-1.0..=1.0);
        let p = crate::scalar::sigmoid(slope * x);
        features.push(T::lit(x));
        labels.push(if rng.random::<f64>() < p { T::one() } else { T::zero() });
    }
    Dataset::new(features, labels, vec!["x0".into()]).expect("generated rows are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_labels_follow_quadrants() {
        let ds: Dataset<f64> = xor(500, 1, 0.0, 3);
        assert_eq!(ds.n_cols(), 3);
        for (row, &y) in ds.rows().zip(ds.labels()) {
            assert_eq!(y == 1.0, row[0] * row[1] > 0.0);
        }
        assert_eq!(ds, xor(500, 1, 0.0, 3));
    }

    #[test]
    fn linear_has_both_classes() {
        let ds: Dataset<f32> = linear(200, 4.0, 1);
        assert!(ds.positives() > 0 && ds.positives() < 200);
    }
}
