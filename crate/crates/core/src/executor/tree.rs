//! CART classification trees on Gini impurity and bagged forests of them.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::scalar::Scalar;
use crate::space::ModelConfig;

use super::{ModelPayload, Params, TaskContext, TrainError, Trainer};

// splits must lower weighted impurity by more than this
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node<T> {
    /// Fraction of class-1 training rows that reached this leaf.
    Leaf { probability: T, samples: usize },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
}

/// Arena-allocated binary tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn leaf_for(&self, row: &[T]) -> &Node<T> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn score(&self, row: &[T]) -> T {
        match self.leaf_for(row) {
            Node::Leaf { probability, .. } => *probability,
            Node::Split { .. } => unreachable!("leaf_for stops at leaves"),
        }
    }

    pub fn predict(&self, ds: &Dataset<T>) -> Vec<T> {
        ds.rows().map(|r| self.score(r)).collect()
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeSettings {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a, T> {
    ds: &'a Dataset<T>,
    features: &'a [usize],
    settings: TreeSettings,
    nodes: Vec<Node<T>>,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    impurity: f64,
}

impl<T: Scalar> Builder<'_, T> {
    fn is_pos(&self, row: usize) -> bool {
        self.ds.labels()[row] == T::one()
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.is_pos(r)).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probability: T::from_usize_lossy(pos) / T::from_usize_lossy(n.max(1)),
            samples: n,
        });
        if depth >= self.settings.max_depth || n < self.settings.min_samples_split || pos == 0 || pos == n {
            return id;
        }
        let parent = gini(pos, n);
        let Some(best) = self.best_split(rows, pos) else {
            return id;
        };
        if parent - best.impurity <= MIN_GAIN {
            return id;
        }
        let (f, t) = (best.feature, best.threshold);
        let mut split_at = 0;
        for i in 0..n {
            if self.ds.get(rows[i], f) <= t {
                rows.swap(i, split_at);
                split_at += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split_at);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature: f,
            threshold: t,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini over every feature and every midpoint between
    /// consecutive distinct values. Ties keep the earliest candidate.
    fn best_split(&self, rows: &[usize], pos: usize) -> Option<BestSplit<T>> {
        let n = rows.len();
        let mut best: Option<BestSplit<T>> = None;
        let mut sorted: Vec<(T, bool)> = Vec::with_capacity(n);
        for &f in self.features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.ds.get(r, f), self.is_pos(r))));
            sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("features are finite"));
            let mut left_pos = 0;
            for i in 0..n - 1 {
                left_pos += usize::from(sorted[i].1);
                if sorted[i].0 == sorted[i + 1].0 {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(pos - left_pos, nr)) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let threshold = sorted[i].0 + (sorted[i + 1].0 - sorted[i].0) / T::lit(2.0);
                    // midpoint can round up onto the right value for adjacent floats
                    let threshold = if threshold >= sorted[i + 1].0 { sorted[i].0 } else { threshold };
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

/// Grows a tree on `rows` (may repeat, for bootstrap samples) using only the
/// listed feature columns.
pub fn grow_tree<T: Scalar>(ds: &Dataset<T>, rows: &mut [usize], features: &[usize], settings: TreeSettings) -> DecisionTree<T> {
    let mut b = Builder {
        ds,
        features,
        settings,
        nodes: Vec::new(),
    };
    b.build(rows, 0);
    DecisionTree { nodes: b.nodes }
}

fn tree_settings(p: &Params<'_>) -> Result<TreeSettings, TrainError> {
    Ok(TreeSettings {
        max_depth: p.count("max_depth", 5, 1)?,
        min_samples_split: p.count("min_samples_split", 2, 2)?,
    })
}

/// Single CART tree. Parameters: `max_depth` (>= 1, default 5),
/// `min_samples_split` (>= 2, default 2).
#[derive(Debug, Clone, Copy, Default)]
pub struct TreeTrainer;

impl TreeTrainer {
    pub fn fit<T: Scalar>(ds: &Dataset<T>, settings: TreeSettings) -> DecisionTree<T> {
        let mut rows: Vec<usize> = (0..ds.n_rows()).collect();
        let features: Vec<usize> = (0..ds.n_cols()).collect();
        grow_tree(ds, &mut rows, &features, settings)
    }
}

impl<T: Scalar> Trainer<T> for TreeTrainer {
    fn train(&self, config: &ModelConfig, ds: &Dataset<T>, _ctx: TaskContext) -> Result<ModelPayload<T>, TrainError> {
        let p = Params::new(config);
        let settings = tree_settings(&p)?;
        p.finish()?;
        Ok(ModelPayload::Tree(Self::fit(ds, settings)))
    }

    fn predict(&self, model: &ModelPayload<T>, ds: &Dataset<T>) -> Result<Vec<T>, TrainError> {
        match model {
            ModelPayload::Tree(t) => Ok(t.predict(ds)),
            _ => Err(TrainError::PayloadMismatch(super::DECISION_TREE.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<T> {
    pub trees: Vec<DecisionTree<T>>,
    pub seed: u64,
}

impl<T: Scalar> Forest<T> {
    /// Mean of the trees' leaf probabilities.
    pub fn predict(&self, ds: &Dataset<T>) -> Vec<T> {
        let k = T::from_usize_lossy(self.trees.len());
        ds.rows()
            .map(|r| self.trees.iter().map(|t| t.score(r)).sum::<T>() / k)
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub tree: TreeSettings,
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

/// Bagged trees. Each tree gets its own bootstrap sample (unless disabled)
/// and a random subset of `ceil(feature_fraction * n_cols)` features.
///
/// Parameters: `n_trees` (>= 1, default 10), `max_depth`,
/// `min_samples_split`, `feature_fraction` (in (0, 1], default 1),
/// `bootstrap` (default true), `seed` (default 0).
#[derive(Debug, Clone, Copy, Default)]
pub struct ForestTrainer;

impl ForestTrainer {
    pub fn fit<T: Scalar>(ds: &Dataset<T>, s: ForestSettings) -> Forest<T> {
        let n = ds.n_rows();
        let cols = ds.n_cols();
        let k = ((s.feature_fraction * cols as f64).ceil() as usize).clamp(1, cols);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let trees = (0..s.n_trees)
            .map(|_| {
                let mut rows: Vec<usize> = if s.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut features = if k == cols {
                    (0..cols).collect()
                } else {
                    index::sample(&mut rng, cols, k).into_vec()
                };
                features.sort_unstable();
                grow_tree(ds, &mut rows, &features, s.tree)
            })
            .collect();
        Forest { trees, seed: s.seed }
    }
}

impl<T: Scalar> Trainer<T> for ForestTrainer {
    fn train(&self, config: &ModelConfig, ds: &Dataset<T>, _ctx: TaskContext) -> Result<ModelPayload<T>, TrainError> {
        let p = Params::new(config);
        let n_trees = p.count("n_trees", 10, 1)?;
        let tree = tree_settings(&p)?;
        let feature_fraction = p.real("feature_fraction", 1.0)?;
        p.check("feature_fraction", feature_fraction > 0.0 && feature_fraction <= 1.0, "must be in (0, 1]")?;
        let bootstrap = p.flag("bootstrap", true)?;
        let seed = p.count("seed", 0, 0)? as u64;
        p.finish()?;
        let settings = ForestSettings {
            n_trees,
            tree,
            feature_fraction,
            bootstrap,
            seed,
        };
        Ok(ModelPayload::Forest(Self::fit(ds, settings)))
    }

    fn predict(&self, model: &ModelPayload<T>, ds: &Dataset<T>) -> Result<Vec<T>, TrainError> {
        match model {
            ModelPayload::Forest(f) => Ok(f.predict(ds)),
            _ => Err(TrainError::PayloadMismatch(super::RANDOM_FOREST.into())),
        }
    }
}
