//! CART decision trees with Gini impurity, and random forests built from
//! them with bootstrap resampling and per-split feature subsampling.
//!
//! Splits scan every candidate (feature, threshold) pair over sorted
//! distinct values; thresholds are midpoints between consecutive distinct
//! values. Ties break toward the lowest feature index, then the lowest
//! threshold; leaf majorities and forest votes break toward the lowest
//! label.

use serde::{Deserialize, Serialize};

use crate::classic::classes_from_labels;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vectorize::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    All,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub tree: TreeConfig,
    pub seed: u64,
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> ForestConfig {
        ForestConfig {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            tree: TreeConfig::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Class-index counts at the leaf, used for score fractions.
        counts: Vec<usize>,
        label_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub classes: Vec<u8>,
    pub dim: usize,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub classes: Vec<u8>,
    pub dim: usize,
    pub trees: Vec<TreeModel>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

/// Majority class index, lowest index on ties.
fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    targets: &'a [usize],
    num_classes: usize,
    config: TreeConfig,
    feature_pool: Vec<usize>,
    features_per_split: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn leaf(&mut self, counts: Vec<usize>) -> usize {
        let label_index = majority(&counts);
        self.nodes.push(Node::Leaf {
            counts,
            label_index,
        });
        self.nodes.len() - 1
    }

    /// Candidate features for one split: either the full pool or a seeded
    /// sample without replacement, returned in ascending order so
    /// tie-breaking stays well-defined.
    fn candidate_features(&mut self, rng: Option<&mut Rng>) -> Vec<usize> {
        if self.features_per_split >= self.feature_pool.len() {
            return self.feature_pool.clone();
        }
        let rng = rng.expect("feature subsampling requires an RNG");
        let mut pool = self.feature_pool.clone();
        for i in 0..self.features_per_split {
            let j = i + rng.below(pool.len() - i);
            pool.swap(i, j);
        }
        let mut chosen: Vec<usize> = pool[..self.features_per_split].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn build(&mut self, samples: &[usize], depth: usize, mut rng: Option<&mut Rng>) -> usize {
        let mut counts = vec![0usize; self.num_classes];
        for &s in samples {
            counts[self.targets[s]] += 1;
        }
        let node_gini = gini(&counts, samples.len());
        let depth_cap = self.config.max_depth.is_some_and(|d| depth >= d);
        if node_gini == 0.0 || samples.len() < self.config.min_samples_split || depth_cap {
            return self.leaf(counts);
        }

        let features = self.candidate_features(rng.as_deref_mut_hack());
        let mut best: Option<(f64, usize, f64)> = None; // (weighted gini, feature, threshold)
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for &feature in &features {
            pairs.clear();
            pairs.extend(
                samples
                    .iter()
                    .map(|&s| (self.x[s][feature], self.targets[s])),
            );
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

            let total = samples.len();
            let mut left_counts = vec![0usize; self.num_classes];
            let mut left_n = 0usize;
            let mut right_counts = counts.clone();
            for w in 0..total - 1 {
                let (value, class) = pairs[w];
                left_counts[class] += 1;
                right_counts[class] -= 1;
                left_n += 1;
                let next_value = pairs[w + 1].0;
                if next_value <= value {
                    continue;
                }
                let threshold = 0.5 * (value + next_value);
                let right_n = total - left_n;
                let weighted = (left_n as f64 * gini(&left_counts, left_n)
                    + right_n as f64 * gini(&right_counts, right_n))
                    / total as f64;
                // Strict improvement keeps the first (lowest feature, lowest
                // threshold) candidate on ties.
                if best.is_none_or(|(b, _, _)| weighted < b - 1e-12) {
                    best = Some((weighted, feature, threshold));
                }
            }
        }

        let Some((weighted, feature, threshold)) = best else {
            return self.leaf(counts);
        };
        if node_gini - weighted <= 1e-12 {
            return self.leaf(counts);
        }

        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.x[s][feature] <= threshold);
        debug_assert!(!left_samples.is_empty() && !right_samples.is_empty());

        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf {
            counts: Vec::new(),
            label_index: 0,
        });
        let (left_rng, right_rng) = match rng {
            Some(r) => {
                let left = self.build(&left_samples, depth + 1, Some(r));
                (left, self.build(&right_samples, depth + 1, Some(r)))
            }
            None => {
                let left = self.build(&left_samples, depth + 1, None);
                (left, self.build(&right_samples, depth + 1, None))
            }
        };
        self.nodes[placeholder] = Node::Split {
            feature,
            threshold,
            left: left_rng,
            right: right_rng,
        };
        placeholder
    }
}

/// Work around reborrowing an `Option<&mut Rng>` across two call sites.
trait AsDerefMutHack {
    fn as_deref_mut_hack(&mut self) -> Option<&mut Rng>;
}

impl AsDerefMutHack for Option<&mut Rng> {
    fn as_deref_mut_hack(&mut self) -> Option<&mut Rng> {
        self.as_deref_mut()
    }
}

fn densify(x: &[SparseVector]) -> Vec<Vec<f64>> {
    x.iter().map(SparseVector::to_dense).collect()
}

#[allow(clippy::too_many_arguments)]
fn fit_tree(
    dense: &[Vec<f64>],
    targets: &[usize],
    num_classes: usize,
    dim: usize,
    classes: &[u8],
    config: TreeConfig,
    samples: &[usize],
    features_per_split: usize,
    mut rng: Option<&mut Rng>,
) -> TreeModel {
    let mut builder = TreeBuilder {
        x: dense,
        targets,
        num_classes,
        config,
        feature_pool: (0..dim).collect(),
        features_per_split,
        nodes: Vec::new(),
    };
    builder.build(samples, 0, rng.as_deref_mut_hack());
    TreeModel {
        classes: classes.to_vec(),
        dim,
        nodes: builder.nodes,
    }
}

/// CART decision tree with Gini impurity.
pub fn train_dtree(x: &[SparseVector], y: &[u8], config: TreeConfig) -> Result<TreeModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Model("training set empty or mismatched".into()));
    }
    let classes = classes_from_labels(y);
    let dim = x[0].dim;
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let dense = densify(x);
    let samples: Vec<usize> = (0..x.len()).collect();
    Ok(fit_tree(
        &dense,
        &targets,
        classes.len(),
        dim,
        &classes,
        config,
        &samples,
        dim,
        None,
    ))
}

/// Random forest of CART trees. Per-tree seeds derive deterministically
/// from the master seed; each tree optionally bootstraps its sample and
/// draws sqrt(d) candidate features per split.
pub fn train_rforest(x: &[SparseVector], y: &[u8], config: ForestConfig) -> Result<ForestModel> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Model("training set empty or mismatched".into()));
    }
    if config.n_trees == 0 {
        return Err(Error::Model("forest needs at least one tree".into()));
    }
    let classes = classes_from_labels(y);
    let dim = x[0].dim;
    let targets: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).unwrap())
        .collect();
    let dense = densify(x);
    let n = x.len();
    let features_per_split = match config.max_features {
        MaxFeatures::All => dim,
        MaxFeatures::Sqrt => (dim as f64).sqrt().floor().max(1.0) as usize,
    };

    let trees = (0..config.n_trees)
        .map(|t| {
            let mut rng = Rng::derived(config.seed, "classic.rforest.tree", t as u64);
            let samples: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(
                &dense,
                &targets,
                classes.len(),
                dim,
                &classes,
                config.tree,
                &samples,
                features_per_split,
                if features_per_split < dim {
                    Some(&mut rng)
                } else {
                    None
                },
            )
        })
        .collect();

    Ok(ForestModel {
        classes,
        dim,
        trees,
    })
}

impl TreeModel {
    fn leaf_for(&self, dense: &[f64]) -> &Node {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if dense[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                leaf => return leaf,
            }
        }
    }

    fn predict_index(&self, dense: &[f64]) -> usize {
        match self.leaf_for(dense) {
            Node::Leaf { label_index, .. } => *label_index,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Leaf class fractions.
    pub fn scores(&self, x: &[SparseVector]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|v| {
                let dense = v.to_dense();
                match self.leaf_for(&dense) {
                    Node::Leaf { counts, .. } => {
                        let total: usize = counts.iter().sum();
                        counts
                            .iter()
                            .map(|&c| c as f64 / total.max(1) as f64)
                            .collect()
                    }
                    Node::Split { .. } => unreachable!(),
                }
            })
            .collect()
    }

    pub fn predict(&self, x: &[SparseVector]) -> Vec<u8> {
        x.iter()
            .map(|v| self.classes[self.predict_index(&v.to_dense())])
            .collect()
    }
}

impl ForestModel {
    /// Vote counts per class for one sample.
    pub fn votes(&self, v: &SparseVector) -> Vec<usize> {
        let dense = v.to_dense();
        let mut votes = vec![0usize; self.classes.len()];
        for tree in &self.trees {
            votes[tree.predict_index(&dense)] += 1;
        }
        votes
    }

    /// Vote fractions per class.
    pub fn scores(&self, x: &[SparseVector]) -> Vec<Vec<f64>> {
        let n_trees = self.trees.len() as f64;
        x.iter()
            .map(|v| self.votes(v).iter().map(|&c| c as f64 / n_trees).collect())
            .collect()
    }

    pub fn predict(&self, x: &[SparseVector]) -> Vec<u8> {
        x.iter()
            .map(|v| self.classes[majority(&self.votes(v))])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> Vec<SparseVector> {
        values
            .iter()
            .map(|&v| SparseVector::new(vec![0], vec![v], 1))
            .collect()
    }

    #[test]
    fn single_split_at_midpoint() {
        let x = one_d(&[0.0, 1.0, 2.0]);
        let y = vec![1, 1, 2];
        let tree = train_dtree(&x, &y, TreeConfig::default()).unwrap();
        // Parent Gini 4/9; threshold 0.5 leaves weighted Gini 1/3,
        // threshold 1.5 reaches 0, so the split lands at 1.5.
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert!((threshold - 1.5).abs() < 1e-12);
            }
            Node::Leaf { .. } => panic!("expected a split at the root"),
        }
        assert_eq!(tree.predict(&x), y);
    }

    #[test]
    fn pure_node_is_immediate_leaf() {
        let x = one_d(&[0.0, 1.0, 2.0]);
        let y = vec![3, 3, 3];
        let tree = train_dtree(&x, &y, TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert!(matches!(tree.nodes[0], Node::Leaf { .. }));
    }

    #[test]
    fn consistent_data_reaches_full_accuracy() {
        let mut rng = Rng::from_seed(31);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..80 {
            let a = rng.uniform(-1.0, 1.0);
            let b = rng.uniform(-1.0, 1.0);
            x.push(SparseVector::new(vec![0, 1], vec![a, b], 2));
            y.push(if a + b > 0.0 { 1 } else { 2 } as u8);
            let _ = i;
        }
        let tree = train_dtree(&x, &y, TreeConfig::default()).unwrap();
        assert_eq!(tree.predict(&x), y);
    }

    #[test]
    fn conflicting_duplicates_fall_back_to_majority() {
        let x = one_d(&[1.0, 1.0, 1.0]);
        let y = vec![2, 1, 2];
        let tree = train_dtree(&x, &y, TreeConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&x), vec![2, 2, 2]);
    }

    #[test]
    fn max_depth_zero_is_single_leaf() {
        let x = one_d(&[0.0, 1.0]);
        let y = vec![1, 2];
        let config = TreeConfig {
            max_depth: Some(0),
            ..TreeConfig::default()
        };
        let tree = train_dtree(&x, &y, config).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        // Tie between labels 1 and 2 resolves to the lowest label.
        assert_eq!(tree.predict(&x), vec![1, 1]);
    }

    #[test]
    fn degenerate_forest_equals_tree() {
        let mut rng = Rng::from_seed(41);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..60 {
            let a = rng.uniform(-1.0, 1.0);
            let b = rng.uniform(-1.0, 1.0);
            x.push(SparseVector::new(vec![0, 1], vec![a, b], 2));
            y.push(if a > 0.3 * b { 1 } else { 2 } as u8);
        }
        let tree = train_dtree(&x, &y, TreeConfig::default()).unwrap();
        let forest = train_rforest(
            &x,
            &y,
            ForestConfig {
                n_trees: 1,
                max_features: MaxFeatures::All,
                bootstrap: false,
                tree: TreeConfig::default(),
                seed: 9,
            },
        )
        .unwrap();
        assert_eq!(forest.predict(&x), tree.predict(&x));
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn forest_deterministic_and_votes_sum() {
        let mut rng = Rng::from_seed(43);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..40 {
            let a = rng.uniform(-1.0, 1.0);
            let b = rng.uniform(-1.0, 1.0);
            x.push(SparseVector::new(vec![0, 1], vec![a, b], 2));
            y.push(if a * b > 0.0 { 1 } else { 2 } as u8);
        }
        let config = ForestConfig::with_seed(77);
        let f1 = train_rforest(&x, &y, config).unwrap();
        let f2 = train_rforest(&x, &y, config).unwrap();
        assert_eq!(f1, f2);
        for v in &x {
            let votes = f1.votes(v);
            assert_eq!(votes.iter().sum::<usize>(), config.n_trees);
        }
    }
}
