//! Random forest: bagged binary decision trees with Gini splits.
//!
//! Each tree draws a bootstrap resample and, at every node, examines a
//! seeded random subset of ceil(sqrt(F)) features (configurable). Trees
//! grow until nodes are pure or hold fewer than two samples. A node whose
//! sampled features are all constant falls back to the first feature, in
//! index order, that still separates it, so growth only stops early when
//! no feature can tell the node's samples apart.
//!
//! Trees are stored as flat node arrays with the root at index 0 and
//! children strictly after their parent, which makes cycle-free traversal
//! checkable when a model file is loaded.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::seed;
use crate::vectorize::{SparseVector, VectorizedDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Terminal node holding [positive, negative] training counts.
    Leaf { counts: [u64; 2] },
    /// Routes vectors with value <= threshold on the feature to `left`,
    /// the rest to `right`. Child fields index into the tree's node array.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub dimension: usize,
}

const POS: usize = 0;
const NEG: usize = 1;

fn label_index(label: Label) -> usize {
    match label {
        Label::Positive => POS,
        Label::Negative => NEG,
    }
}

impl Tree {
    pub fn predict(&self, vector: &SparseVector) -> Label {
        let mut index = 0;
        loop {
            match &self.nodes[index] {
                TreeNode::Leaf { counts } => {
                    return if counts[POS] >= counts[NEG] {
                        Label::Positive
                    } else {
                        Label::Negative
                    };
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    index = if vector.get(*feature) <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

impl Forest {
    fn positive_votes(&self, vector: &SparseVector) -> usize {
        self.trees
            .iter()
            .filter(|t| t.predict(vector) == Label::Positive)
            .count()
    }

    /// Majority vote across trees; an exact tie predicts Positive.
    pub fn predict(&self, vector: &SparseVector) -> Label {
        if 2 * self.positive_votes(vector) >= self.trees.len() {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    /// Fraction of trees voting Positive.
    pub fn score(&self, vector: &SparseVector) -> f64 {
        self.positive_votes(vector) as f64 / self.trees.len() as f64
    }

    pub(super) fn validate(&self) -> Result<(), String> {
        if self.trees.is_empty() {
            return Err("forest holds no trees".into());
        }
        for (ti, tree) in self.trees.iter().enumerate() {
            if tree.nodes.is_empty() {
                return Err(format!("tree {ti} has no nodes"));
            }
            for (ni, node) in tree.nodes.iter().enumerate() {
                match node {
                    TreeNode::Leaf { counts } => {
                        if counts[POS] == 0 && counts[NEG] == 0 {
                            return Err(format!("tree {ti} node {ni} is an empty leaf"));
                        }
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature >= self.dimension {
                            return Err(format!(
                                "tree {ti} node {ni} splits on feature {feature}, dimension is {}",
                                self.dimension
                            ));
                        }
                        if !threshold.is_finite() {
                            return Err(format!("tree {ti} node {ni} has a non-finite threshold"));
                        }
                        for child in [left, right] {
                            if *child >= tree.nodes.len() {
                                return Err(format!(
                                    "tree {ti} node {ni} points past the node array"
                                ));
                            }
                            // children strictly after the parent keeps
                            // traversal acyclic
                            if *child <= ni {
                                return Err(format!(
                                    "tree {ti} node {ni} points backwards to {child}"
                                ));
                            }
                        }
                        if left == right {
                            return Err(format!("tree {ti} node {ni} has identical children"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn draw_bootstrap(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

fn label_counts(labels: &[Label], samples: &[usize]) -> [u64; 2] {
    let mut counts = [0u64; 2];
    for &i in samples {
        counts[label_index(labels[i])] += 1;
    }
    counts
}

fn gini(counts: [u64; 2]) -> f64 {
    let total = (counts[POS] + counts[NEG]) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let p = counts[POS] as f64 / total;
    let n = counts[NEG] as f64 / total;
    1.0 - p * p - n * n
}

fn weighted_gini(left: [u64; 2], right: [u64; 2]) -> f64 {
    let l = (left[POS] + left[NEG]) as f64;
    let r = (right[POS] + right[NEG]) as f64;
    (l * gini(left) + r * gini(right)) / (l + r)
}

/// Best threshold on one feature: (weighted child Gini, threshold), or
/// None when the feature is constant across the node's samples.
fn best_split_on_feature(
    dataset: &VectorizedDataset,
    samples: &[usize],
    feature: usize,
) -> Option<(f64, f64)> {
    let mut pairs: Vec<(f64, Label)> = samples
        .iter()
        .map(|&i| (dataset.matrix[i].get(feature), dataset.labels[i]))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut groups: Vec<(f64, [u64; 2])> = Vec::new();
    for (value, label) in pairs {
        match groups.last_mut() {
            Some((v, counts)) if *v == value => counts[label_index(label)] += 1,
            _ => {
                let mut counts = [0u64; 2];
                counts[label_index(label)] += 1;
                groups.push((value, counts));
            }
        }
    }
    if groups.len() < 2 {
        return None;
    }

    let total = groups
        .iter()
        .fold([0u64; 2], |acc, (_, c)| [acc[POS] + c[POS], acc[NEG] + c[NEG]]);
    let mut best: Option<(f64, f64)> = None;
    let mut left = [0u64; 2];
    for i in 0..groups.len() - 1 {
        left[POS] += groups[i].1[POS];
        left[NEG] += groups[i].1[NEG];
        let (low, high) = (groups[i].0, groups[i + 1].0);
        let threshold = low + (high - low) / 2.0;
        // adjacent floats can round the midpoint up to the higher value,
        // which would leave the right child empty
        if threshold >= high {
            continue;
        }
        let right = [total[POS] - left[POS], total[NEG] - left[NEG]];
        let score = weighted_gini(left, right);
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, threshold));
        }
    }
    best
}

/// Pick the split for a node: best Gini over a seeded sample of
/// `candidates` features (ties go to the lower feature index and lower
/// threshold), falling back to the first splittable unsampled feature when
/// every sampled one is constant.
fn find_split(
    dataset: &VectorizedDataset,
    samples: &[usize],
    dimension: usize,
    candidates: usize,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, f64)> {
    if dimension == 0 {
        return None;
    }
    let pool: Vec<usize> = if candidates >= dimension {
        (0..dimension).collect()
    } else {
        let mut set = BTreeSet::new();
        while set.len() < candidates {
            set.insert(rng.gen_range(0..dimension));
        }
        set.into_iter().collect()
    };

    let mut best: Option<(f64, usize, f64)> = None;
    for &feature in &pool {
        if let Some((score, threshold)) = best_split_on_feature(dataset, samples, feature) {
            if best.is_none_or(|(b, _, _)| score < b) {
                best = Some((score, feature, threshold));
            }
        }
    }
    if let Some((_, feature, threshold)) = best {
        return Some((feature, threshold));
    }
    for feature in 0..dimension {
        if pool.binary_search(&feature).is_ok() {
            continue;
        }
        if let Some((_, threshold)) = best_split_on_feature(dataset, samples, feature) {
            return Some((feature, threshold));
        }
    }
    None
}

fn build_tree(
    dataset: &VectorizedDataset,
    samples: Vec<usize>,
    dimension: usize,
    candidates: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut nodes = vec![TreeNode::Leaf { counts: [0, 0] }];
    // preorder worklist: children are pushed right-then-left so the left
    // subtree is finished (and consumes its rng draws) first
    let mut pending = vec![(0usize, samples)];
    while let Some((node_index, samples)) = pending.pop() {
        let counts = label_counts(&dataset.labels, &samples);
        let pure = counts[POS] == 0 || counts[NEG] == 0;
        let split = if samples.len() >= 2 && !pure {
            find_split(dataset, &samples, dimension, candidates, rng)
        } else {
            None
        };
        match split {
            None => nodes[node_index] = TreeNode::Leaf { counts },
            Some((feature, threshold)) => {
                let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
                    .into_iter()
                    .partition(|&i| dataset.matrix[i].get(feature) <= threshold);
                let left = nodes.len();
                let right = nodes.len() + 1;
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                nodes.push(TreeNode::Leaf { counts: [0, 0] });
                nodes[node_index] = TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                pending.push((right, right_samples));
                pending.push((left, left_samples));
            }
        }
    }
    Tree { nodes }
}

pub(super) fn fit(
    dataset: &VectorizedDataset,
    n_trees: usize,
    bootstrap: bool,
    split_candidates: Option<usize>,
    master_seed: u64,
) -> Forest {
    let dimension = dataset
        .matrix
        .first()
        .map_or(dataset.vocabulary.len(), |v| v.dimension);
    let candidates = split_candidates.unwrap_or_else(|| (dimension as f64).sqrt().ceil() as usize);
    let n = dataset.matrix.len();
    // tree i's rng depends only on (master_seed, i), and the ordered
    // collect keeps tree order fixed, so parallelism cannot perturb output
    let trees: Vec<Tree> = (0..n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = seed::rng(seed::derive(master_seed, i as u64));
            let samples = if bootstrap {
                draw_bootstrap(&mut rng, n)
            } else {
                (0..n).collect()
            };
            build_tree(dataset, samples, dimension, candidates, &mut rng)
        })
        .collect();
    Forest { trees, dimension }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{fit, predict, predict_score, FittedModel, ModelConfig, ModelSpec};
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeMap;

    fn forest_config(
        n_trees: usize,
        bootstrap: bool,
        split_candidates: Option<usize>,
        seed: u64,
    ) -> ModelConfig {
        ModelConfig::new(
            ModelSpec::RandomForest {
                n_trees,
                bootstrap,
                split_candidates,
            },
            seed,
        )
    }

    #[test]
    fn two_point_dataset_yields_a_single_midpoint_split() {
        let data = dataset_from_dense(&[vec![1.0], vec![0.0]], &[Label::Positive, Label::Negative]);
        let model = fit(&data, &forest_config(1, false, Some(1), 0)).unwrap();
        let FittedModel::Forest(forest) = &model else {
            panic!("expected a forest");
        };
        let tree = &forest.trees[0];
        assert_eq!(
            tree.nodes[0],
            TreeNode::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            }
        );
        assert_eq!(tree.nodes[1], TreeNode::Leaf { counts: [0, 1] });
        assert_eq!(tree.nodes[2], TreeNode::Leaf { counts: [1, 0] });
        assert_eq!(
            predict(&model, &sparse(1, &[(0, 0.9)])).unwrap(),
            Label::Positive
        );
        assert_eq!(predict(&model, &sparse(1, &[])).unwrap(), Label::Negative);
    }

    #[test]
    fn score_is_the_positive_tree_fraction() {
        let pos_tree = Tree {
            nodes: vec![TreeNode::Leaf { counts: [1, 0] }],
        };
        let neg_tree = Tree {
            nodes: vec![TreeNode::Leaf { counts: [0, 1] }],
        };
        let mut trees = vec![pos_tree.clone(); 73];
        trees.extend(vec![neg_tree.clone(); 27]);
        let forest = Forest { trees, dimension: 1 };
        let v = sparse(1, &[]);
        assert_eq!(forest.score(&v), 0.73);
        assert_eq!(forest.predict(&v), Label::Positive);

        let tied = Forest {
            trees: vec![pos_tree, neg_tree],
            dimension: 1,
        };
        assert_eq!(tied.predict(&v), Label::Positive);
        assert_eq!(tied.score(&v), 0.5);
    }

    #[test]
    fn leaf_count_tie_predicts_positive() {
        let tree = Tree {
            nodes: vec![TreeNode::Leaf { counts: [2, 2] }],
        };
        assert_eq!(tree.predict(&sparse(1, &[])), Label::Positive);
    }

    /// Distinct rows (unique feature-0 value per row) with both classes.
    fn distinct_rows(n: usize, features: usize, rng_seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = seed::rng(rng_seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let mut row: Vec<f64> = (0..features).map(|_| rng.gen_range(-0.01..0.01)).collect();
            row[0] += i as f64 * 0.1;
            rows.push(row);
            labels.push(if rng.gen_bool(0.5) {
                Label::Positive
            } else {
                Label::Negative
            });
        }
        labels[0] = Label::Positive;
        labels[n - 1] = Label::Negative;
        (rows, labels)
    }

    #[test]
    fn each_tree_is_pure_on_its_own_bootstrap_sample() {
        let (rows, labels) = distinct_rows(50, 6, 31);
        let data = dataset_from_dense(&rows, &labels);
        let master_seed = 5;
        let model = fit(&data, &forest_config(10, true, None, master_seed)).unwrap();
        let FittedModel::Forest(forest) = &model else {
            panic!("expected a forest");
        };
        for (i, tree) in forest.trees.iter().enumerate() {
            // the bootstrap draw is the first thing each tree's rng does,
            // so it can be replayed here
            let mut rng = seed::rng(seed::derive(master_seed, i as u64));
            let indices = draw_bootstrap(&mut rng, rows.len());
            for &idx in &indices {
                assert_eq!(
                    tree.predict(&data.matrix[idx]),
                    data.labels[idx],
                    "tree {i} misclassifies bootstrap member {idx}"
                );
            }
        }
    }

    #[test]
    fn full_data_forest_reaches_perfect_training_accuracy() {
        let (rows, labels) = distinct_rows(50, 6, 8);
        let data = dataset_from_dense(&rows, &labels);
        let model = fit(&data, &forest_config(1, false, None, 3)).unwrap();
        for (v, &l) in data.matrix.iter().zip(&data.labels) {
            assert_eq!(predict(&model, v).unwrap(), l);
        }
        let score = predict_score(&model, &data.matrix[0]).unwrap();
        assert_eq!(score, 1.0);
    }

    #[test]
    fn fitting_is_seed_deterministic() {
        let (rows, labels) = distinct_rows(30, 4, 2);
        let data = dataset_from_dense(&rows, &labels);
        let a = fit(&data, &forest_config(5, true, None, 11)).unwrap();
        let b = fit(&data, &forest_config(5, true, None, 11)).unwrap();
        assert_eq!(a, b);
        let c = fit(&data, &forest_config(5, true, None, 12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn validate_rejects_malformed_trees() {
        let backward = Forest {
            trees: vec![Tree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 0,
                        threshold: 0.5,
                        left: 0,
                        right: 1,
                    },
                    TreeNode::Leaf { counts: [1, 0] },
                ],
            }],
            dimension: 1,
        };
        assert!(backward.validate().unwrap_err().contains("backwards"));

        let wide_feature = Forest {
            trees: vec![Tree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 9,
                        threshold: 0.5,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf { counts: [1, 0] },
                    TreeNode::Leaf { counts: [0, 1] },
                ],
            }],
            dimension: 1,
        };
        assert!(wide_feature.validate().is_err());

        let nan_threshold = Forest {
            trees: vec![Tree {
                nodes: vec![
                    TreeNode::Split {
                        feature: 0,
                        threshold: f64::NAN,
                        left: 1,
                        right: 2,
                    },
                    TreeNode::Leaf { counts: [1, 0] },
                    TreeNode::Leaf { counts: [0, 1] },
                ],
            }],
            dimension: 1,
        };
        assert!(nan_threshold.validate().is_err());

        let empty_leaf = Forest {
            trees: vec![Tree {
                nodes: vec![TreeNode::Leaf { counts: [0, 0] }],
            }],
            dimension: 1,
        };
        assert!(empty_leaf.validate().is_err());

        let no_trees = Forest {
            trees: vec![],
            dimension: 1,
        };
        assert!(no_trees.validate().is_err());
    }

    #[test]
    fn zero_valued_features_participate_in_splits() {
        // implicit zeros must be grouped below the positives
        let data = dataset_from_dense(&[vec![0.0], vec![2.0]], &[Label::Negative, Label::Positive]);
        let model = fit(&data, &forest_config(1, false, Some(1), 0)).unwrap();
        let FittedModel::Forest(forest) = &model else {
            panic!("expected a forest");
        };
        assert_eq!(
            forest.trees[0].nodes[0],
            TreeNode::Split {
                feature: 0,
                threshold: 1.0,
                left: 1,
                right: 2,
            }
        );
    }

    proptest! {
        #[test]
        fn full_data_trees_reach_training_purity(
            raw in proptest::collection::vec((0u8..50, 0u8..50, proptest::bool::ANY), 2..25),
        ) {
            // dedupe rows so purity is always attainable
            let mut seen: BTreeMap<(u8, u8), bool> = BTreeMap::new();
            for (a, b, positive) in raw {
                seen.entry((a, b)).or_insert(positive);
            }
            if seen.len() < 2 {
                return Ok(());
            }
            let rows: Vec<Vec<f64>> = seen
                .keys()
                .map(|&(a, b)| vec![a as f64 * 0.25, b as f64 * 0.25])
                .collect();
            let mut labels: Vec<Label> = seen
                .values()
                .map(|&p| if p { Label::Positive } else { Label::Negative })
                .collect();
            let last = labels.len() - 1;
            labels[0] = Label::Positive;
            labels[last] = Label::Negative;

            let data = dataset_from_dense(&rows, &labels);
            // one candidate feature per split exercises the fallback scan
            let model = fit(&data, &forest_config(2, false, Some(1), 9)).unwrap();
            for (v, &l) in data.matrix.iter().zip(&data.labels) {
                prop_assert_eq!(predict(&model, v).unwrap(), l);
            }
        }
    }
}
