//! CART decision trees split by Gini impurity, grown best-first so a leaf
//! budget can be enforced, and bagged into a random forest.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::traffic::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, sample: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label } => return *label as usize,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if sample[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Sequence of split features from the root, depth-first. Used to compare
    /// tree structure independently of thresholds.
    pub fn split_features(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = &self.nodes[at]
            {
                out.push(*feature);
                stack.push(*right);
                stack.push(*left);
            }
        }
        out
    }

    pub fn split_thresholds(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            if let Node::Split {
                threshold,
                left,
                right,
                ..
            } = &self.nodes[at]
            {
                out.push(*threshold);
                stack.push(*right);
                stack.push(*left);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_leaves: usize,
    /// None: floor(sqrt(d)), at least 1.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
}

impl ForestModel {
    pub fn fit(rows: &[Vec<f64>], labels: &[u8], params: ForestParams, seed: u64) -> ForestModel {
        let d = rows.first().map_or(0, |r| r.len());
        let m = params
            .features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
            .clamp(1, d.max(1));
        let trees = (0..params.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
                let indices: Vec<usize> = if params.bootstrap {
                    (0..rows.len())
                        .map(|_| rng.gen_range(0..rows.len()))
                        .collect()
                } else {
                    (0..rows.len()).collect()
                };
                grow_tree(
                    rows,
                    labels,
                    indices,
                    params.max_depth,
                    params.max_leaves,
                    m,
                    &mut rng,
                )
            })
            .collect();
        ForestModel { trees }
    }

    /// Majority vote over trees; ties go to the smaller class index.
    pub fn predict(&self, sample: &[f64]) -> usize {
        let mut votes = [0usize; 2];
        for tree in &self.trees {
            votes[tree.predict(sample)] += 1;
        }
        usize::from(votes[1] > votes[0])
    }
}

struct Candidate {
    /// Total Gini decrease: n*g(node) - (nl*g(left) + nr*g(right)).
    decrease: f64,
    /// Creation order; lower wins ties so growth is deterministic.
    order: usize,
    node_slot: usize,
    depth: usize,
    feature: usize,
    threshold: f64,
    indices: Vec<usize>,
}

/// Best-first CART growth: repeatedly split the frontier leaf with the
/// largest total impurity decrease until the leaf budget or depth limit is
/// reached.
fn grow_tree(
    rows: &[Vec<f64>],
    labels: &[u8],
    root_indices: Vec<usize>,
    max_depth: usize,
    max_leaves: usize,
    features_per_split: usize,
    rng: &mut ChaCha8Rng,
) -> DecisionTree {
    let mut nodes = vec![Node::Leaf {
        label: majority(labels, &root_indices),
    }];
    let mut frontier: Vec<Candidate> = Vec::new();
    let mut order = 0usize;

    if let Some(c) = best_split(
        rows,
        labels,
        &root_indices,
        0,
        0,
        features_per_split,
        rng,
        &mut order,
    ) {
        if 0 < max_depth {
            frontier.push(c);
        }
    }

    let mut leaves = 1usize;
    while leaves < max_leaves {
        // pop the candidate with the largest decrease (tie: earliest created)
        let best_at = match frontier.iter().enumerate().max_by(|(_, a), (_, b)| {
            a.decrease
                .total_cmp(&b.decrease)
                .then(b.order.cmp(&a.order))
        }) {
            Some((i, _)) => i,
            None => break,
        };
        let cand = frontier.swap_remove(best_at);

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = cand
            .indices
            .iter()
            .partition(|&&i| rows[i][cand.feature] <= cand.threshold);
        let left_slot = nodes.len();
        nodes.push(Node::Leaf {
            label: majority(labels, &left_idx),
        });
        let right_slot = nodes.len();
        nodes.push(Node::Leaf {
            label: majority(labels, &right_idx),
        });
        nodes[cand.node_slot] = Node::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: left_slot,
            right: right_slot,
        };
        leaves += 1;

        let child_depth = cand.depth + 1;
        if child_depth < max_depth {
            for (slot, idx) in [(left_slot, left_idx), (right_slot, right_idx)] {
                if let Some(c) = best_split(
                    rows,
                    labels,
                    &idx,
                    slot,
                    child_depth,
                    features_per_split,
                    rng,
                    &mut order,
                ) {
                    frontier.push(c);
                }
            }
        }
    }

    DecisionTree { nodes }
}

fn majority(labels: &[u8], indices: &[usize]) -> u8 {
    let mut counts = [0usize; 2];
    for &i in indices {
        counts[labels[i] as usize] += 1;
    }
    u8::from(counts[1] > counts[0])
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Finds the best (feature, midpoint threshold) over a random feature subset.
/// Ties are broken toward the lower feature index, then the lower threshold.
#[allow(clippy::too_many_arguments)]
fn best_split(
    rows: &[Vec<f64>],
    labels: &[u8],
    indices: &[usize],
    node_slot: usize,
    depth: usize,
    features_per_split: usize,
    rng: &mut ChaCha8Rng,
    order: &mut usize,
) -> Option<Candidate> {
    let n = indices.len();
    if n < 2 {
        return None;
    }
    let mut total = [0usize; 2];
    for &i in indices {
        total[labels[i] as usize] += 1;
    }
    if total[0] == 0 || total[1] == 0 {
        return None; // pure node
    }
    let node_impurity = n as f64 * gini(total);

    let d = rows[0].len();
    let mut pool: Vec<usize> = (0..d).collect();
    if features_per_split < d {
        pool.shuffle(rng);
        pool.truncate(features_per_split);
        pool.sort_unstable();
    }

    let mut best: Option<(f64, usize, f64)> = None; // (decrease, feature, threshold)
    let mut values: Vec<(f64, u8)> = Vec::with_capacity(n);
    for &feature in &pool {
        values.clear();
        values.extend(indices.iter().map(|&i| (rows[i][feature], labels[i])));
        values.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = [0usize; 2];
        for w in 1..n {
            left[values[w - 1].1 as usize] += 1;
            if values[w].0 > values[w - 1].0 {
                let right = [total[0] - left[0], total[1] - left[1]];
                let weighted = (w as f64) * gini(left) + ((n - w) as f64) * gini(right);
                let decrease = node_impurity - weighted;
                let threshold = (values[w - 1].0 + values[w].0) / 2.0;
                let better = match &best {
                    None => true,
                    Some((bd, _, _)) => decrease > *bd,
                };
                if better {
                    best = Some((decrease, feature, threshold));
                }
            }
        }
    }

    best.map(|(decrease, feature, threshold)| {
        let c = Candidate {
            decrease,
            order: *order,
            node_slot,
            depth,
            feature,
            threshold,
            indices: indices.to_vec(),
        };
        *order += 1;
        c
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    // Exhaustive best-Gini-split oracle for 1-D data: evaluate every midpoint
    // between distinct consecutive sorted values.
    fn oracle_best_split_1d(values: &[f64], labels: &[u8]) -> (f64, f64) {
        let mut pairs: Vec<(f64, u8)> =
            values.iter().cloned().zip(labels.iter().cloned()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut total = [0usize; 2];
        for &(_, l) in &pairs {
            total[l as usize] += 1;
        }
        let mut best_threshold = f64::NAN;
        let mut best_weighted = f64::INFINITY;
        let mut left = [0usize; 2];
        for w in 1..n {
            left[pairs[w - 1].1 as usize] += 1;
            if pairs[w].0 > pairs[w - 1].0 {
                let right = [total[0] - left[0], total[1] - left[1]];
                let weighted = (w as f64) * gini(left) + ((n - w) as f64) * gini(right);
                if weighted < best_weighted {
                    best_weighted = weighted;
                    best_threshold = (pairs[w - 1].0 + pairs[w].0) / 2.0;
                }
            }
        }
        (best_threshold, best_weighted)
    }

    fn plain_tree_params() -> ForestParams {
        ForestParams {
            n_trees: 1,
            max_depth: 64,
            max_leaves: usize::MAX,
            features_per_split: Some(1),
            bootstrap: false,
        }
    }

    #[test]
    fn depth_one_stump_matches_best_split_oracle() {
        let values = [0.1, 0.4, 0.9, 1.4, 2.0, 2.2, 3.0, 3.3];
        let labels = [0u8, 0, 0, 1, 0, 1, 1, 1];
        let params = ForestParams {
            max_depth: 1,
            ..plain_tree_params()
        };
        let forest = ForestModel::fit(&one_d(&values), &labels.to_vec(), params, 0);
        let tree = &forest.trees[0];
        let (oracle_threshold, _) = oracle_best_split_1d(&values, &labels);
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert!((threshold - oracle_threshold).abs() < 1e-12);
            }
            other => panic!("expected a root split, got {other:?}"),
        }
        // stump predictions match thresholding by the oracle split
        for &v in &values {
            let side_labels: Vec<u8> = values
                .iter()
                .zip(&labels)
                .filter(|(x, _)| (**x <= oracle_threshold) == (v <= oracle_threshold))
                .map(|(_, &l)| l)
                .collect();
            let maj =
                u8::from(side_labels.iter().filter(|&&l| l == 1).count() * 2 > side_labels.len());
            assert_eq!(forest.predict(&[v]), maj as usize);
        }
    }

    #[test]
    fn unlimited_single_tree_separates_threshold_data_exactly() {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            values.push(i as f64 * 0.37);
            labels.push(u8::from(i as f64 * 0.37 > 5.0));
        }
        let forest = ForestModel::fit(&one_d(&values), &labels, plain_tree_params(), 7);
        for (v, &l) in values.iter().zip(&labels) {
            assert_eq!(forest.predict(&[*v]), l as usize);
        }
        let (oracle_threshold, _) = oracle_best_split_1d(&values, &labels);
        match &forest.trees[0].nodes[0] {
            Node::Split { threshold, .. } => assert!((threshold - oracle_threshold).abs() < 1e-12),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn max_leaves_caps_tree_size() {
        let values: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let labels: Vec<u8> = (0..64).map(|i| (i / 2 % 2) as u8).collect();
        let params = ForestParams {
            max_leaves: 4,
            ..plain_tree_params()
        };
        let forest = ForestModel::fit(&one_d(&values), &labels, params, 0);
        let leaves = forest.trees[0]
            .nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count();
        assert_eq!(leaves, 4);
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64, i as f64 * 0.1])
            .collect();
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let params = ForestParams {
            n_trees: 10,
            max_depth: 6,
            max_leaves: 32,
            features_per_split: None,
            bootstrap: true,
        };
        let a = ForestModel::fit(&rows, &labels, params, 5);
        let b = ForestModel::fit(&rows, &labels, params, 5);
        assert_eq!(a, b);
        let c = ForestModel::fit(&rows, &labels, params, 6);
        assert_ne!(a, c);
    }

    #[test]
    fn column_scaling_preserves_structure() {
        // scale feature 1 by 1024 (exact in binary floating point): trees must
        // pick the same features in the same order, with thresholds scaled.
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| vec![(i % 9) as f64 * 0.7, ((i * 13) % 17) as f64 * 0.3])
            .collect();
        let labels: Vec<u8> = (0..50).map(|i| u8::from((i % 9) >= 4)).collect();
        let params = ForestParams {
            n_trees: 5,
            max_depth: 6,
            max_leaves: 16,
            features_per_split: Some(2),
            bootstrap: true,
        };
        let base = ForestModel::fit(&rows, &labels, params, 3);
        let scaled_rows: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1] * 1024.0]).collect();
        let scaled = ForestModel::fit(&scaled_rows, &labels, params, 3);

        for (t0, t1) in base.trees.iter().zip(&scaled.trees) {
            assert_eq!(t0.split_features(), t1.split_features());
            let mut stack = vec![0usize];
            while let Some(at) = stack.pop() {
                if let (
                    Node::Split {
                        feature,
                        threshold: th0,
                        left,
                        right,
                    },
                    Node::Split { threshold: th1, .. },
                ) = (&t0.nodes[at], &t1.nodes[at])
                {
                    let scale = if *feature == 1 { 1024.0 } else { 1.0 };
                    assert!((th0 * scale - th1).abs() < 1e-9);
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
    }
}
