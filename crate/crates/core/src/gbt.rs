//! From-scratch gradient-boosted regression trees with squared-error loss.
//!
//! Two growth policies are supported: level-wise (every frontier node of a
//! depth level is split, classic GBM) and leaf-wise (the single leaf with
//! the largest variance reduction is split next, LightGBM style).
//!
//! Split search is exact: candidate thresholds are midpoints between
//! consecutive distinct sorted feature values. Ties in gain are broken by
//! lowest feature index, then lowest threshold, so fitting is fully
//! deterministic for a given input order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GbtError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("non-finite value in training input")]
    NonFiniteInput,
    #[error("feature count mismatch: model has {expected}, input row has {got}")]
    FeatureCountMismatch { expected: usize, got: usize },
    #[error("inconsistent feature count across rows")]
    RaggedFeatures,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Growth {
    LevelWise,
    LeafWise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtHyperparams {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub growth: Growth,
    /// Leaf budget, only consulted for leaf-wise growth.
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl GbtHyperparams {
    /// Level-wise defaults: depth 3 with the knobs the reference tooling
    /// leaves at stock values.
    pub fn level_wise(learning_rate: f64, n_estimators: usize) -> Self {
        Self {
            learning_rate,
            n_estimators,
            max_depth: 3,
            growth: Growth::LevelWise,
            max_leaves: 31,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }

    pub fn leaf_wise(learning_rate: f64, n_estimators: usize, max_depth: usize) -> Self {
        Self {
            learning_rate,
            n_estimators,
            max_depth,
            growth: Growth::LeafWise,
            max_leaves: 31,
            min_samples_leaf: 1,
            min_samples_split: 2,
        }
    }

    fn validate(&self) -> Result<(), GbtError> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(GbtError::InvalidHyperparams("learning_rate must be in (0, 1]".into()));
        }
        if self.n_estimators == 0 || self.max_depth == 0 {
            return Err(GbtError::InvalidHyperparams(
                "n_estimators and max_depth must be positive".into(),
            ));
        }
        if self.growth == Growth::LeafWise && self.max_leaves < 2 {
            return Err(GbtError::InvalidHyperparams("leaf-wise requires max_leaves >= 2".into()));
        }
        if self.min_samples_leaf == 0 || self.min_samples_split < 2 {
            return Err(GbtError::InvalidHyperparams(
                "min_samples_leaf >= 1 and min_samples_split >= 2 required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// A single regression tree stored as a node array; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Internal { feature, threshold, left, right } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Fitted boosting ensemble: `predict(x) = base_value + lr * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtEnsemble {
    pub base_value: f64,
    pub trees: Vec<RegressionTree>,
    pub hyperparams: GbtHyperparams,
    pub n_features: usize,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_rows: Vec<usize>,
    right_rows: Vec<usize>,
    left_value: f64,
    right_value: f64,
}

/// Best variance-reduction split for the rows of one node, or None when no
/// admissible split improves on the parent SSE.
fn best_split(
    features: &[Vec<f64>],
    residuals: &[f64],
    rows: &[usize],
    hp: &GbtHyperparams,
) -> Option<SplitCandidate> {
    let n = rows.len();
    if n < hp.min_samples_split {
        return None;
    }
    let n_features = features[rows[0]].len();
    let sum: f64 = rows.iter().map(|&r| residuals[r]).sum();
    let sum_sq: f64 = rows.iter().map(|&r| residuals[r] * residuals[r]).sum();
    let parent_sse = sum_sq - sum * sum / n as f64;

    let mut best: Option<SplitCandidate> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..n_features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&r| (features[r][feature], residuals[r])));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for k in 0..n - 1 {
            left_sum += sorted[k].1;
            left_sq += sorted[k].1 * sorted[k].1;
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < hp.min_samples_leaf || n_right < hp.min_samples_leaf {
                continue;
            }
            let right_sum = sum - left_sum;
            let right_sq = sum_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            let gain = parent_sse - sse;
            // Strictly-greater keeps the lowest feature index and lowest
            // threshold on ties (features and thresholds scanned ascending).
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                let threshold = (sorted[k].0 + sorted[k + 1].0) / 2.0;
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                for &r in rows {
                    if features[r][feature] <= threshold {
                        left_rows.push(r);
                    } else {
                        right_rows.push(r);
                    }
                }
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    gain,
                    left_value: left_sum / n_left as f64,
                    right_value: right_sum / n_right as f64,
                    left_rows,
                    right_rows,
                });
            }
        }
    }
    best
}

fn leaf_mean(residuals: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&r| residuals[r]).sum::<f64>() / rows.len() as f64
}

fn grow_level_wise(
    features: &[Vec<f64>],
    residuals: &[f64],
    hp: &GbtHyperparams,
) -> RegressionTree {
    let all_rows: Vec<usize> = (0..residuals.len()).collect();
    let mut nodes = vec![Node::Leaf { value: leaf_mean(residuals, &all_rows) }];
    // Breadth-first frontier: every node of a depth level is expanded before
    // the next level starts. (node index, rows, depth)
    let mut frontier = std::collections::VecDeque::from([(0usize, all_rows, 0usize)]);
    while let Some((idx, rows, depth)) = frontier.pop_front() {
        if depth >= hp.max_depth {
            continue;
        }
        if let Some(split) = best_split(features, residuals, &rows, hp) {
            let left = nodes.len();
            nodes.push(Node::Leaf { value: split.left_value });
            let right = nodes.len();
            nodes.push(Node::Leaf { value: split.right_value });
            nodes[idx] =
                Node::Internal { feature: split.feature, threshold: split.threshold, left, right };
            frontier.push_back((left, split.left_rows, depth + 1));
            frontier.push_back((right, split.right_rows, depth + 1));
        }
    }
    RegressionTree { nodes }
}

fn grow_leaf_wise(
    features: &[Vec<f64>],
    residuals: &[f64],
    hp: &GbtHyperparams,
) -> RegressionTree {
    let all_rows: Vec<usize> = (0..residuals.len()).collect();
    let mut nodes = vec![Node::Leaf { value: leaf_mean(residuals, &all_rows) }];
    // Leaves that can still be split, with their precomputed best split.
    let mut open: Vec<(usize, usize, Vec<usize>, Option<SplitCandidate>)> = Vec::new();
    let root_split = best_split(features, residuals, &all_rows, hp);
    open.push((0, 0, all_rows, root_split));
    let mut leaves = 1usize;
    while leaves < hp.max_leaves {
        // Lowest open-list position wins ties, so the earliest-created leaf
        // with the maximum gain is split next.
        let pick = open
            .iter()
            .enumerate()
            .filter(|(_, (_, _, _, s))| s.is_some())
            .max_by(|(ia, (_, _, _, a)), (ib, (_, _, _, b))| {
                let (ga, gb) = (a.as_ref().unwrap().gain, b.as_ref().unwrap().gain);
                ga.total_cmp(&gb).then(ib.cmp(ia))
            })
            .map(|(i, _)| i);
        let Some(pos) = pick else { break };
        let (idx, depth, _rows, split) = open.swap_remove(pos);
        let split = split.unwrap();
        let left = nodes.len();
        nodes.push(Node::Leaf { value: split.left_value });
        let right = nodes.len();
        nodes.push(Node::Leaf { value: split.right_value });
        nodes[idx] =
            Node::Internal { feature: split.feature, threshold: split.threshold, left, right };
        leaves += 1;
        for (child, rows) in [(left, split.left_rows), (right, split.right_rows)] {
            let child_split = if depth + 1 < hp.max_depth {
                best_split(features, residuals, &rows, hp)
            } else {
                None
            };
            open.push((child, depth + 1, rows, child_split));
        }
    }
    RegressionTree { nodes }
}

/// Squared-error gradient boosting. Residuals start at
/// `targets - mean(targets)`; every tree fits the residuals greedily and
/// residuals shrink by `learning_rate * tree` predictions.
///
/// Fitting is deterministic; `_seed` is part of the contract for callers
/// that derive per-fit seeds but is unused because nothing is sampled.
pub fn fit(
    features: &[Vec<f64>],
    targets: &[f64],
    hp: &GbtHyperparams,
    _seed: u64,
) -> Result<GbtEnsemble, GbtError> {
    hp.validate()?;
    if features.is_empty() || targets.is_empty() || features.len() != targets.len() {
        return Err(GbtError::EmptyTrainingSet);
    }
    let n_features = features[0].len();
    for row in features {
        if row.len() != n_features {
            return Err(GbtError::RaggedFeatures);
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GbtError::NonFiniteInput);
        }
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(GbtError::NonFiniteInput);
    }

    let base_value = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut residuals: Vec<f64> = targets.iter().map(|t| t - base_value).collect();
    let mut trees = Vec::with_capacity(hp.n_estimators);
    for _ in 0..hp.n_estimators {
        let tree = match hp.growth {
            Growth::LevelWise => grow_level_wise(features, &residuals, hp),
            Growth::LeafWise => grow_leaf_wise(features, &residuals, hp),
        };
        for (r, row) in residuals.iter_mut().zip(features) {
            *r -= hp.learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Ok(GbtEnsemble { base_value, trees, hyperparams: hp.clone(), n_features })
}

pub fn predict(model: &GbtEnsemble, features: &[Vec<f64>]) -> Result<Vec<f64>, GbtError> {
    let mut out = Vec::with_capacity(features.len());
    for row in features {
        if row.len() != model.n_features {
            return Err(GbtError::FeatureCountMismatch {
                expected: model.n_features,
                got: row.len(),
            });
        }
        out.push(predict_row(model, row));
    }
    Ok(out)
}

pub fn predict_row(model: &GbtEnsemble, row: &[f64]) -> f64 {
    model.base_value
        + model.hyperparams.learning_rate
            * model.trees.iter().map(|t| t.predict_row(row)).sum::<f64>()
}

/// Model dump for debugging; not a stability contract.
pub fn to_json(model: &GbtEnsemble) -> String {
    serde_json::to_string_pretty(model).expect("ensemble is serializable")
}

#[cfg(test)]
pub mod oracle {
    //! Exhaustive brute-force stump search, independent of the fitting path.

    pub struct BruteStump {
        pub feature: usize,
        pub threshold: f64,
        pub left_value: f64,
        pub right_value: f64,
        pub sse: f64,
    }

    /// Tries every feature and every midpoint threshold, keeping the first
    /// (lowest feature, lowest threshold) split with minimal total SSE.
    pub fn best_stump(features: &[Vec<f64>], targets: &[f64]) -> Option<BruteStump> {
        let n = targets.len();
        let n_features = features[0].len();
        let mut best: Option<BruteStump> = None;
        for feature in 0..n_features {
            let mut values: Vec<f64> = features.iter().map(|r| r[feature]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for pair in values.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
                for i in 0..n {
                    if features[i][feature] <= threshold {
                        ls += targets[i];
                        ln += 1;
                    } else {
                        rs += targets[i];
                        rn += 1;
                    }
                }
                if ln == 0 || rn == 0 {
                    continue;
                }
                let (lm, rm) = (ls / ln as f64, rs / rn as f64);
                let sse: f64 = (0..n)
                    .map(|i| {
                        let m = if features[i][feature] <= threshold { lm } else { rm };
                        (targets[i] - m).powi(2)
                    })
                    .sum();
                if best.as_ref().map_or(true, |b| sse < b.sse - 1e-12) {
                    best = Some(BruteStump {
                        feature,
                        threshold,
                        left_value: lm,
                        right_value: rm,
                        sse,
                    });
                }
            }
        }
        best
    }
}
