//! Bagged ensemble of CART trees with majority voting over fault labels.
//!
//! Each tree draws its bootstrap sample and split features from its own
//! ChaCha stream `(seed, tree_index)`, so trees can be trained in any order
//! or in parallel and the model is the same.

mod cv;
mod format;
mod scaler;
mod tree;

pub use cv::{cross_validate, evaluate, stratified_folds, ConfusionMatrix, CrossValidation};
pub use format::{parse_model, write_model, MODEL_FORMAT_VERSION};
pub use scaler::{normalize_apply, normalize_fit, Scaler};
pub use tree::{train_tree, StopRule, TreeNode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::FaultLabel;

/// Row-major feature matrix with one fault label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    feature_names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<FaultLabel>,
}

impl TrainingSet {
    pub fn new(feature_names: Vec<String>) -> Result<TrainingSet> {
        if feature_names.is_empty() {
            return Err(Error::InvalidArgument("training set needs at least one feature".into()));
        }
        Ok(TrainingSet { feature_names, values: Vec::new(), labels: Vec::new() })
    }

    pub fn push(&mut self, features: &[f64], label: FaultLabel) -> Result<()> {
        if features.len() != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), got: features.len() });
        }
        self.values.extend_from_slice(features);
        self.labels.push(label);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width()..(i + 1) * self.width()]
    }

    pub fn label(&self, i: usize) -> FaultLabel {
        self.labels[i]
    }

    pub fn labels(&self) -> &[FaultLabel] {
        &self.labels
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sorted distinct labels.
    pub fn distinct_labels(&self) -> Vec<FaultLabel> {
        let mut labels = self.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// New set holding the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> TrainingSet {
        let mut out = TrainingSet {
            feature_names: self.feature_names.clone(),
            values: Vec::with_capacity(rows.len() * self.width()),
            labels: Vec::with_capacity(rows.len()),
        };
        for &i in rows {
            out.values.extend_from_slice(self.row(i));
            out.labels.push(self.labels[i]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features examined per split; `None` means ⌊√F⌋ (at least 1).
    pub m_try: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 264, m_try: None, max_depth: None, min_samples_leaf: 1, seed: 0 }
    }
}

impl ForestParams {
    pub fn resolved_m_try(&self, width: usize) -> usize {
        self.m_try.unwrap_or_else(|| ((width as f64).sqrt().floor() as usize).max(1))
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule { max_depth: self.max_depth, min_samples_leaf: self.min_samples_leaf }
    }

    fn validate(&self, width: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        let m = self.resolved_m_try(width);
        if m == 0 || m > width {
            return Err(Error::InvalidConfig(format!("m_try must lie in 1..={width}, got {m}")));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// Whether trees are grown on the rayon pool or one after another.
/// Both produce identical models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestModel {
    pub trees: Vec<TreeNode>,
    pub m_try: usize,
    pub scaler: Scaler,
    pub feature_names: Vec<String>,
    /// Sorted labels seen in training.
    pub label_universe: Vec<FaultLabel>,
    pub params: ForestParams,
}

/// Plurality label with per-label vote counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub label: FaultLabel,
    /// Non-zero vote counts in label order.
    pub votes: Vec<(FaultLabel, usize)>,
}

/// Index of the first maximum, so ties go to the lowest label.
pub fn plurality(votes: &[usize]) -> usize {
    let mut best = 0;
    for (k, v) in votes.iter().enumerate() {
        if *v > votes[best] {
            best = k;
        }
    }
    best
}

/// Draw `n` row indices uniformly with replacement.
pub fn bootstrap_sample<R: Rng + ?Sized>(n_rows: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_rows == 0 {
        return Err(Error::Empty("cannot bootstrap from zero rows"));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("bootstrap size must be >= 1".into()));
    }
    Ok((0..n).map(|_| rng.gen_range(0..n_rows)).collect())
}

/// RNG stream for tree `index` of a forest seeded with `seed`.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Grow tree `index` on an already normalized set.
pub fn train_indexed_tree(normalized: &TrainingSet, params: &ForestParams, index: usize) -> Result<TreeNode> {
    let mut rng = tree_rng(params.seed, index);
    let rows = bootstrap_sample(normalized.len(), normalized.len(), &mut rng)?;
    train_tree(normalized, &rows, params.resolved_m_try(normalized.width()), &mut rng, params.stop_rule())
}

pub fn train_forest(set: &TrainingSet, params: &ForestParams) -> Result<RandomForestModel> {
    train_forest_with(set, params, Execution::Parallel)
}

pub fn train_forest_with(set: &TrainingSet, params: &ForestParams, execution: Execution) -> Result<RandomForestModel> {
    params.validate(set.width())?;
    let label_universe = set.distinct_labels();
    if label_universe.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "training needs at least 2 distinct labels, got {}",
            label_universe.len()
        )));
    }
    let scaler = normalize_fit(set)?;
    let normalized = scaler.apply_set(set)?;

    let trees = match execution {
        Execution::Parallel => (0..params.n_trees)
            .into_par_iter()
            .map(|i| train_indexed_tree(&normalized, params, i))
            .collect::<Result<Vec<_>>>()?,
        Execution::Sequential => {
            (0..params.n_trees).map(|i| train_indexed_tree(&normalized, params, i)).collect::<Result<Vec<_>>>()?
        }
    };

    Ok(RandomForestModel {
        trees,
        m_try: params.resolved_m_try(set.width()),
        scaler,
        feature_names: set.feature_names().to_vec(),
        label_universe,
        params: params.clone(),
    })
}

impl RandomForestModel {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn seed(&self) -> u64 {
        self.params.seed
    }

    fn tally(&self, normalized: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.label_universe.len()];
        for tree in &self.trees {
            let label = tree.predict(normalized);
            // leaves only ever carry universe labels
            let k = self.label_universe.binary_search(&label).expect("leaf label outside universe");
            votes[k] += 1;
        }
        votes
    }

    /// Majority vote on raw (unnormalized) features.
    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let x = self.scaler.apply(features)?;
        let votes = self.tally(&x);
        Ok(Prediction {
            label: self.label_universe[plurality(&votes)],
            votes: self.label_universe.iter().zip(&votes).filter(|(_, v)| **v > 0).map(|(l, v)| (*l, *v)).collect(),
        })
    }

    pub fn predict_label(&self, features: &[f64]) -> Result<FaultLabel> {
        let x = self.scaler.apply(features)?;
        Ok(self.label_universe[plurality(&self.tally(&x))])
    }

    /// Predict every row of `set`, in parallel.
    pub fn predict_set(&self, set: &TrainingSet) -> Result<Vec<FaultLabel>> {
        if set.width() != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), got: set.width() });
        }
        (0..set.len()).into_par_iter().map(|i| self.predict_label(set.row(i))).collect()
    }

    /// Checks the structural invariants: trees present, leaf labels drawn
    /// from the universe, split features in range.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::InvalidArgument("model has no trees".into()));
        }
        if self.scaler.width() != self.width() {
            return Err(Error::WidthMismatch { expected: self.width(), got: self.scaler.width() });
        }
        if self.label_universe.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("label universe must be sorted and unique".into()));
        }
        for tree in &self.trees {
            let mut bad = None;
            tree.visit_leaves(&mut |l| {
                if self.label_universe.binary_search(&l).is_err() {
                    bad = Some(l);
                }
            });
            if let Some(l) = bad {
                return Err(Error::InvalidArgument(format!("leaf label {l} not in label universe")));
            }
            if max_feature(tree).is_some_and(|f| f >= self.width()) {
                return Err(Error::InvalidArgument("split feature index out of range".into()));
            }
        }
        Ok(())
    }
}

fn max_feature(node: &TreeNode) -> Option<usize> {
    match node {
        TreeNode::Leaf { .. } => None,
        TreeNode::Split { feature, left, right, .. } => {
            Some((*feature).max(max_feature(left).unwrap_or(0)).max(max_feature(right).unwrap_or(0)))
        }
    }
}
