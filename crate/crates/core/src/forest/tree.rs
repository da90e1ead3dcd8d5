//! CART classification tree grown by greedy Gini minimization.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::label::FaultLabel;

use super::TrainingSet;

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// Rows with `value <= threshold` go left, the rest go right.
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf {
        label: FaultLabel,
        /// Training rows per label reaching this leaf. Not persisted.
        class_counts: Vec<(FaultLabel, usize)>,
    },
}

impl TreeNode {
    pub fn leaf(label: FaultLabel) -> TreeNode {
        TreeNode::Leaf { label, class_counts: Vec::new() }
    }

    pub fn predict(&self, features: &[f64]) -> FaultLabel {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return *label,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if features[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub(crate) fn visit_leaves(&self, f: &mut impl FnMut(FaultLabel)) {
        match self {
            TreeNode::Leaf { label, .. } => f(*label),
            TreeNode::Split { left, right, .. } => {
                left.visit_leaves(f);
                right.visit_leaves(f);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule { max_depth: None, min_samples_leaf: 1 }
    }
}

/// Grow one tree on the rows of `set` named by `rows` (duplicates allowed,
/// as produced by bootstrap sampling).
///
/// At every node features are visited in a random order and the first
/// `m_try` that are not constant on the node are evaluated. Candidate
/// thresholds are midpoints between consecutive distinct values. Equal
/// gains go to the lower feature index, then the lower threshold.
pub fn train_tree<R: Rng + ?Sized>(
    set: &TrainingSet,
    rows: &[usize],
    m_try: usize,
    rng: &mut R,
    stop: StopRule,
) -> Result<TreeNode> {
    if rows.is_empty() {
        return Err(Error::Empty("tree needs at least one row"));
    }
    if m_try == 0 || m_try > set.width() {
        return Err(Error::InvalidArgument(format!("m_try must lie in 1..={}, got {m_try}", set.width())));
    }
    if stop.min_samples_leaf == 0 {
        return Err(Error::InvalidArgument("min_samples_leaf must be >= 1".into()));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= set.len()) {
        return Err(Error::InvalidArgument(format!("row index {bad} out of range")));
    }

    let universe = set.distinct_labels();
    let classes: Vec<u16> =
        set.labels().iter().map(|l| universe.binary_search(l).expect("label from set") as u16).collect();

    let mut builder = Builder {
        set,
        classes: &classes,
        universe: &universe,
        m_try,
        stop,
        rng,
        pairs: Vec::with_capacity(rows.len()),
        features: (0..set.width()).collect(),
    };
    let mut idx = rows.to_vec();
    Ok(builder.grow(&mut idx, 0))
}

struct Builder<'a, R: ?Sized> {
    set: &'a TrainingSet,
    classes: &'a [u16],
    universe: &'a [FaultLabel],
    m_try: usize,
    stop: StopRule,
    rng: &'a mut R,
    pairs: Vec<(f64, u16)>,
    features: Vec<usize>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.universe.len()];
        for &i in idx {
            counts[self.classes[i] as usize] += 1;
        }
        counts
    }

    fn make_leaf(&self, counts: &[usize]) -> TreeNode {
        // first maximum: ties go to the lowest label
        let mut best = 0;
        for (k, c) in counts.iter().enumerate() {
            if *c > counts[best] {
                best = k;
            }
        }
        TreeNode::Leaf {
            label: self.universe[best],
            class_counts: counts
                .iter()
                .enumerate()
                .filter(|(_, c)| **c > 0)
                .map(|(k, c)| (self.universe[k], *c))
                .collect(),
        }
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> TreeNode {
        let counts = self.counts(idx);
        let pure = counts.iter().filter(|c| **c > 0).count() <= 1;
        let depth_reached = self.stop.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || idx.len() < 2 * self.stop.min_samples_leaf {
            return self.make_leaf(&counts);
        }

        let Some(split) = self.best_split(idx, &counts) else {
            return self.make_leaf(&counts);
        };

        let width = self.set.width();
        let values = self.set.values();
        let mut boundary = 0;
        for k in 0..idx.len() {
            if values[idx[k] * width + split.feature] <= split.threshold {
                idx.swap(k, boundary);
                boundary += 1;
            }
        }
        let (left_idx, right_idx) = idx.split_at_mut(boundary);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn is_constant(&self, idx: &[usize], feature: usize) -> bool {
        let width = self.set.width();
        let values = self.set.values();
        let first = values[idx[0] * width + feature];
        idx.iter().all(|&i| values[i * width + feature] == first)
    }

    fn best_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<Candidate> {
        let mut order = std::mem::take(&mut self.features);
        order.shuffle(self.rng);
        let mut chosen: Vec<usize> =
            order.iter().copied().filter(|&f| !self.is_constant(idx, f)).take(self.m_try).collect();
        self.features = order;
        chosen.sort_unstable();

        // n · (weighted child Gini) = n - score, with
        // score = Σ_left c²/n_l + Σ_right c²/n_r.
        let n = idx.len() as f64;
        let parent_sq: u64 = counts.iter().map(|&c| (c as u64) * (c as u64)).sum();
        let parent_score = parent_sq as f64 / n;

        let mut best: Option<Candidate> = None;
        for feature in chosen {
            if let Some(c) = self.best_threshold(idx, counts, feature, parent_sq) {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        best.filter(|b| b.score > parent_score * (1.0 + 1e-12))
    }

    fn best_threshold(&mut self, idx: &[usize], counts: &[usize], feature: usize, parent_sq: u64) -> Option<Candidate> {
        let width = self.set.width();
        let values = self.set.values();
        self.pairs.clear();
        self.pairs.extend(idx.iter().map(|&i| (values[i * width + feature], self.classes[i])));
        self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let n = self.pairs.len();
        let min_leaf = self.stop.min_samples_leaf;
        let mut left = vec![0u64; counts.len()];
        let mut right: Vec<u64> = counts.iter().map(|&c| c as u64).collect();
        let mut left_sq = 0u64;
        let mut right_sq = parent_sq;

        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            let c = self.pairs[k].1 as usize;
            left_sq += 2 * left[c] + 1;
            left[c] += 1;
            right_sq -= 2 * right[c] - 1;
            right[c] -= 1;

            let (lo, hi) = (self.pairs[k].0, self.pairs[k + 1].0);
            let n_left = k + 1;
            let n_right = n - n_left;
            if lo == hi || n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let score = left_sq as f64 / n_left as f64 + right_sq as f64 / n_right as f64;
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mut threshold = 0.5 * (lo + hi);
                if !(threshold >= lo && threshold < hi) {
                    threshold = lo;
                }
                best = Some(Candidate { feature, threshold, score });
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn label(s: &str) -> FaultLabel {
        s.parse().unwrap()
    }

    fn set_from(rows: &[(Vec<f64>, &str)]) -> TrainingSet {
        let width = rows[0].0.len();
        let mut set = TrainingSet::new((0..width).map(|k| format!("f{k}")).collect()).unwrap();
        for (x, l) in rows {
            set.push(x, label(l)).unwrap();
        }
        set
    }

    fn all_rows(set: &TrainingSet) -> Vec<usize> {
        (0..set.len()).collect()
    }

    #[test]
    fn separable_single_feature_splits_at_midpoint() {
        let mut rows = vec![(vec![0.0], "000000"); 50];
        rows.extend(vec![(vec![1.0], "100000"); 50]);
        let set = set_from(&rows);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, StopRule::default()).unwrap();
        match &tree {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
                assert!(matches!(**left, TreeNode::Leaf { .. }));
                assert!(matches!(**right, TreeNode::Leaf { .. }));
            }
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
        assert_eq!(tree.predict(&[0.0]), label("000000"));
        assert_eq!(tree.predict(&[1.0]), label("100000"));
    }

    #[test]
    fn pure_input_is_one_leaf() {
        let set = set_from(&[(vec![0.1], "001000"), (vec![0.7], "001000")]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, StopRule::default()).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&[5.0]), label("001000"));
    }

    #[test]
    fn identical_rows_tie_goes_to_lowest_label() {
        let set = set_from(&[(vec![0.3], "100000"), (vec![0.3], "000100")]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, StopRule::default()).unwrap();
        assert_eq!(
            tree,
            TreeNode::Leaf { label: label("000100"), class_counts: vec![(label("000100"), 1), (label("100000"), 1)] }
        );
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // both features separate the classes equally well
        let set = set_from(&[
            (vec![0.0, 0.0], "000000"),
            (vec![0.0, 0.0], "000000"),
            (vec![1.0, 1.0], "010000"),
            (vec![1.0, 1.0], "010000"),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = train_tree(&set, &all_rows(&set), 2, &mut rng, StopRule::default()).unwrap();
        assert!(matches!(tree, TreeNode::Split { feature: 0, .. }));
    }

    #[test]
    fn constant_features_do_not_use_up_m_try() {
        // feature 0 is constant; with m_try = 1 the tree must still find feature 1
        let set = set_from(&[(vec![5.0, 0.0], "000000"), (vec![5.0, 1.0], "000001")]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, StopRule::default()).unwrap();
            assert!(matches!(tree, TreeNode::Split { feature: 1, .. }));
        }
    }

    #[test]
    fn stop_rules() {
        let rows: Vec<(Vec<f64>, &str)> =
            (0..16).map(|k| (vec![k as f64], if k % 2 == 0 { "000000" } else { "100000" })).collect();
        let set = set_from(&rows);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stop = StopRule { max_depth: Some(2), min_samples_leaf: 1 };
        let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, stop).unwrap();
        assert!(tree.depth() <= 2);

        let stop = StopRule { max_depth: None, min_samples_leaf: 4 };
        let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, stop).unwrap();
        fn min_leaf(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { class_counts, .. } => class_counts.iter().map(|c| c.1).sum(),
                TreeNode::Split { left, right, .. } => min_leaf(left).min(min_leaf(right)),
            }
        }
        assert!(min_leaf(&tree) >= 4);
    }

    #[test]
    fn accepted_splits_reduce_impurity() {
        fn gini(counts: &[(FaultLabel, usize)]) -> (f64, usize) {
            let n: usize = counts.iter().map(|c| c.1).sum();
            let g = 1.0 - counts.iter().map(|c| (c.1 as f64 / n as f64).powi(2)).sum::<f64>();
            (g, n)
        }
        fn merged(node: &TreeNode) -> Vec<(FaultLabel, usize)> {
            match node {
                TreeNode::Leaf { class_counts, .. } => class_counts.clone(),
                TreeNode::Split { left, right, .. } => {
                    let mut all = merged(left);
                    for (l, c) in merged(right) {
                        match all.iter_mut().find(|e| e.0 == l) {
                            Some(e) => e.1 += c,
                            None => all.push((l, c)),
                        }
                    }
                    all
                }
            }
        }
        fn check(node: &TreeNode) {
            if let TreeNode::Split { left, right, .. } = node {
                let (gp, _) = gini(&merged(node));
                let (gl, nl) = gini(&merged(left));
                let (gr, nr) = gini(&merged(right));
                let weighted = (gl * nl as f64 + gr * nr as f64) / (nl + nr) as f64;
                assert!(weighted < gp);
                check(left);
                check(right);
            }
        }
        let rows: Vec<(Vec<f64>, &str)> = (0..60)
            .map(|k| {
                let x = (k * 37 % 60) as f64;
                let y = (k * 11 % 7) as f64;
                (vec![x, y], ["000000", "100000", "001000"][(k * 7 % 3) as usize])
            })
            .collect();
        let set = set_from(&rows);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tree = train_tree(&set, &all_rows(&set), 1, &mut rng, StopRule::default()).unwrap();
        check(&tree);
    }

    #[test]
    fn errors() {
        let set = set_from(&[(vec![0.0], "000000")]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(train_tree(&set, &[], 1, &mut rng, StopRule::default()).is_err());
        assert!(train_tree(&set, &[0], 2, &mut rng, StopRule::default()).is_err());
        assert!(train_tree(&set, &[3], 1, &mut rng, StopRule::default()).is_err());
    }
}
