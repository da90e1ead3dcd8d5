use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::label::FaultLabel;

use super::{train_forest, ForestParams, RandomForestModel, TrainingSet};

/// Rows are actual labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    labels: Vec<FaultLabel>,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(mut labels: Vec<FaultLabel>) -> ConfusionMatrix {
        labels.sort_unstable();
        labels.dedup();
        let n = labels.len();
        ConfusionMatrix { labels, counts: vec![vec![0; n]; n] }
    }

    /// Matrix over the union of both label sequences.
    pub fn from_pairs(actual: &[FaultLabel], predicted: &[FaultLabel]) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::new(actual.iter().chain(predicted).copied().collect());
        for (a, p) in actual.iter().zip(predicted) {
            m.record(*a, *p);
        }
        m
    }

    fn index(&mut self, label: FaultLabel) -> usize {
        match self.labels.binary_search(&label) {
            Ok(i) => i,
            Err(i) => {
                self.labels.insert(i, label);
                for row in self.counts.iter_mut() {
                    row.insert(i, 0);
                }
                self.counts.insert(i, vec![0; self.labels.len()]);
                i
            }
        }
    }

    pub fn record(&mut self, actual: FaultLabel, predicted: FaultLabel) {
        let a = self.index(actual);
        let p = self.index(predicted);
        self.counts[a][p] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (i, a) in other.labels.iter().enumerate() {
            for (j, p) in other.labels.iter().enumerate() {
                let c = other.counts[i][j];
                if c > 0 {
                    let (ai, pi) = (self.index(*a), self.index(*p));
                    self.counts[ai][pi] += c;
                }
            }
        }
    }

    pub fn labels(&self) -> &[FaultLabel] {
        &self.labels
    }

    pub fn count(&self, actual: FaultLabel, predicted: FaultLabel) -> usize {
        match (self.labels.binary_search(&actual), self.labels.binary_search(&predicted)) {
            (Ok(a), Ok(p)) => self.counts[a][p],
            _ => 0,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.labels.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.counts.iter().flatten().map(|c| c.to_string().len()).max().unwrap_or(1).max(6);
        write!(f, "{:>6} |", "actual")?;
        for l in &self.labels {
            write!(f, " {:>width$}", l.to_string())?;
        }
        writeln!(f)?;
        for (l, row) in self.labels.iter().zip(&self.counts) {
            write!(f, "{l} |")?;
            for c in row {
                write!(f, " {c:>width$}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValidation {
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// Pooled over all folds.
    pub confusion: ConfusionMatrix,
}

/// Accuracy and confusion matrix of `model` on `set`.
pub fn evaluate(model: &RandomForestModel, set: &TrainingSet) -> Result<(f64, ConfusionMatrix)> {
    let predicted = model.predict_set(set)?;
    let confusion = ConfusionMatrix::from_pairs(set.labels(), &predicted);
    Ok((confusion.accuracy(), confusion))
}

/// Fold id for every row. Rows of each label are shuffled and dealt
/// round-robin, continuing the dealer position across labels so fold
/// sizes differ by at most one.
pub fn stratified_folds(labels: &[FaultLabel], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::InvalidArgument(format!("{} rows cannot fill {k} folds", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f01d_cafe_0001);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| labels[i]);

    let mut folds = vec![0usize; labels.len()];
    let mut dealer = 0usize;
    for group in order.chunk_by_mut(|a, b| labels[*a] == labels[*b]) {
        group.shuffle(&mut rng);
        for &i in group.iter() {
            folds[i] = dealer % k;
            dealer += 1;
        }
    }
    Ok(folds)
}

/// Stratified k-fold cross-validation.
pub fn cross_validate(set: &TrainingSet, params: &ForestParams, k_folds: usize) -> Result<CrossValidation> {
    let folds = stratified_folds(set.labels(), k_folds, params.seed)?;
    let mut fold_accuracies = Vec::with_capacity(k_folds);
    let mut confusion = ConfusionMatrix::new(set.distinct_labels());
    for fold in 0..k_folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..set.len()).partition(|&i| folds[i] == fold);
        let model = train_forest(&set.subset(&train), params)?;
        let (acc, cm) = evaluate(&model, &set.subset(&test))?;
        fold_accuracies.push(acc);
        confusion.merge(&cm);
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k_folds as f64;
    Ok(CrossValidation { fold_accuracies, mean_accuracy, confusion })
}
