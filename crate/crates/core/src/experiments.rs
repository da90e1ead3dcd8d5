//! Experiment drivers behind the CLI: dataset generation, training,
//! evaluation, tree-count sweep, stream diagnosis and feature export.

use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnosis::{run_diagnosis, DiagnosisConfig, FaultReport};
use crate::error::{Error, Result};
use crate::features::{assemble_window_features, FeatureSet};
use crate::forest::{
    cross_validate, evaluate, train_forest, ConfusionMatrix, ForestParams, RandomForestModel, TrainingSet,
};
use crate::io::{DatasetFile, ExperimentConfig, LabelMode, SeriesBlock};
use crate::label::FaultLabel;
use crate::sim::{label_at, observable_label, region_of, simulate, FaultEvent, SimConfig, TriPhaseSeries};

const DATASET_STREAM: u64 = 0xda7a_5e70_0000_0001;
const SPLIT_STREAM: u64 = 0x5b11_7000_0000_0002;

/// Per-row labels for `series` under `mode`.
pub fn label_series(series: &TriPhaseSeries, mode: LabelMode) -> Vec<FaultLabel> {
    series
        .samples
        .iter()
        .map(|s| {
            let truth = label_at(&series.fault_timeline, s.t);
            match mode {
                LabelMode::True => truth,
                LabelMode::Observable => observable_label(truth, region_of(series.theta_at(s.t))),
            }
        })
        .collect()
}

/// Split `total` into `parts` near-equal shares, larger shares first.
fn shares(total: usize, parts: usize) -> impl Iterator<Item = usize> {
    (0..parts).map(move |i| total / parts + usize::from(i < total % parts))
}

/// Labeled instantaneous samples for every class of the composition.
///
/// Each class gets `series_per_class` series with a random phase offset
/// and the fault present from t = 0; a random, time-ordered subset of each
/// series fills the class quota.
pub fn generate_dataset(config: &ExperimentConfig) -> Result<DatasetFile> {
    config.validate()?;
    let comp = &config.dataset;
    let classes = comp.class_labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.sim.seed ^ DATASET_STREAM);
    let duration = comp.periods_per_series as f64 / config.sim.frequency;

    let mut blocks = Vec::new();
    for (ci, (class, quota)) in classes.iter().zip(shares(comp.total_samples, classes.len())).enumerate() {
        for (si, take) in shares(quota, comp.series_per_class).enumerate() {
            let sim = SimConfig { phase_deg: rng.gen_range(0.0..360.0), seed: rng.gen(), ..config.sim.clone() };
            let timeline = if class.is_normal() { Vec::new() } else { vec![FaultEvent::new(0.0, *class)] };
            let series = simulate(&sim, &timeline, duration)?;
            if take > series.len() {
                return Err(Error::InvalidConfig(format!(
                    "a series of {} samples cannot supply {take} rows; raise periods_per_series",
                    series.len()
                )));
            }
            let mut keep = sample_indices(&mut rng, series.len(), take).into_vec();
            keep.sort_unstable();

            let labels = label_series(&series, comp.label_mode);
            let mut block = SeriesBlock::from_series(format!("{ci}-{si}"), &series, &labels)?;
            block.rows = keep.iter().map(|&i| block.rows[i]).collect();
            block.meta.set("class", class.to_string());
            block.meta.set("label_mode", comp.label_mode.as_str());
            // the kept rows are no longer uniformly spaced
            block.meta.set("subsampled", "1");
            blocks.push(block);
        }
    }
    Ok(DatasetFile { blocks })
}

/// A contiguous series with faults injected at the given times.
pub fn generate_scenario(
    config: &ExperimentConfig,
    timeline: &[FaultEvent],
    duration: f64,
    phase_deg: f64,
    id: &str,
) -> Result<DatasetFile> {
    config.validate()?;
    let sim = SimConfig { phase_deg, ..config.sim.clone() };
    let series = simulate(&sim, timeline, duration)?;
    let labels = label_series(&series, config.dataset.label_mode);
    let mut block = SeriesBlock::from_series(id, &series, &labels)?;
    block.meta.set("label_mode", config.dataset.label_mode.as_str());
    Ok(DatasetFile { blocks: vec![block] })
}

/// Random split of the rows into `train_count` training rows and the rest.
pub fn split_train_test(set: &TrainingSet, train_count: usize, seed: u64) -> Result<(TrainingSet, TrainingSet)> {
    if train_count > set.len() {
        return Err(Error::InvalidArgument(format!("cannot take {train_count} training rows from {}", set.len())));
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ SPLIT_STREAM));
    let (train, test) = order.split_at(train_count);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((set.subset(&train), set.subset(&test)))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RandomForestModel,
    pub train_rows: usize,
    /// Accuracy and confusion matrix on the held-out rows, if any.
    pub held_out: Option<(f64, ConfusionMatrix)>,
}

/// Train on `train_count` random rows of `dataset`, evaluate on the rest.
pub fn train_and_evaluate(dataset: &DatasetFile, params: &ForestParams, train_count: usize) -> Result<TrainOutcome> {
    let set = dataset.to_training_set();
    if set.distinct_labels().len() < 2 {
        return Err(Error::InvalidArgument("training needs at least 2 classes".into()));
    }
    let train_count = train_count.min(set.len());
    let (train, test) = split_train_test(&set, train_count, params.seed)?;
    let model = train_forest(&train, params)?;
    let held_out = if test.is_empty() { None } else { Some(evaluate(&model, &test)?) };
    Ok(TrainOutcome { model, train_rows: train.len(), held_out })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub n_trees: usize,
    pub accuracy: f64,
}

/// Cross-validated accuracy for each tree count.
pub fn sweep_trees(
    set: &TrainingSet,
    counts: &[usize],
    params: &ForestParams,
    folds: usize,
) -> Result<Vec<SweepPoint>> {
    if counts.is_empty() {
        return Err(Error::InvalidArgument("no tree counts given".into()));
    }
    counts
        .iter()
        .map(|&n_trees| {
            let cv = cross_validate(set, &ForestParams { n_trees, ..params.clone() }, folds)?;
            Ok(SweepPoint { n_trees, accuracy: cv.mean_accuracy })
        })
        .collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("n_trees,accuracy\n");
    for p in points {
        let _ = writeln!(out, "{},{:.4}", p.n_trees, p.accuracy);
    }
    out
}

/// Run the diagnosis pipeline on every series of `dataset`.
pub fn diagnose_dataset(
    model: &RandomForestModel,
    dataset: &DatasetFile,
    config: &DiagnosisConfig,
) -> Result<Vec<(String, FaultReport)>> {
    dataset
        .blocks
        .iter()
        .map(|block| {
            let series = block.to_series()?;
            Ok((block.id.clone(), run_diagnosis(model, &series, config)?))
        })
        .collect()
}

/// Per-window feature table of every series, one window per fundamental
/// period at the series' own rate. Windows whose ratio indices are
/// undefined are skipped; the second value counts them.
pub fn export_window_features(dataset: &DatasetFile, features: &FeatureSet) -> Result<(String, usize)> {
    let mut out = String::from("series,window,start_time");
    for name in features.names() {
        out.push(',');
        out.push_str(&name);
    }
    out.push_str(",label\n");

    let mut skipped = 0;
    for block in &dataset.blocks {
        let series = block.to_series()?;
        let per_period = (series.sample_rate / series.frequency).round() as usize;
        if per_period < 2 {
            return Err(Error::InvalidArgument(format!("series {:?}: period shorter than 2 samples", block.id)));
        }
        for (w, chunk) in series.samples.chunks_exact(per_period).enumerate() {
            let window: Vec<[f64; 3]> = chunk.iter().map(|s| s.currents).collect();
            let fv = match assemble_window_features(&window, features) {
                Ok(fv) => fv,
                Err(Error::DegenerateWindow { .. } | Error::DegenerateVector(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let end = chunk[chunk.len() - 1].t;
            let _ = write!(out, "{},{w},{:.9}", block.id, chunk[0].t);
            for v in &fv.values {
                let _ = write!(out, ",{v:.9e}");
            }
            let _ = writeln!(out, ",{}", label_at(&series.fault_timeline, end));
        }
    }
    Ok((out, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::DatasetComposition;

    fn small_config(classes: &[&str], total: usize) -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetComposition {
                classes: classes.iter().map(|s| s.to_string()).collect(),
                total_samples: total,
                train_samples: total / 3,
                ..DatasetComposition::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_composition_has_24000_rows() {
        let data = generate_dataset(&ExperimentConfig::default()).unwrap();
        assert_eq!(data.row_count(), 24_000);
        assert_eq!(data.blocks.len(), 22 * 4);
    }

    #[test]
    fn normal_only_composition() {
        let data = generate_dataset(&small_config(&["000000"], 300)).unwrap();
        assert_eq!(data.row_count(), 300);
        assert!(data.rows().all(|r| r.label.is_normal()));
    }

    #[test]
    fn labels_match_timeline() {
        let cfg = small_config(&["100000", "101000", "000011"], 600);
        let data = generate_dataset(&cfg).unwrap();
        for block in &data.blocks {
            let phase: f64 = block.meta.get("phase_deg").unwrap().parse().unwrap();
            let class: FaultLabel = block.meta.get("class").unwrap().parse().unwrap();
            for r in &block.rows {
                let theta = crate::sim::theta_at(50.0, phase, r.t);
                // phase is stored with 6 decimals; stay clear of sextant edges
                let off = theta.rem_euclid(60.0);
                if off.min(60.0 - off) < 1e-3 {
                    continue;
                }
                assert_eq!(r.label, observable_label(class, region_of(theta)));
            }
        }
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let mut set = TrainingSet::new(vec!["x".into()]).unwrap();
        for i in 0..50 {
            set.push(&[i as f64], FaultLabel::NORMAL).unwrap();
        }
        let (a, b) = split_train_test(&set, 20, 4).unwrap();
        assert_eq!((a.len(), b.len()), (20, 30));
        let mut all: Vec<f64> = a.values().iter().chain(b.values()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..50).map(|i| i as f64).collect::<Vec<_>>());
        assert!(split_train_test(&set, 51, 0).is_err());
    }

    #[test]
    fn sweep_single_count_gives_one_row() {
        let data = generate_dataset(&small_config(&["000000", "100000"], 200)).unwrap();
        let params = ForestParams { n_trees: 1, seed: 3, ..ForestParams::default() };
        let points = sweep_trees(&data.to_training_set(), &[1], &params, 5).unwrap();
        let csv = sweep_csv(&points);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("n_trees,accuracy\n1,"));
        assert!(sweep_trees(&data.to_training_set(), &[], &params, 5).is_err());
    }

    #[test]
    fn feature_export_has_36_columns() {
        let cfg = ExperimentConfig::default();
        let tl = [FaultEvent::new(0.02, "100000".parse().unwrap())];
        let data = generate_scenario(&cfg, &tl, 0.06, 0.0, "s").unwrap();
        let (csv, skipped) = export_window_features(&data, &FeatureSet::default()).unwrap();
        assert_eq!(skipped, 0);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].split(',').count(), 3 + 36 + 1);
        assert!(lines[3].ends_with(",100000"));
    }
}
