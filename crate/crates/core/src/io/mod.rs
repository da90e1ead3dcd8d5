//! Dataset and configuration files.

pub mod config;
pub mod dataset;

pub use config::{DatasetComposition, ExperimentConfig, LabelMode};
pub use dataset::{DatasetFile, DatasetRow, SeriesBlock, SeriesMeta, DATASET_HEADER};
