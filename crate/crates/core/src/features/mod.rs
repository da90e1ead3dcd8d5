//! Feature extraction: Haar filter bank, d-q current-vector features and
//! time-domain statistics, plus per-window assembly.

mod haar;
mod time_domain;
mod vector;

pub use haar::{haar_decompose, haar_reconstruct, haar_step, haar_step_inverse, HaarLevel};
pub use time_domain::{moments, time_domain_features, Moments, TimeDomainFeatures, TIME_DOMAIN_NAMES, WINDOW_EPS};
pub use vector::{
    distribution_angle, dq_transform, unit_vector, unit_vector_eps, vector_angle, vector_features, vector_surface_area,
    CurrentVector, VectorFeatures, DEGENERATE_EPS,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CHANNELS: [&str; 3] = ["i_a", "i_b", "i_c"];

/// Which feature families go into a window's feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSet {
    /// 12 statistics per phase current.
    pub time_domain: bool,
    /// Surface area, mean vector angle and distribution angle.
    pub vector: bool,
    /// Number of Haar levels whose detail energy is reported per phase
    /// (0 disables). The window is truncated to its leading power-of-two
    /// length before decomposition.
    pub haar_levels: usize,
}

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet { time_domain: true, vector: false, haar_levels: 0 }
    }
}

impl FeatureSet {
    pub fn is_empty(&self) -> bool {
        !self.time_domain && !self.vector && self.haar_levels == 0
    }

    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.time_domain {
            for ch in CHANNELS {
                names.extend(TIME_DOMAIN_NAMES.iter().map(|s| format!("{ch}_{s}")));
            }
        }
        if self.vector {
            names.extend(["surface_area", "mean_vector_angle", "distribution_angle"].map(String::from));
        }
        for ch in CHANNELS {
            names.extend((1..=self.haar_levels).map(|l| format!("{ch}_haar{l}_energy")));
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Feature vector for one window of (i_a, i_b, i_c) samples.
pub fn assemble_window_features(window: &[[f64; 3]], set: &FeatureSet) -> Result<FeatureVector> {
    if set.is_empty() {
        return Err(Error::InvalidConfig("feature set selects no features".into()));
    }
    let channel = |k: usize| -> Vec<f64> { window.iter().map(|s| s[k]).collect() };

    let mut values = Vec::new();
    if set.time_domain {
        for k in 0..3 {
            values.extend(time_domain_features(&channel(k))?.to_array());
        }
    }
    if set.vector {
        let v = vector_features(window)?;
        values.extend([v.surface_area, v.mean_vector_angle, v.distribution_angle]);
    }
    if set.haar_levels > 0 {
        let n = if window.len() < 2 { window.len() } else { 1 << window.len().ilog2() };
        for k in 0..3 {
            let levels = haar_decompose(&channel(k)[..n], set.haar_levels)?;
            values.extend(levels.iter().map(HaarLevel::detail_energy));
        }
    }
    Ok(FeatureVector { names: set.names(), values })
}
