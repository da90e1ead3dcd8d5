//! Twelve time-domain statistics of a sample window.
//!
//! Kurtosis and skewness are normalized by the window RMS, not by the
//! standard deviation, and the crest, impulse and margin indices use the
//! window maximum (not the maximum magnitude).

use serde::Serialize;

use crate::error::{Error, Result};

/// RMS and mean-absolute values at or below this make the ratio indices undefined.
pub const WINDOW_EPS: f64 = 1e-12;

pub const TIME_DOMAIN_NAMES: [&str; 12] =
    ["max", "min", "p2p", "mean", "var", "std", "kurt", "skew", "waveform", "crest", "impulse", "margin"];

/// The six statistics that stay defined on an all-zero window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub max: f64,
    pub min: f64,
    pub peak_to_peak: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeDomainFeatures {
    pub max: f64,
    pub min: f64,
    pub peak_to_peak: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    /// RMS over mean absolute value.
    pub waveform: f64,
    /// Maximum over RMS.
    pub crest: f64,
    /// Maximum over mean absolute value.
    pub impulse: f64,
    /// Maximum over the squared mean of √|x|.
    pub margin: f64,
}

impl TimeDomainFeatures {
    pub fn moments(&self) -> Moments {
        Moments {
            max: self.max,
            min: self.min,
            peak_to_peak: self.peak_to_peak,
            mean: self.mean,
            variance: self.variance,
            std_dev: self.std_dev,
        }
    }

    /// Values in [`TIME_DOMAIN_NAMES`] order.
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.max,
            self.min,
            self.peak_to_peak,
            self.mean,
            self.variance,
            self.std_dev,
            self.kurtosis,
            self.skewness,
            self.waveform,
            self.crest,
            self.impulse,
            self.margin,
        ]
    }
}

struct Sums {
    max: f64,
    min: f64,
    sum: f64,
    sum_sq: f64,
    sum_abs: f64,
    sum_sqrt_abs: f64,
}

fn accumulate(window: &[f64]) -> Sums {
    window.iter().fold(
        Sums { max: f64::NEG_INFINITY, min: f64::INFINITY, sum: 0.0, sum_sq: 0.0, sum_abs: 0.0, sum_sqrt_abs: 0.0 },
        |acc, &x| Sums {
            max: acc.max.max(x),
            min: acc.min.min(x),
            sum: acc.sum + x,
            sum_sq: acc.sum_sq + x * x,
            sum_abs: acc.sum_abs + x.abs(),
            sum_sqrt_abs: acc.sum_sqrt_abs + x.abs().sqrt(),
        },
    )
}

fn check_window(window: &[f64]) -> Result<()> {
    if window.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "time-domain window needs at least 2 samples, got {}",
            window.len()
        )));
    }
    if window.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("time-domain window contains non-finite values".into()));
    }
    Ok(())
}

fn moments_from(window: &[f64], sums: &Sums) -> Moments {
    let n = window.len() as f64;
    let mean = sums.sum / n;
    let variance = window.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Moments {
        max: sums.max,
        min: sums.min,
        peak_to_peak: sums.max - sums.min,
        mean,
        variance,
        std_dev: variance.sqrt(),
    }
}

/// Max, min, peak-to-peak, mean, variance and standard deviation.
pub fn moments(window: &[f64]) -> Result<Moments> {
    check_window(window)?;
    Ok(moments_from(window, &accumulate(window)))
}

/// All twelve statistics. A window whose RMS or mean absolute value does not
/// exceed [`WINDOW_EPS`] yields [`Error::DegenerateWindow`] carrying the moments.
pub fn time_domain_features(window: &[f64]) -> Result<TimeDomainFeatures> {
    check_window(window)?;
    let sums = accumulate(window);
    let m = moments_from(window, &sums);

    let n = window.len() as f64;
    let rms = (sums.sum_sq / n).sqrt();
    let mean_abs = sums.sum_abs / n;
    if !(rms > WINDOW_EPS && mean_abs > WINDOW_EPS) {
        return Err(Error::DegenerateWindow { moments: m });
    }

    let (mut third, mut fourth) = (0.0, 0.0);
    for x in window {
        let z = (x - m.mean) / rms;
        let z2 = z * z;
        third += z2 * z;
        fourth += z2 * z2;
    }
    let root_mean_sqrt = sums.sum_sqrt_abs / n;

    Ok(TimeDomainFeatures {
        max: m.max,
        min: m.min,
        peak_to_peak: m.peak_to_peak,
        mean: m.mean,
        variance: m.variance,
        std_dev: m.std_dev,
        kurtosis: fourth / n,
        skewness: third / n,
        waveform: rms / mean_abs,
        crest: m.max / rms,
        impulse: m.max / mean_abs,
        margin: m.max / (root_mean_sqrt * root_mean_sqrt),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_unit_window() {
        let f = time_domain_features(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(f.to_array(), [1.0, -1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn constant_window() {
        let c = 2.5;
        let f = time_domain_features(&[c; 4]).unwrap();
        assert_eq!(f.peak_to_peak, 0.0);
        assert_eq!(f.variance, 0.0);
        assert_eq!(f.kurtosis, 0.0);
        assert_eq!(f.skewness, 0.0);
        for v in [f.waveform, f.crest, f.impulse, f.margin] {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_window_is_degenerate_but_keeps_moments() {
        match time_domain_features(&[0.0; 4]) {
            Err(Error::DegenerateWindow { moments }) => {
                assert_eq!(moments.max, 0.0);
                assert_eq!(moments.variance, 0.0);
            }
            other => panic!("expected degenerate window, got {other:?}"),
        }
        assert_eq!(moments(&[0.0; 4]).unwrap().std_dev, 0.0);
    }

    #[test]
    fn short_or_nonfinite_window() {
        assert!(time_domain_features(&[1.0]).is_err());
        assert!(time_domain_features(&[1.0, f64::NAN]).is_err());
    }
}
