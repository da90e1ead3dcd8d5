//! Orthonormal Haar analysis filter bank.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// One decomposition level: low-pass (average) and high-pass (detail)
/// coefficients, each half the length of the level's input.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarLevel {
    pub averages: Vec<f64>,
    pub details: Vec<f64>,
}

impl HaarLevel {
    pub fn detail_energy(&self) -> f64 {
        self.details.iter().map(|d| d * d).sum()
    }
}

fn check_len(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(())
}

/// Single analysis step: `avg[k] = (a[2k] + a[2k+1]) / √2`,
/// `det[k] = (a[2k] - a[2k+1]) / √2`.
pub fn haar_step(signal: &[f64]) -> Result<HaarLevel> {
    check_len(signal.len())?;
    let (averages, details) =
        signal.chunks_exact(2).map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2)).unzip();
    Ok(HaarLevel { averages, details })
}

/// Repeated [`haar_step`] on successive averages. Finest level first,
/// coarsest last.
pub fn haar_decompose(signal: &[f64], levels: usize) -> Result<Vec<HaarLevel>> {
    check_len(signal.len())?;
    let max_levels = signal.len().trailing_zeros() as usize;
    if levels == 0 || levels > max_levels {
        return Err(Error::InvalidArgument(format!(
            "levels must lie in 1..={max_levels} for length {}, got {levels}",
            signal.len()
        )));
    }
    let mut out: Vec<HaarLevel> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let level = haar_step(out.last().map_or(signal, |l| &l.averages))?;
        out.push(level);
    }
    Ok(out)
}

/// Inverse of one analysis step.
pub fn haar_step_inverse(averages: &[f64], details: &[f64]) -> Result<Vec<f64>> {
    if averages.len() != details.len() {
        return Err(Error::WidthMismatch { expected: averages.len(), got: details.len() });
    }
    Ok(averages.iter().zip(details).flat_map(|(a, d)| [(a + d) * FRAC_1_SQRT_2, (a - d) * FRAC_1_SQRT_2]).collect())
}

/// Rebuild the original signal from the output of [`haar_decompose`].
pub fn haar_reconstruct(levels: &[HaarLevel]) -> Result<Vec<f64>> {
    let coarsest = levels.last().ok_or(Error::Empty("no Haar levels"))?;
    let mut signal = coarsest.averages.clone();
    for level in levels.iter().rev() {
        signal = haar_step_inverse(&signal, &level.details)?;
    }
    Ok(signal)
}
