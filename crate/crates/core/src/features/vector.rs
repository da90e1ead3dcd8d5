//! d-q current-vector features: trajectory surface area, vector angle and
//! distribution angle.
//!
//! Faulted trajectories pass through the origin, so callers that sweep a
//! whole period should skip degenerate samples rather than fail.

use crate::error::{Error, Result};

/// Magnitude below which a current vector has no defined direction, A.
pub const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentVector {
    pub d: f64,
    pub q: f64,
}

impl CurrentVector {
    pub fn new(d: f64, q: f64) -> Self {
        CurrentVector { d, q }
    }

    pub fn magnitude(self) -> f64 {
        self.d.hypot(self.q)
    }

    fn is_degenerate(self, eps: f64) -> bool {
        !(self.magnitude() > eps)
    }
}

/// Amplitude-invariant projection of a phase-current triple onto the
/// stationary two-axis frame.
pub fn dq_transform(i_a: f64, i_b: f64, i_c: f64) -> CurrentVector {
    CurrentVector { d: (2.0 * i_a - i_b - i_c) / 3.0, q: (i_b - i_c) / 3f64.sqrt() }
}

pub fn unit_vector(v: CurrentVector) -> Result<CurrentVector> {
    unit_vector_eps(v, DEGENERATE_EPS)
}

pub fn unit_vector_eps(v: CurrentVector, eps: f64) -> Result<CurrentVector> {
    let m = v.magnitude();
    if v.is_degenerate(eps) {
        return Err(Error::DegenerateVector(m));
    }
    Ok(CurrentVector { d: v.d / m, q: v.q / m })
}

/// Four-quadrant angle of the vector in [0, 360) degrees.
pub fn vector_angle(v: CurrentVector) -> Result<f64> {
    if v.is_degenerate(DEGENERATE_EPS) {
        return Err(Error::DegenerateVector(v.magnitude()));
    }
    Ok(crate::sim::normalize_deg(v.q.atan2(v.d).to_degrees()))
}

/// Unsigned angle between two directions, in [0, 180].
fn angular_step(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Signed shortest rotation from `from` to `to`, in (-180, 180].
fn signed_step(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

fn angle_or_zero(v: CurrentVector) -> f64 {
    vector_angle(v).unwrap_or(0.0)
}

/// Sum of circular sectors swept between consecutive samples,
/// `Σ π r_i² ρ_i / 360` with `ρ_i` the unsigned angular step from sample
/// `i` to `i + 1`. A step touching a degenerate sample adds nothing.
///
/// When the trajectory winds once around the origin (one full fundamental
/// period) the loop is closed with the step from the last sample back to
/// the first; an open arc is not closed.
pub fn vector_surface_area(trajectory: &[CurrentVector]) -> Result<f64> {
    if trajectory.len() < 2 {
        return Err(Error::InvalidArgument(format!("surface area needs at least 2 samples, got {}", trajectory.len())));
    }
    let sector = |a: CurrentVector, b: CurrentVector| -> (f64, f64) {
        if a.is_degenerate(DEGENERATE_EPS) || b.is_degenerate(DEGENERATE_EPS) {
            return (0.0, 0.0);
        }
        let (pa, pb) = (angle_or_zero(a), angle_or_zero(b));
        let r2 = a.d * a.d + a.q * a.q;
        (std::f64::consts::PI * r2 * angular_step(pa, pb) / 360.0, signed_step(pa, pb))
    };

    let mut area = 0.0;
    let mut winding = 0.0;
    for w in trajectory.windows(2) {
        let (s, turn) = sector(w[0], w[1]);
        area += s;
        winding += turn;
    }
    if winding.abs() > 180.0 {
        area += sector(trajectory[trajectory.len() - 1], trajectory[0]).0;
    }
    Ok(area)
}

/// Angular extent of the occupied arc, in [0, 360].
///
/// Measured on the circle as 360° minus the largest gap between sorted
/// sample angles, so arcs across 0° are handled. An extent within one
/// typical angular step (median consecutive step) of 360° is a full circle.
/// Degenerate samples are skipped.
pub fn distribution_angle(trajectory: &[CurrentVector]) -> Result<f64> {
    let angles: Vec<f64> =
        trajectory.iter().filter(|v| !v.is_degenerate(DEGENERATE_EPS)).map(|v| angle_or_zero(*v)).collect();
    if angles.is_empty() {
        return Err(Error::Empty("no non-degenerate current vectors"));
    }

    let mut steps: Vec<f64> = angles.windows(2).map(|w| angular_step(w[0], w[1])).collect();

    let mut sorted = angles;
    sorted.sort_by(f64::total_cmp);
    let wrap_gap = 360.0 - (sorted[sorted.len() - 1] - sorted[0]);
    let largest_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max);
    let extent = 360.0 - largest_gap;

    if !steps.is_empty() {
        steps.sort_by(f64::total_cmp);
        let typical = steps[steps.len() / 2];
        if typical > 0.0 && extent >= 360.0 - typical - 1e-9 {
            return Ok(360.0);
        }
    }
    Ok(extent)
}

/// The three per-period vector features computed on unit vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorFeatures {
    pub surface_area: f64,
    /// Arithmetic mean of the per-sample vector angles, degrees.
    pub mean_vector_angle: f64,
    pub distribution_angle: f64,
}

/// Vector features of one period of phase currents, computed on unit
/// vectors so the result does not depend on current amplitude.
pub fn vector_features(currents: &[[f64; 3]]) -> Result<VectorFeatures> {
    let units: Vec<CurrentVector> = currents
        .iter()
        .map(|c| {
            let v = dq_transform(c[0], c[1], c[2]);
            unit_vector(v).unwrap_or_default()
        })
        .collect();
    let angles: Vec<f64> = units.iter().filter_map(|u| vector_angle(*u).ok()).collect();
    if angles.is_empty() {
        return Err(Error::Empty("no non-degenerate current vectors"));
    }
    Ok(VectorFeatures {
        surface_area: vector_surface_area(&units)?,
        mean_vector_angle: angles.iter().sum::<f64>() / angles.len() as f64,
        distribution_angle: distribution_angle(&units)?,
    })
}
