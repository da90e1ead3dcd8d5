//! Behavioral phase-current generator for a three-phase four-wire PWM
//! rectifier with open-circuit switch faults.
//!
//! Phase convention: `i_a = A sin(θ)`, `i_b = A sin(θ - 120°)`,
//! `i_c = A sin(θ + 120°)` with `θ = 360° f t + phase_deg`. The sextant
//! regions and switch observability below are defined against this
//! convention and nothing else.
//!
//! Each leg behaves as an independent half bridge: an open upper switch
//! removes the negative half-cycle of its phase, an open lower switch the
//! positive one. The suppressed half is scaled by `leakage` (0 clamps it to
//! zero) before noise is added.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{FaultLabel, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Peak phase current, A.
    pub amplitude: f64,
    /// Fundamental frequency, Hz.
    pub frequency: f64,
    pub sample_rate: f64,
    /// Standard deviation of the additive Gaussian noise, A.
    pub noise_sigma: f64,
    pub ripple_amplitude: f64,
    pub ripple_frequency: f64,
    /// Relative load variation: the amplitude gain is drawn from
    /// `1 ± amplitude_drift` at every period boundary and interpolated
    /// linearly in between.
    pub amplitude_drift: f64,
    /// Fraction of the healthy current that survives in a suppressed half-cycle.
    pub leakage: f64,
    /// Electrical angle θ at t = 0, degrees.
    pub phase_deg: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            amplitude: 14.28,
            frequency: 50.0,
            sample_rate: 25_600.0,
            noise_sigma: 0.1,
            ripple_amplitude: 0.1,
            ripple_frequency: 2_500.0,
            amplitude_drift: 0.05,
            leakage: 0.0,
            phase_deg: 0.0,
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Ideal configuration: no noise, ripple or drift.
    pub fn ideal(amplitude: f64, frequency: f64, sample_rate: f64) -> Self {
        SimConfig {
            amplitude,
            frequency,
            sample_rate,
            noise_sigma: 0.0,
            ripple_amplitude: 0.0,
            amplitude_drift: 0.0,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.amplitude,
            self.frequency,
            self.sample_rate,
            self.noise_sigma,
            self.ripple_amplitude,
            self.ripple_frequency,
            self.amplitude_drift,
            self.leakage,
            self.phase_deg,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("simulation parameters must be finite".into()));
        }
        if self.amplitude <= 0.0 {
            return Err(Error::InvalidConfig(format!("amplitude must be > 0, got {}", self.amplitude)));
        }
        if self.frequency <= 0.0 {
            return Err(Error::InvalidConfig(format!("frequency must be > 0, got {}", self.frequency)));
        }
        if self.sample_rate < 20.0 * self.frequency {
            return Err(Error::InvalidConfig(format!(
                "sample_rate {} is below 20 x frequency {}",
                self.sample_rate, self.frequency
            )));
        }
        if self.noise_sigma < 0.0 || self.ripple_amplitude < 0.0 || self.amplitude_drift < 0.0 {
            return Err(Error::InvalidConfig("noise, ripple and drift must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.leakage) {
            return Err(Error::InvalidConfig(format!("leakage must lie in [0, 1], got {}", self.leakage)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultEvent {
    pub time: f64,
    pub label: FaultLabel,
}

impl FaultEvent {
    pub fn new(time: f64, label: FaultLabel) -> Self {
        FaultEvent { time, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    pub t: f64,
    /// (i_a, i_b, i_c) in A.
    pub currents: [f64; 3],
}

/// Uniformly sampled three-phase current record with its fault timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TriPhaseSeries {
    pub sample_rate: f64,
    /// Fundamental frequency the record was generated or measured at.
    pub frequency: f64,
    /// θ at t = 0, degrees. Only meaningful when known (simulated data).
    pub phase_deg: f64,
    pub samples: Vec<PhaseSample>,
    pub fault_timeline: Vec<FaultEvent>,
}

impl TriPhaseSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.t)
    }

    pub fn end_time(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Electrical angle at time `t`, in [0, 360).
    pub fn theta_at(&self, t: f64) -> f64 {
        theta_at(self.frequency, self.phase_deg, t)
    }

    /// Checks the sampling grid and the timeline ordering.
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidArgument("sample_rate must be > 0".into()));
        }
        let dt = 1.0 / self.sample_rate;
        for (i, w) in self.samples.windows(2).enumerate() {
            let step = w[1].t - w[0].t;
            if !(step > 0.0) || (step - dt).abs() > 1e-6 * dt + 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "samples {i} and {} are not spaced 1/sample_rate apart",
                    i + 1
                )));
            }
        }
        check_timeline_order(&self.fault_timeline)
    }
}

/// Electrical angle for frequency `f` and initial phase, in [0, 360).
pub fn theta_at(frequency: f64, phase_deg: f64, t: f64) -> f64 {
    normalize_deg(360.0 * frequency * t + phase_deg)
}

pub fn normalize_deg(theta: f64) -> f64 {
    let r = theta.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// One of the six 60° sextants of the fundamental period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    SI,
    SII,
    SIII,
    SIV,
    SV,
    SVI,
}

impl Region {
    pub const ALL: [Region; 6] = [Region::SI, Region::SII, Region::SIII, Region::SIV, Region::SV, Region::SVI];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Current signs of (i_a, i_b, i_c) inside the sextant; `true` is positive.
    pub fn sign_pattern(self) -> [bool; 3] {
        match self {
            Region::SI => [true, false, true],
            Region::SII => [true, false, false],
            Region::SIII => [true, true, false],
            Region::SIV => [false, true, false],
            Region::SV => [false, true, true],
            Region::SVI => [false, false, true],
        }
    }

    /// Opening and closing angle of the sextant, degrees.
    pub fn span_deg(self) -> (f64, f64) {
        let start = 60.0 * self.index() as f64;
        (start, start + 60.0)
    }
}

/// Sextant containing the electrical angle `theta` (any real value; it is
/// normalized first). Each boundary belongs to the sextant it opens.
pub fn region_of(theta: f64) -> Region {
    let idx = (normalize_deg(theta) / 60.0).floor() as usize;
    Region::ALL[idx.min(5)]
}

/// Switches whose open-circuit fault is visible inside `region`: upper
/// switches of negative phases and lower switches of positive phases.
pub fn detectable_faults(region: Region) -> FaultLabel {
    let signs = region.sign_pattern();
    FaultLabel::from_switches(Phase::ALL.iter().map(|p| if signs[p.index()] { p.lower() } else { p.upper() }))
}

/// The part of `label` whose signature is present in `region`.
pub fn observable_label(label: FaultLabel, region: Region) -> FaultLabel {
    label.intersection(detectable_faults(region))
}

/// Ground-truth label at time `t`: the last event with `time <= t`, else normal.
pub fn true_label_at(series: &TriPhaseSeries, t: f64) -> Result<FaultLabel> {
    if series.is_empty() {
        return Err(Error::Empty("series has no samples"));
    }
    let half_step = 0.5 / series.sample_rate;
    if !(t >= series.start_time() - half_step && t <= series.end_time() + half_step) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} s lies outside the series [{}, {}]",
            series.start_time(),
            series.end_time()
        )));
    }
    Ok(label_at(&series.fault_timeline, t))
}

/// Observable part of the ground-truth label at `t`.
pub fn observable_label_at(series: &TriPhaseSeries, t: f64) -> Result<FaultLabel> {
    let label = true_label_at(series, t)?;
    Ok(observable_label(label, region_of(series.theta_at(t))))
}

pub(crate) fn label_at(timeline: &[FaultEvent], t: f64) -> FaultLabel {
    timeline.iter().take_while(|e| e.time <= t).last().map_or(FaultLabel::NORMAL, |e| e.label)
}

fn check_timeline_order(timeline: &[FaultEvent]) -> Result<()> {
    if timeline.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::InvalidArgument("fault timeline is not sorted by time".into()));
    }
    Ok(())
}

/// How an open-circuit fault reshapes the healthy phase currents.
///
/// The default [`HalfBridgeProfile`] models the four-wire rectifier. Other
/// topologies can plug in their own signature here.
pub trait SignatureProfile {
    /// Map healthy currents (ripple included, noise excluded) to faulted ones.
    fn apply(&self, healthy: [f64; 3], label: FaultLabel) -> [f64; 3];
}

/// Per-leg half-bridge behavior: upper switch open removes the negative
/// half-cycle, lower switch open removes the positive half-cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfBridgeProfile {
    pub leakage: f64,
}

impl SignatureProfile for HalfBridgeProfile {
    fn apply(&self, healthy: [f64; 3], label: FaultLabel) -> [f64; 3] {
        let mut out = healthy;
        for phase in Phase::ALL {
            let v = healthy[phase.index()];
            let suppressed = (v < 0.0 && label.contains(phase.upper())) || (v > 0.0 && label.contains(phase.lower()));
            if suppressed {
                out[phase.index()] = v * self.leakage;
            }
        }
        out
    }
}

/// Simulate `duration` seconds of phase currents under `timeline`.
pub fn simulate(config: &SimConfig, timeline: &[FaultEvent], duration: f64) -> Result<TriPhaseSeries> {
    simulate_with(config, &HalfBridgeProfile { leakage: config.leakage }, timeline, duration)
}

/// As [`simulate`], with a caller-supplied fault signature.
pub fn simulate_with(
    config: &SimConfig,
    profile: &dyn SignatureProfile,
    timeline: &[FaultEvent],
    duration: f64,
) -> Result<TriPhaseSeries> {
    config.validate()?;
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be > 0, got {duration}")));
    }
    if let Some(e) = timeline.iter().find(|e| !(e.time >= 0.0 && e.time < duration)) {
        return Err(Error::InvalidArgument(format!("fault time {} s lies outside [0, {duration})", e.time)));
    }
    check_timeline_order(timeline)?;

    let fs = config.sample_rate;
    let n = ((duration * fs) - 1e-9).ceil().max(1.0) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let periods = (duration * config.frequency).floor() as usize + 2;
    let knots: Vec<f64> = (0..periods).map(|_| 1.0 + config.amplitude_drift * (2.0 * rng.gen::<f64>() - 1.0)).collect();
    let noise = Normal::new(0.0, config.noise_sigma).map_err(|e| Error::InvalidConfig(format!("noise_sigma: {e}")))?;

    let mut samples = Vec::with_capacity(n);
    let mut event = 0usize;
    let mut active = FaultLabel::NORMAL;
    for i in 0..n {
        let t = i as f64 / fs;
        while event < timeline.len() && timeline[event].time <= t {
            active = timeline[event].label;
            event += 1;
        }

        let cycles = t * config.frequency;
        let k = cycles.floor() as usize;
        let frac = cycles - k as f64;
        let gain = knots[k] + (knots[k + 1] - knots[k]) * frac;

        let theta = 360.0 * cycles + config.phase_deg;
        let ripple_theta = 360.0 * config.ripple_frequency * t;
        let mut healthy = [0.0; 3];
        for phase in Phase::ALL {
            let shift = phase.shift_deg();
            healthy[phase.index()] = gain * config.amplitude * (theta + shift).to_radians().sin()
                + config.ripple_amplitude * (ripple_theta + shift).to_radians().sin();
        }

        let mut currents = if active.is_normal() { healthy } else { profile.apply(healthy, active) };
        for c in currents.iter_mut() {
            *c += noise.sample(&mut rng);
        }
        samples.push(PhaseSample { t, currents });
    }

    Ok(TriPhaseSeries {
        sample_rate: fs,
        frequency: config.frequency,
        phase_deg: config.phase_deg,
        samples,
        fault_timeline: timeline.to_vec(),
    })
}
