//! Multi-time-scale online diagnosis.
//!
//! Raw currents are resampled to the diagnosis rate and every instantaneous
//! triple is classified by the forest. Short label runs are removed
//! (debounce). The per-sample labels of one fundamental period are then
//! fused: a fault bit counts only in sextants where that switch is
//! observable. A protection signal latches once `confirm_windows`
//! consecutive windows agree on a non-empty fault set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::dq_transform;
use crate::forest::RandomForestModel;
use crate::label::{FaultLabel, Switch};
use crate::sim::{detectable_faults, normalize_deg, region_of, PhaseSample, Region, TriPhaseSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosisConfig {
    /// Rate the raw currents are expected at, Hz.
    pub source_rate: f64,
    /// Diagnosis rate, Hz.
    pub target_rate: f64,
    pub fundamental_hz: f64,
    /// Samples per fundamental period at `target_rate`.
    pub window_samples: usize,
    pub debounce_min_run: usize,
    pub confirm_windows: usize,
    /// Samples per window that must report a bit for it to be fused.
    pub fusion_min_support: usize,
    /// θ at t = 0, degrees. When unset the phase is estimated from the
    /// first fundamental period of the record, which is assumed healthy.
    pub phase_deg: Option<f64>,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        DiagnosisConfig {
            source_rate: 25_600.0,
            target_rate: 10_000.0,
            fundamental_hz: 50.0,
            window_samples: 200,
            debounce_min_run: 5,
            confirm_windows: 1,
            fusion_min_support: 5,
            phase_deg: None,
        }
    }
}

impl DiagnosisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_rate > 0.0 && self.source_rate > 0.0 && self.fundamental_hz > 0.0) {
            return Err(Error::InvalidConfig("rates and fundamental must be > 0".into()));
        }
        if self.target_rate > self.source_rate {
            return Err(Error::InvalidConfig(format!(
                "target_rate {} exceeds source_rate {}",
                self.target_rate, self.source_rate
            )));
        }
        let per_period = self.target_rate / self.fundamental_hz;
        if (per_period - self.window_samples as f64).abs() > 1e-9 * per_period {
            return Err(Error::InvalidConfig(format!(
                "window_samples {} must equal target_rate / fundamental_hz = {per_period}",
                self.window_samples
            )));
        }
        if self.debounce_min_run == 0 || self.confirm_windows == 0 || self.fusion_min_support == 0 {
            return Err(Error::InvalidConfig(
                "debounce_min_run, confirm_windows and fusion_min_support must be >= 1".into(),
            ));
        }
        if self.phase_deg.is_some_and(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("phase_deg must be finite".into()));
        }
        Ok(())
    }
}

/// Linear-interpolation resampling onto a uniform grid at `target_rate`
/// starting at the first input timestamp.
pub fn resample(series: &TriPhaseSeries, target_rate: f64) -> Result<TriPhaseSeries> {
    if series.len() < 2 {
        return Err(Error::InvalidArgument(format!("resampling needs at least 2 samples, got {}", series.len())));
    }
    let fs = series.sample_rate;
    if !(target_rate > 0.0) {
        return Err(Error::InvalidArgument(format!("target rate must be > 0, got {target_rate}")));
    }
    if target_rate > fs * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!("upsampling from {fs} Hz to {target_rate} Hz is not supported")));
    }
    if (target_rate - fs).abs() <= 1e-12 * fs {
        return Ok(series.clone());
    }

    let n = series.len();
    let t0 = series.start_time();
    let span = (n - 1) as f64 / fs;
    let n_out = (span * target_rate + 1e-9).floor() as usize + 1;
    let samples = (0..n_out)
        .map(|k| {
            let pos = k as f64 / target_rate * fs;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            let (a, b) = (&series.samples[i].currents, &series.samples[i + 1].currents);
            PhaseSample { t: t0 + k as f64 / target_rate, currents: [0, 1, 2].map(|p| a[p] + (b[p] - a[p]) * frac) }
        })
        .collect();
    Ok(TriPhaseSeries { sample_rate: target_rate, samples, ..series.clone_header() })
}

impl TriPhaseSeries {
    fn clone_header(&self) -> TriPhaseSeries {
        TriPhaseSeries {
            sample_rate: self.sample_rate,
            frequency: self.frequency,
            phase_deg: self.phase_deg,
            samples: Vec::new(),
            fault_timeline: self.fault_timeline.clone(),
        }
    }
}

/// One forest prediction per sample, in order.
pub fn classify_stream(model: &RandomForestModel, series: &TriPhaseSeries) -> Result<Vec<FaultLabel>> {
    if model.width() != 3 {
        return Err(Error::WidthMismatch { expected: 3, got: model.width() });
    }
    series.samples.par_iter().map(|s| model.predict_label(&s.currents)).collect()
}

/// Replace every run shorter than `min_run` with the label of the last
/// accepted run. Short runs at the very start take the label of the first
/// run that is long enough; if there is none, the first run is accepted.
pub fn debounce(labels: &[FaultLabel], min_run: usize) -> Vec<FaultLabel> {
    let mut out = Vec::with_capacity(labels.len());
    let mut accepted: Option<FaultLabel> =
        labels.chunk_by(|a, b| a == b).find(|run| run.len() >= min_run).map(|run| run[0]);
    for run in labels.chunk_by(|a, b| a == b) {
        let label = match accepted {
            Some(prev) if run.len() < min_run => prev,
            _ => run[0],
        };
        accepted = Some(label);
        out.extend(std::iter::repeat_n(label, run.len()));
    }
    out
}

/// OR of the fault bits that are observable in the sextant of their sample.
pub fn fuse_window(labels: &[FaultLabel], regions: &[Region]) -> Result<FaultLabel> {
    fuse_window_with_support(labels, regions, 1)
}

/// As [`fuse_window`], but a bit is kept only if at least `min_support`
/// samples report it inside a sextant that can reveal it.
pub fn fuse_window_with_support(labels: &[FaultLabel], regions: &[Region], min_support: usize) -> Result<FaultLabel> {
    if labels.len() != regions.len() {
        return Err(Error::InvalidArgument(format!("{} labels but {} region entries", labels.len(), regions.len())));
    }
    let mut support = [0usize; 6];
    for (l, r) in labels.iter().zip(regions) {
        for sw in l.intersection(detectable_faults(*r)).switches() {
            support[usize::from(sw.number() - 1)] += 1;
        }
    }
    Ok(FaultLabel::from_switches(
        Switch::ALL.into_iter().filter(|sw| support[usize::from(sw.number() - 1)] >= min_support.max(1)),
    ))
}

/// θ at t = 0 from the fundamental of the d-q current vector over the
/// first period of the record. A balanced set traces `A(sin θ, -cos θ)`,
/// so the fundamental's argument lags θ by 90°.
pub fn estimate_phase(series: &TriPhaseSeries, frequency: f64) -> Result<f64> {
    let per_period = (series.sample_rate / frequency).round().max(1.0) as usize;
    let head = &series.samples[..per_period.min(series.len())];
    if head.len() < 4 {
        return Err(Error::InvalidArgument("too few samples to estimate the phase".into()));
    }
    let w = 2.0 * std::f64::consts::PI * frequency;
    let (mut re, mut im) = (0.0, 0.0);
    for s in head {
        let v = dq_transform(s.currents[0], s.currents[1], s.currents[2]);
        let (sin, cos) = (w * s.t).sin_cos();
        // (d + jq) e^{-jωt}
        re += v.d * cos + v.q * sin;
        im += v.q * cos - v.d * sin;
    }
    if re.hypot(im) <= 1e-12 {
        return Err(Error::InvalidArgument("no fundamental component to estimate the phase from".into()));
    }
    Ok(normalize_deg(im.atan2(re).to_degrees() + 90.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub index: usize,
    pub start_time: f64,
    pub labels: Vec<FaultLabel>,
    pub fused: FaultLabel,
}

impl WindowRecord {
    /// Distinct labels in order of first appearance.
    pub fn verdicts(&self) -> Vec<FaultLabel> {
        let mut seen = Vec::new();
        for run in self.labels.chunk_by(|a, b| a == b) {
            if !seen.contains(&run[0]) {
                seen.push(run[0]);
            }
        }
        seen
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultReport {
    pub fault_set: Vec<Switch>,
    pub first_detect_time: Option<f64>,
    pub per_window_history: Vec<WindowRecord>,
    pub protection_signal: bool,
}

impl FaultReport {
    pub fn fault_label(&self) -> FaultLabel {
        FaultLabel::from_switches(self.fault_set.iter().copied())
    }

    /// Flat JSON record. `history` adds the fused label of every window.
    pub fn to_record(&self, series_id: Option<&str>, history: bool) -> Value {
        let mut record = json!({
            "fault_set": self.fault_set.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "fault_label": self.fault_label().to_string(),
            "first_detect_time": self.first_detect_time,
            "protection_signal": self.protection_signal,
            "windows": self.per_window_history.len(),
        });
        if let Some(id) = series_id {
            record["series"] = json!(id);
        }
        if history {
            record["window_fused"] =
                json!(self.per_window_history.iter().map(|w| w.fused.to_string()).collect::<Vec<_>>());
        }
        record
    }
}

/// Resample, classify, debounce, fuse per period and latch.
pub fn run_diagnosis(
    model: &RandomForestModel,
    series: &TriPhaseSeries,
    config: &DiagnosisConfig,
) -> Result<FaultReport> {
    config.validate()?;
    if (series.sample_rate - config.source_rate).abs() > 1e-9 * config.source_rate {
        return Err(Error::InvalidArgument(format!(
            "series is sampled at {} Hz but the configuration expects {} Hz",
            series.sample_rate, config.source_rate
        )));
    }
    let resampled = resample(series, config.target_rate)?;
    let raw = classify_stream(model, &resampled)?;
    let labels = debounce(&raw, config.debounce_min_run);
    fuse_and_latch(&resampled, labels, config)
}

/// Window, fuse and latch already debounced labels of a resampled record.
pub fn fuse_and_latch(
    resampled: &TriPhaseSeries,
    labels: Vec<FaultLabel>,
    config: &DiagnosisConfig,
) -> Result<FaultReport> {
    if labels.len() != resampled.len() {
        return Err(Error::InvalidArgument("one label per resampled sample is required".into()));
    }
    let phase = match config.phase_deg {
        Some(p) => p,
        None => estimate_phase(resampled, config.fundamental_hz)?,
    };
    let theta = |t: f64| normalize_deg(360.0 * config.fundamental_hz * t + phase);
    let regions: Vec<Region> = resampled.samples.iter().map(|s| region_of(theta(s.t))).collect();

    // windows open where θ wraps through 0
    let w = config.window_samples;
    let to_wrap = ((360.0 - theta(resampled.start_time())) / 360.0).rem_euclid(1.0);
    let first = ((to_wrap * w as f64).round() as usize) % w;
    let mut bounds = Vec::new();
    if first > 0 {
        bounds.push(0..first.min(labels.len()));
    }
    let mut start = first;
    while start < labels.len() {
        bounds.push(start..(start + w).min(labels.len()));
        start += w;
    }

    let mut history = Vec::with_capacity(bounds.len());
    let mut fault = FaultLabel::NORMAL;
    let mut first_detect_time = None;
    let mut agreeing = 0usize;
    let mut run_start = 0usize;
    for (index, range) in bounds.into_iter().enumerate() {
        let fused =
            fuse_window_with_support(&labels[range.clone()], &regions[range.clone()], config.fusion_min_support)?;
        let start_time = resampled.samples[range.start].t;

        if first_detect_time.is_some() {
            fault = fault.union(fused);
        } else if fused.is_normal() {
            agreeing = 0;
        } else {
            let agrees = index > 0 && agreeing > 0 && history.last().is_some_and(|w: &WindowRecord| w.fused == fused);
            if agrees {
                agreeing += 1;
            } else {
                agreeing = 1;
                run_start = index;
            }
            if agreeing >= config.confirm_windows {
                first_detect_time = Some(history.get(run_start).map_or(start_time, |w: &WindowRecord| w.start_time));
                fault = fused;
            }
        }

        history.push(WindowRecord { index, start_time, labels: labels[range].to_vec(), fused });
    }

    Ok(FaultReport {
        fault_set: fault.switches().collect(),
        first_detect_time,
        per_window_history: history,
        protection_signal: !fault.is_normal(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, FaultEvent, SimConfig};
    use proptest::prelude::*;

    fn label(s: &str) -> FaultLabel {
        s.parse().unwrap()
    }

    #[test]
    fn resample_period_gives_200_samples() {
        let cfg = SimConfig::ideal(10.0, 50.0, 25_600.0);
        let s = simulate(&cfg, &[], 0.02).unwrap();
        assert_eq!(s.len(), 512);
        let r = resample(&s, 10_000.0).unwrap();
        assert_eq!(r.len(), 200);
        assert_eq!(r.sample_rate, 10_000.0);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn resample_identity() {
        let cfg = SimConfig::default();
        let s = simulate(&cfg, &[], 0.01).unwrap();
        assert_eq!(resample(&s, 25_600.0).unwrap(), s);
    }

    #[test]
    fn resample_error_bound() {
        // linear interpolation of sin: |err| <= A (ω/fs)² / 8 <= A (π f/fs)²/2
        let cfg = SimConfig::ideal(1.0, 50.0, 25_600.0);
        let s = simulate(&cfg, &[], 0.1).unwrap();
        let r = resample(&s, 10_000.0).unwrap();
        let bound = (std::f64::consts::PI * 50.0 / 25_600.0).powi(2) / 2.0;
        let worst = r
            .samples
            .iter()
            .map(|p| (p.currents[0] - (2.0 * std::f64::consts::PI * 50.0 * p.t).sin()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= bound, "{worst} > {bound}");
    }

    #[test]
    fn resample_errors() {
        let cfg = SimConfig::default();
        let s = simulate(&cfg, &[], 0.01).unwrap();
        assert!(resample(&s, 30_000.0).is_err());
        let mut one = s.clone();
        one.samples.truncate(1);
        assert!(resample(&one, 10_000.0).is_err());
    }

    #[test]
    fn debounce_examples() {
        let (a, b) = (label("000000"), label("100000"));
        assert_eq!(debounce(&[a, a, a, b, a, a, a], 3), vec![a; 7]);
        let x = vec![a, b, b, a, b];
        assert_eq!(debounce(&x, 1), x);
        let mut y = vec![a; 5];
        y.extend(vec![b; 5]);
        assert_eq!(debounce(&y, 3), y);
        assert!(debounce(&[], 3).is_empty());
        // a short leading run takes the first long run's label
        assert_eq!(debounce(&[b, a, a, a, b, a], 3), vec![a; 6]);
        assert_eq!(debounce(&[b, a, a, b], 3), vec![b, b, b, b]);
    }

    #[test]
    fn fusion_examples() {
        // S3 seen in SI, normal in SII, S1 in SIV, both in SV
        let labels = [label("001000"), label("000000"), label("100000"), label("101000")];
        let regions = [Region::SI, Region::SII, Region::SIV, Region::SV];
        assert_eq!(fuse_window(&labels, &regions).unwrap(), label("101000"));

        assert!(fuse_window(&[FaultLabel::NORMAL; 6], &Region::ALL).unwrap().is_normal());

        // S4 needs phase B positive; SI has B negative
        let s4 = fuse_window(&[label("000100"); 3], &[Region::SI; 3]).unwrap();
        assert!(s4.is_normal());

        assert!(fuse_window(&[FaultLabel::NORMAL; 2], &[Region::SI]).is_err());

        // two S3 samples are not enough support for three
        let mut few = vec![label("001000"); 2];
        few.extend([FaultLabel::NORMAL; 4]);
        assert!(fuse_window_with_support(&few, &[Region::SI; 6], 3).unwrap().is_normal());
        assert_eq!(fuse_window_with_support(&few, &[Region::SI; 6], 2).unwrap(), label("001000"));
    }

    #[test]
    fn phase_estimate_recovers_offset() {
        for phase in [0.0, 37.0, 181.5, 359.0] {
            let cfg = SimConfig { phase_deg: phase, ..SimConfig::ideal(12.0, 50.0, 10_000.0) };
            let s = simulate(&cfg, &[], 0.04).unwrap();
            let est = estimate_phase(&s, 50.0).unwrap();
            let err = (est - phase + 540.0).rem_euclid(360.0) - 180.0;
            assert!(err.abs() < 1e-6, "{phase}: {est}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(DiagnosisConfig::default().validate().is_ok());
        let bad = DiagnosisConfig { window_samples: 100, ..DiagnosisConfig::default() };
        assert!(bad.validate().is_err());
        let up = DiagnosisConfig { target_rate: 30_000.0, window_samples: 600, ..DiagnosisConfig::default() };
        assert!(up.validate().is_err());
        let zero = DiagnosisConfig { debounce_min_run: 0, ..DiagnosisConfig::default() };
        assert!(zero.validate().is_err());
    }

    /// Labels an oracle classifier would emit: the observable part of the
    /// ground truth at every resampled instant.
    fn oracle_labels(series: &TriPhaseSeries) -> Vec<FaultLabel> {
        series.samples.iter().map(|s| crate::sim::observable_label_at(series, s.t).unwrap()).collect()
    }

    #[test]
    fn latch_with_oracle_labels() {
        let sim = SimConfig::ideal(10.0, 50.0, 25_600.0);
        let tl = [FaultEvent::new(0.04, label("101000"))];
        let s = simulate(&sim, &tl, 0.2).unwrap();
        let config = DiagnosisConfig { phase_deg: Some(0.0), ..DiagnosisConfig::default() };
        let r = resample(&s, config.target_rate).unwrap();
        let report = fuse_and_latch(&r, oracle_labels(&r), &config).unwrap();
        assert!(report.protection_signal);
        assert_eq!(report.fault_label(), label("101000"));
        assert!((report.first_detect_time.unwrap() - 0.04).abs() < 1e-9);
        assert_eq!(report.per_window_history.len(), 10);
    }

    #[test]
    fn confirm_windows_delays_latch() {
        let sim = SimConfig::ideal(10.0, 50.0, 25_600.0);
        let s = simulate(&sim, &[FaultEvent::new(0.05, label("000010"))], 0.2).unwrap();
        let config = DiagnosisConfig { phase_deg: Some(0.0), confirm_windows: 3, ..DiagnosisConfig::default() };
        let r = resample(&s, config.target_rate).unwrap();
        let report = fuse_and_latch(&r, oracle_labels(&r), &config).unwrap();
        // window [40,60) sees the fault first; three agreeing windows start there
        assert_eq!(report.fault_label(), label("000010"));
        assert!((report.first_detect_time.unwrap() - 0.04).abs() < 1e-9);
    }

    #[test]
    fn healthy_oracle_never_latches() {
        let sim = SimConfig::ideal(10.0, 50.0, 25_600.0);
        let s = simulate(&sim, &[], 0.2).unwrap();
        let config = DiagnosisConfig::default();
        let r = resample(&s, config.target_rate).unwrap();
        let report = fuse_and_latch(&r, oracle_labels(&r), &config).unwrap();
        assert!(!report.protection_signal);
        assert!(report.fault_set.is_empty());
        assert_eq!(report.first_detect_time, None);
        let rec = report.to_record(Some("x"), true);
        assert_eq!(rec["protection_signal"], json!(false));
        assert_eq!(rec["fault_set"], json!([]));
        assert_eq!(rec["first_detect_time"], Value::Null);
    }

    #[test]
    fn windows_align_to_theta_zero() {
        let sim = SimConfig { phase_deg: 90.0, ..SimConfig::ideal(10.0, 50.0, 25_600.0) };
        let s = simulate(&sim, &[], 0.1).unwrap();
        let config = DiagnosisConfig::default();
        let r = resample(&s, config.target_rate).unwrap();
        let labels = vec![FaultLabel::NORMAL; r.len()];
        let report = fuse_and_latch(&r, labels, &config).unwrap();
        // θ starts at 90°, so the first full window opens 15 ms in
        assert_eq!(report.per_window_history[0].labels.len(), 150);
        assert!((report.per_window_history[1].start_time - 0.015).abs() < 1e-9);
    }

    #[test]
    fn report_is_deterministic() {
        let sim = SimConfig { phase_deg: 15.0, seed: 4, ..SimConfig::default() };
        let tl = [FaultEvent::new(0.03, label("100000"))];
        let s = simulate(&sim, &tl, 0.1).unwrap();
        let mut set = crate::forest::TrainingSet::new(vec!["i_a".into(), "i_b".into(), "i_c".into()]).unwrap();
        for p in s.samples.iter().step_by(7) {
            set.push(&p.currents, crate::sim::observable_label_at(&s, p.t).unwrap()).unwrap();
        }
        let params = crate::forest::ForestParams { n_trees: 5, seed: 1, ..Default::default() };
        let model = crate::forest::train_forest(&set, &params).unwrap();
        let config = DiagnosisConfig::default();
        let a = run_diagnosis(&model, &s, &config).unwrap();
        assert_eq!(a, run_diagnosis(&model, &s, &config).unwrap());
        assert!(a.protection_signal);

        let wrong_rate = resample(&s, 12_800.0).unwrap();
        assert!(run_diagnosis(&model, &wrong_rate, &config).is_err());
    }

    fn arb_labels() -> impl Strategy<Value = Vec<FaultLabel>> {
        proptest::collection::vec(prop_oneof![Just("000000"), Just("100000"), Just("001000"), Just("101000")], 0..200)
            .prop_map(|v| v.into_iter().map(label).collect())
    }

    proptest! {
        #[test]
        fn debounce_idempotent(labels in arb_labels(), min_run in 1usize..8) {
            let once = debounce(&labels, min_run);
            prop_assert_eq!(once.len(), labels.len());
            prop_assert_eq!(debounce(&once, min_run), once);
        }

        #[test]
        fn fusion_is_monotone(labels in arb_labels(), start in 0usize..6) {
            let regions: Vec<Region> = (0..labels.len()).map(|k| Region::ALL[(start + k / 7) % 6]).collect();
            let fused = fuse_window(&labels, &regions).unwrap();
            let union = labels.iter().fold(FaultLabel::NORMAL, |a, l| a.union(*l));
            prop_assert!(fused.is_subset_of(union));
        }

        // latch within (c + 1) periods of a single-switch fault, noiseless
        // simulator and an oracle classifier
        #[test]
        fn latency_bound(
            switch in 1u8..=6,
            t_fault in 0.02f64..0.1,
            phase in 0.0f64..360.0,
            c in 1usize..=3,
        ) {
            let fault = FaultLabel::single(Switch::new(switch).unwrap());
            let sim = SimConfig { phase_deg: phase, ..SimConfig::ideal(10.0, 50.0, 25_600.0) };
            let s = simulate(&sim, &[FaultEvent::new(t_fault, fault)], 0.2).unwrap();
            let config = DiagnosisConfig { confirm_windows: c, ..DiagnosisConfig::default() };
            let r = resample(&s, config.target_rate).unwrap();
            let report = fuse_and_latch(&r, oracle_labels(&r), &config).unwrap();
            prop_assert_eq!(report.fault_label(), fault);

            let start = report.first_detect_time.unwrap();
            let first = report.per_window_history.iter().position(|w| w.start_time == start).unwrap();
            let latch = &report.per_window_history[first + c - 1];
            let latched_at = latch.start_time + latch.labels.len() as f64 / config.target_rate;
            prop_assert!(latched_at <= t_fault + (c + 1) as f64 * 0.02 + 1e-9, "latched at {} for fault at {}", latched_at, t_fault);
        }
    }
}
