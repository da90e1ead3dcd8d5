use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ocdiag::forest::{train_forest, write_model, ForestParams, TrainingSet};
use ocdiag::sim::{observable_label_at, simulate, FaultEvent, SimConfig};
use ocdiag_ffi::*;

/// Small forest trained on observable labels of a few simulated faults.
fn model_text() -> String {
    let mut set = TrainingSet::new(vec!["i_a".into(), "i_b".into(), "i_c".into()]).unwrap();
    for (k, label) in ["000000", "100000", "001000", "101000"].iter().enumerate() {
        let sim = SimConfig { phase_deg: 40.0 * k as f64, seed: k as u64, ..SimConfig::default() };
        let tl = if k == 0 { vec![] } else { vec![FaultEvent::new(0.0, label.parse().unwrap())] };
        let s = simulate(&sim, &tl, 0.06).unwrap();
        for p in s.samples.iter().step_by(3) {
            set.push(&p.currents, observable_label_at(&s, p.t).unwrap()).unwrap();
        }
    }
    write_model(&train_forest(&set, &ForestParams { n_trees: 15, seed: 2, ..Default::default() }).unwrap()).unwrap()
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { ocdiag_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut OcdiagModel {
    let c = CString::new(text).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ocdiag_model_parse(c.as_ptr(), &mut model) }, OcdiagStatus::Ok);
    model
}

#[test]
fn predict_and_width() {
    let model = parse(&model_text());
    let mut width = 0;
    assert_eq!(unsafe { ocdiag_model_width(model, &mut width) }, OcdiagStatus::Ok);
    assert_eq!(width, 3);

    let mut label = 0xff;
    let healthy = [14.28, -7.14, -7.14];
    assert_eq!(unsafe { ocdiag_model_predict(model, healthy.as_ptr(), 3, &mut label) }, OcdiagStatus::Ok);
    assert_eq!(label, 0);

    let short = [1.0, 2.0];
    assert_eq!(unsafe { ocdiag_model_predict(model, short.as_ptr(), 2, &mut label) }, OcdiagStatus::WidthMismatch);
    assert!(last_error().contains("width mismatch"));
    unsafe { ocdiag_model_free(model) };
}

#[test]
fn diagnose_raw_buffers() {
    let model = parse(&model_text());
    let sim = SimConfig { seed: 9, ..SimConfig::default() };
    let s = simulate(&sim, &[FaultEvent::new(0.04, "101000".parse().unwrap())], 0.2).unwrap();
    let col = |k: usize| s.samples.iter().map(|p| p.currents[k]).collect::<Vec<_>>();
    let (a, b, c) = (col(0), col(1), col(2));

    let mut report = OcdiagReport { fault_bits: 0, protection_signal: false, first_detect_time: 0.0, windows: 0 };
    let status = unsafe {
        ocdiag_diagnose(model, a.as_ptr(), b.as_ptr(), c.as_ptr(), a.len(), 25_600.0, 0.0, ptr::null(), &mut report)
    };
    assert_eq!(status, OcdiagStatus::Ok);
    assert!(report.protection_signal);
    assert_eq!(report.fault_bits, 0b101000);
    assert!((0.04..=0.08).contains(&report.first_detect_time));
    assert_eq!(report.windows, 10);

    let mut cfg = ocdiag_diagnosis_config_default();
    cfg.window_samples = 7;
    let status = unsafe {
        ocdiag_diagnose(model, a.as_ptr(), b.as_ptr(), c.as_ptr(), a.len(), 25_600.0, 0.0, &cfg, &mut report)
    };
    assert_eq!(status, OcdiagStatus::InvalidArgument);
    assert!(last_error().contains("window_samples"));
    unsafe { ocdiag_model_free(model) };
}

#[test]
fn error_codes() {
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ocdiag_model_parse(ptr::null(), &mut model) }, OcdiagStatus::NullPointer);
    assert!(model.is_null());

    let bad = CString::new(model_text().replacen("ocdiag-forest 1", "ocdiag-forest 2", 1)).unwrap();
    assert_eq!(unsafe { ocdiag_model_parse(bad.as_ptr(), &mut model) }, OcdiagStatus::Version);
    let garbage = CString::new("ocdiag-forest 1\nn_trees x\n").unwrap();
    assert_eq!(unsafe { ocdiag_model_parse(garbage.as_ptr(), &mut model) }, OcdiagStatus::Parse);
    assert!(last_error().starts_with("line 2"));

    let missing = CString::new("/nonexistent/model.txt").unwrap();
    assert_eq!(unsafe { ocdiag_model_load(missing.as_ptr(), &mut model) }, OcdiagStatus::Io);

    let mut width = 0;
    assert_eq!(unsafe { ocdiag_model_width(ptr::null(), &mut width) }, OcdiagStatus::NullPointer);
    unsafe { ocdiag_model_free(ptr::null_mut()) };

    // success clears the message; a null buffer reports the needed size
    let good = parse(&model_text());
    assert_eq!(unsafe { ocdiag_last_error_message(ptr::null_mut(), 0) }, 0);
    unsafe { ocdiag_model_free(good) };
    let v = unsafe { CStr::from_ptr(ocdiag_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    std::fs::write(&path, model_text()).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { ocdiag_model_load(c.as_ptr(), &mut model) }, OcdiagStatus::Ok);
    assert!(!model.is_null());
    unsafe { ocdiag_model_free(model) };
}

/// Compile and run a C program against the generated header and the static
/// library. Skipped when no C compiler or static library is available.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else { return };
    let profile_dir = exe.parent().and_then(|d| d.parent()).map(PathBuf::from).unwrap();
    let lib = profile_dir.join("libocdiag_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.txt");
    std::fs::write(&model, model_text()).unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "ocdiag.h"
int main(int argc, char **argv) {
    OcdiagModel *m = NULL;
    if (ocdiag_model_load(argv[1], &m) != OCDIAG_STATUS_OK) return 10;
    double x[3] = {14.28, -7.14, -7.14};
    uint8_t label = 0xff;
    if (ocdiag_model_predict(m, x, 3, &label) != OCDIAG_STATUS_OK) return 11;
    if (ocdiag_model_predict(m, x, 2, &label) != OCDIAG_STATUS_WIDTH_MISMATCH) return 12;
    char msg[128];
    if (ocdiag_last_error_message(msg, sizeof msg) == 0) return 13;
    OcdiagDiagnosisConfig cfg = ocdiag_diagnosis_config_default();
    ocdiag_model_free(m);
    printf("%u %zu %s\n", label, cfg.window_samples, ocdiag_version());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let cc = Command::new("cc")
        .args([src.to_str().unwrap(), "-I", include, lib.to_str().unwrap(), "-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&bin).arg(&model).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), format!("0 200 {}", env!("CARGO_PKG_VERSION")));
}
