use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use eoril_ffi::*;

fn last_error() -> String {
    let p = eoril_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn bundled(name: &str) -> (*mut EorilSequence, bool) {
    let name = CString::new(name).unwrap();
    let mut seq = ptr::null_mut();
    let mut flaggable = false;
    let st = unsafe { eoril_sequence_bundled(name.as_ptr(), &mut seq, &mut flaggable) };
    assert_eq!(st, EorilStatus::Ok);
    (seq, flaggable)
}

#[test]
fn verify_no_flag() {
    let (seq, flaggable) = bundled("no_flag");
    assert!(!flaggable);
    let mut v = EorilVerification::default();
    let st = unsafe { eoril_verify(seq, false, EorilGate::Identity, 1e-9, &mut v) };
    assert_eq!(st, EorilStatus::Ok);
    assert!(v.passed && v.f_total < 1e-9 && v.has_reset);
    assert!((v.reset_theta - std::f64::consts::PI / 3.0).abs() < 1e-6);
    unsafe { eoril_sequence_free(seq) };
}

#[test]
fn angles_round_trip() {
    let (seq, _) = bundled("best_flag");
    let mut angles = [0.0; EORIL_SLOT_COUNT];
    assert_eq!(
        unsafe { eoril_sequence_angles_pi(seq, angles.as_mut_ptr(), angles.len()) },
        EorilStatus::Ok
    );
    let mut copy = ptr::null_mut();
    assert_eq!(
        unsafe { eoril_sequence_from_angles_pi(angles.as_ptr(), angles.len(), &mut copy) },
        EorilStatus::Ok
    );
    let mut a = EorilVerification::default();
    let mut b = EorilVerification::default();
    unsafe {
        eoril_verify(seq, true, EorilGate::Identity, 1e-5, &mut a);
        eoril_verify(copy, true, EorilGate::Identity, 1e-5, &mut b);
        eoril_sequence_free(seq);
        eoril_sequence_free(copy);
    }
    assert_eq!(a.f_total, b.f_total);
    assert!(a.passed);
}

#[test]
fn errors_are_reported() {
    let name = CString::new("nope").unwrap();
    let mut seq = ptr::null_mut();
    let st = unsafe { eoril_sequence_bundled(name.as_ptr(), &mut seq, ptr::null_mut()) };
    assert_eq!(st, EorilStatus::InvalidArgument);
    assert!(seq.is_null());
    assert!(last_error().contains("nope"));

    let st = unsafe { eoril_sequence_bundled(ptr::null(), &mut seq, ptr::null_mut()) };
    assert_eq!(st, EorilStatus::NullPointer);

    let short = [0.5; 3];
    let st = unsafe { eoril_sequence_from_angles_pi(short.as_ptr(), short.len(), &mut seq) };
    assert_eq!(st, EorilStatus::InvalidArgument);

    let mut g = EorilGaugeStationary::default();
    assert_eq!(unsafe { eoril_gauge_stationary(2.0, &mut g) }, EorilStatus::InvalidArgument);

    let bad = EorilFlagInputs {
        p_l_ind: 0.01,
        eps_f: 0.001,
        ..Default::default()
    };
    let mut r = EorilFlagResult::default();
    assert_eq!(unsafe { eoril_flag(&bad, &mut r) }, EorilStatus::Inconsistent);

    unsafe {
        eoril_sequence_free(ptr::null_mut());
        eoril_chi_free(ptr::null_mut());
    }
}

#[test]
fn ideal_chi_and_metrics() {
    let (seq, flaggable) = bundled("no_flag");
    let mut chi = ptr::null_mut();
    let st = unsafe { eoril_chi_average(seq, flaggable, 0.0, EorilNoiseModel::Static, 16, 1, &mut chi) };
    assert_eq!(st, EorilStatus::Ok);
    let mut m = EorilMetrics::default();
    assert_eq!(unsafe { eoril_chi_metrics(chi, seq, &mut m) }, EorilStatus::Ok);
    assert!(m.has_eps_r);
    assert!(m.p_l_ind.mean.abs() < 1e-12 && (1.0 - m.f_q.mean).abs() < 1e-12);
    assert!(m.eps_f.mean.abs() < 1e-12 && m.eps_r.mean.abs() < 1e-12);
    let (mut trace, mut re, mut im) = (0.0, 0.0, 0.0);
    for i in 0..EORIL_CHI_DIM {
        assert_eq!(unsafe { eoril_chi_entry(chi, i, i, &mut re, &mut im) }, EorilStatus::Ok);
        trace += re;
    }
    assert!((trace - 3.0).abs() < 1e-12);
    assert_eq!(
        unsafe { eoril_chi_entry(chi, EORIL_CHI_DIM, 0, &mut re, &mut im) },
        EorilStatus::InvalidArgument
    );
    unsafe {
        eoril_chi_free(chi);
        eoril_sequence_free(seq);
    }
}

#[test]
fn flag_and_gauge() {
    let inputs = EorilFlagInputs {
        eps_l: 0.01,
        ..Default::default()
    };
    let mut r = EorilFlagResult::default();
    assert_eq!(unsafe { eoril_flag(&inputs, &mut r) }, EorilStatus::Ok);
    assert_eq!(r.leading_given_0, 0.0);
    assert!((r.exact_total - 1.0).abs() < 1e-12);
    let mut g = EorilGaugeStationary::default();
    assert_eq!(unsafe { eoril_gauge_stationary(0.0, &mut g) }, EorilStatus::Ok);
    assert!((g.p_down - 0.5).abs() < 1e-12 && (g.decay_eigenvalue + 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(eoril_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/eoril.h")
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "eoril.h"
int main(void) {
    EorilSequence *seq = NULL;
    bool flaggable = false;
    if (eoril_sequence_bundled("no_flag", &seq, &flaggable) != EORIL_STATUS_OK) return 3;
    EorilVerification v;
    if (eoril_verify(seq, flaggable, EORIL_GATE_IDENTITY, 1e-9, &v) != EORIL_STATUS_OK) return 4;
    eoril_sequence_free(seq);
    if (eoril_sequence_bundled("missing", &seq, NULL) != EORIL_STATUS_INVALID_ARGUMENT) return 5;
    printf("%s %d %.3e\n", eoril_version(), v.passed, v.f_total);
    return v.passed ? 0 : 6;
}
"#;

#[test]
fn header_is_valid_c() {
    let h = std::fs::read_to_string(header()).expect("header generated by the build script");
    for f in ["eoril_verify", "eoril_chi_average", "eoril_last_error", "EorilStatus"] {
        assert!(h.contains(f), "{f} missing from header");
    }
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping compile check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = header().parent().unwrap().to_path_buf();
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success(), "header does not compile as C99");

    // link against the static library when it sits next to this test binary
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|d| d.parent()).map(|d| d.join("libeoril_ffi.a"));
    let Some(lib) = lib.filter(|l| l.exists()) else {
        eprintln!("static library not found; skipping link check");
        return;
    };
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-I"])
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "linking against {} failed", lib.display());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "C smoke test exited with {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
