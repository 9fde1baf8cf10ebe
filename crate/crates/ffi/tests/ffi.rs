use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use rwalk_ffi::*;

const BERNOULLI: &str = "[group]\nkind = \"lattice\"\nd = 1\n\n[[law]]\nelement = [1]\nprob = \"0.25\"\n\n[[law]]\nelement = [-1]\nprob = \"0.75\"\n";

fn from_str(text: &str) -> (RwalkStatus, *mut RwalkWalk) {
    let c = CString::new(text).unwrap();
    let mut w = ptr::null_mut();
    let status = unsafe { rwalk_walk_from_str(c.as_ptr(), &mut w) };
    (status, w)
}

fn last_error() -> String {
    let p = rwalk_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn analyze_and_tilt() {
    let (status, w) = from_str(BERNOULLI);
    assert_eq!(status, RwalkStatus::Ok);
    let mut s = RwalkSpectral::default();
    assert_eq!(unsafe { rwalk_analyze(w, &mut s) }, RwalkStatus::Ok);
    assert_eq!(s.dim, 1);
    assert!((s.theta_star[0] - 0.5 * 3f64.ln()).abs() < 1e-8);
    assert!((s.rho * s.r - 1.0).abs() < 1e-12);

    let mut t = ptr::null_mut();
    assert_eq!(unsafe { rwalk_tilt(w, &mut t) }, RwalkStatus::Ok);
    let mut text = ptr::null_mut();
    assert_eq!(unsafe { rwalk_walk_to_string(t, &mut text) }, RwalkStatus::Ok);
    let emitted = unsafe { CStr::from_ptr(text) }.to_str().unwrap().to_string();
    assert_eq!(emitted.matches("prob = \"0.5\"").count(), 2);
    let mut ts = RwalkSpectral::default();
    assert_eq!(unsafe { rwalk_analyze(t, &mut ts) }, RwalkStatus::Ok);
    assert!(ts.theta_star[0].abs() < 1e-8 && (ts.r - 1.0).abs() < 1e-8);
    unsafe {
        rwalk_string_free(text);
        rwalk_walk_free(t);
        rwalk_walk_free(w);
    }
}

#[test]
fn verify_with_report() {
    let (_, w) = from_str(BERNOULLI);
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { rwalk_verify(w, ptr::null(), &mut report) }, RwalkStatus::Ok);
    let json = unsafe { CStr::from_ptr(report) }.to_str().unwrap();
    assert!(json.contains("\"command\": \"verify\""));
    unsafe { rwalk_string_free(report) };

    let bad = CString::new("eq1,nope").unwrap();
    assert_eq!(unsafe { rwalk_verify(w, bad.as_ptr(), ptr::null_mut()) }, RwalkStatus::Usage);
    assert!(last_error().contains("nope"));
    unsafe { rwalk_walk_free(w) };
}

#[test]
fn failing_check_reports_status() {
    let (_, w) = from_str(&format!("{BERNOULLI}\n[options]\nwindow_radius = 0\n"));
    let eq1 = CString::new("eq1").unwrap();
    assert_eq!(unsafe { rwalk_verify(w, eq1.as_ptr(), ptr::null_mut()) }, RwalkStatus::CheckFailed);
    assert!(last_error().contains("eq1"));
    unsafe { rwalk_walk_free(w) };
}

#[test]
fn simulate_is_deterministic() {
    let (_, w) = from_str(BERNOULLI);
    let mut a = RwalkSimulation::default();
    let mut b = RwalkSimulation::default();
    assert_eq!(unsafe { rwalk_simulate(w, 300, 300, 5, &mut a) }, RwalkStatus::Ok);
    assert_eq!(unsafe { rwalk_simulate(w, 300, 300, 5, &mut b) }, RwalkStatus::Ok);
    assert_eq!(a.hits, b.hits);
    assert_eq!(a.return_fraction.to_bits(), b.return_fraction.to_bits());
    assert_eq!(unsafe { rwalk_simulate(w, 0, 300, 5, &mut a) }, RwalkStatus::Usage);
    unsafe { rwalk_walk_free(w) };
}

#[test]
fn error_statuses() {
    let (status, w) = from_str(&BERNOULLI.replace("0.75", "0.65"));
    assert_eq!(status, RwalkStatus::Parse);
    assert!(w.is_null());
    assert!(last_error().contains("[[law]]"));

    let (_, one_sided) = from_str("[group]\nkind = \"lattice\"\nd = 1\n\n[[law]]\nelement = [1]\nprob = \"1\"\n");
    let mut s = RwalkSpectral::default();
    assert_eq!(unsafe { rwalk_analyze(one_sided, &mut s) }, RwalkStatus::Precondition);
    assert!(last_error().contains("semigroup generated"));
    unsafe { rwalk_walk_free(one_sided) };

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { rwalk_walk_from_str(ptr::null(), &mut out) }, RwalkStatus::NullArgument);
    assert_eq!(unsafe { rwalk_analyze(ptr::null(), &mut s) }, RwalkStatus::NullArgument);
    let missing = CString::new("/nonexistent/walk.toml").unwrap();
    assert_eq!(unsafe { rwalk_walk_from_file(missing.as_ptr(), &mut out) }, RwalkStatus::Io);
    unsafe { rwalk_walk_free(ptr::null_mut()) };
}

#[test]
fn loads_fixture_file() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/specs/cyclic6.toml");
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { rwalk_walk_from_file(c.as_ptr(), &mut w) }, RwalkStatus::Ok);
    let mut s = RwalkSpectral::default();
    assert_eq!(unsafe { rwalk_analyze(w, &mut s) }, RwalkStatus::Ok);
    assert_eq!((s.dim, s.rho, s.r), (0, 1.0, 1.0));
    unsafe { rwalk_walk_free(w) };
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rwalk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_interface() {
    let header_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/rwalk.h");
    let header = std::fs::read_to_string(&header_path).unwrap();
    for name in [
        "rwalk_walk_from_str",
        "rwalk_walk_from_file",
        "rwalk_walk_free",
        "rwalk_walk_to_string",
        "rwalk_string_free",
        "rwalk_analyze",
        "rwalk_tilt",
        "rwalk_verify",
        "rwalk_simulate",
        "rwalk_last_error_message",
        "rwalk_version",
        "RWALK_STATUS_CHECK_FAILED",
        "typedef struct RwalkWalk RwalkWalk",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let compiled = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header_path)
        .status();
    if let Ok(status) = compiled {
        assert!(status.success(), "header does not compile as C");
    }
}
