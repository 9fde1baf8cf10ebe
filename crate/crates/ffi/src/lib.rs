//! C interface to `rwalk`.
//!
//! Walks are opaque [`RwalkWalk`] handles created from walk-spec text and
//! released with [`rwalk_walk_free`]. Every function returns an
//! [`RwalkStatus`]; on failure [`rwalk_last_error_message`] describes the
//! error for the calling thread. Strings returned through out-parameters
//! are owned by the caller and released with [`rwalk_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rwalk::pipeline::{self, CheckName};
use rwalk::recurrence;
use rwalk::walkspec::Walk;
use rwalk::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RwalkStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Usage = 4,
    Io = 5,
    /// The law fails a mathematical precondition (degenerate or reducible support).
    Precondition = 6,
    /// A verification check ran and failed.
    CheckFailed = 7,
    /// Any other numerical error.
    Numerical = 8,
    Panic = 9,
}

/// Opaque walk handle.
pub struct RwalkWalk {
    walk: Walk,
}

/// Minimizer output. Only the first `dim` entries of `theta_star` are used.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RwalkSpectral {
    pub dim: u32,
    pub theta_star: [f64; 3],
    pub rho: f64,
    pub r: f64,
    pub gradient_norm: f64,
    pub iterations: u64,
}

/// Monte Carlo output.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RwalkSimulation {
    pub trajectories: u64,
    pub horizon: u64,
    pub hits: u64,
    pub return_fraction: f64,
    pub ci_halfwidth: f64,
    pub drift_norm: f64,
    pub drift_bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RwalkStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse(_) => RwalkStatus::Parse,
            Error::Usage(_) => RwalkStatus::Usage,
            Error::Io(_) => RwalkStatus::Io,
            Error::DegenerateSupport { .. } | Error::NotIrreducible { .. } => RwalkStatus::Precondition,
            _ => RwalkStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(RwalkStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RwalkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RwalkStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RwalkStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Failure(RwalkStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn walk_ref<'a>(w: *const RwalkWalk) -> Result<&'a Walk, Failure> {
    w.as_ref().map(|h| &h.walk).ok_or_else(|| null("walk"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(RwalkStatus::Numerical, "string contains a NUL byte".into()))
}

fn emit_handle(walk: Walk, out: *mut *mut RwalkWalk) {
    let handle = Box::into_raw(Box::new(RwalkWalk { walk }));
    // SAFETY: callers check `out` for null before building the walk.
    unsafe { *out = handle };
}

/// Parses walk-spec text into a new handle stored in `*out`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_walk_from_str(text: *const c_char, out: *mut *mut RwalkWalk) -> RwalkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let walk = Walk::parse(read_str(text, "text")?)?;
        emit_handle(walk, out);
        Ok(())
    })
}

/// Loads a walk-spec file into a new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_walk_from_file(path: *const c_char, out: *mut *mut RwalkWalk) -> RwalkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let walk = Walk::load(read_str(path, "path")?)?;
        emit_handle(walk, out);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `walk` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rwalk_walk_free(walk: *mut RwalkWalk) {
    if !walk.is_null() {
        drop(Box::from_raw(walk));
    }
}

/// Writes the walk-spec text of `walk` to `*out`.
///
/// # Safety
/// `walk` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_walk_to_string(walk: *const RwalkWalk, out: *mut *mut c_char) -> RwalkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = walk_ref(walk)?.spec.to_toml()?;
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rwalk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Minimizes the moment-generating function.
///
/// # Safety
/// `walk` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_analyze(walk: *const RwalkWalk, out: *mut RwalkSpectral) -> RwalkStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (_, res) = rwalk::spectral::find_exponential(&walk_ref(walk)?.law)?;
        let mut theta = [0.0; 3];
        theta[..res.theta_star.len()].copy_from_slice(&res.theta_star);
        *out = RwalkSpectral {
            dim: res.theta_star.len() as u32,
            theta_star: theta,
            rho: res.rho,
            r: res.r,
            gradient_norm: res.gradient_norm,
            iterations: res.iterations as u64,
        };
        Ok(())
    })
}

/// Stores the tilted walk `R * phi * v` as a new handle in `*out`.
///
/// # Safety
/// `walk` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_tilt(walk: *const RwalkWalk, out: *mut *mut RwalkWalk) -> RwalkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (spec, _) = pipeline::tilt(walk_ref(walk)?)?;
        let tilted = Walk::parse(&spec.to_toml()?)?;
        emit_handle(tilted, out);
        Ok(())
    })
}

/// Runs the checks named in `checks` (`"all"` or a comma-separated list;
/// null means all). Returns `CheckFailed` if any fails. When `report` is
/// not null the JSON report is stored there, also on check failure.
///
/// # Safety
/// `walk` must be a live handle; `checks` null or a NUL-terminated string;
/// `report` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_verify(
    walk: *const RwalkWalk,
    checks: *const c_char,
    report: *mut *mut c_char,
) -> RwalkStatus {
    guard(|| {
        let names = if checks.is_null() {
            CheckName::ALL.to_vec()
        } else {
            CheckName::parse_list(read_str(checks, "checks")?)?
        };
        let r = pipeline::verify(walk_ref(walk)?, &names)?;
        if !report.is_null() {
            *report = into_c_string(r.to_json()?)?;
        }
        if r.all_checks_pass() {
            Ok(())
        } else {
            let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            Err(Failure(RwalkStatus::CheckFailed, format!("failed checks: {}", failed.join(","))))
        }
    })
}

/// Monte Carlo return fraction to the identity.
///
/// # Safety
/// `walk` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rwalk_simulate(
    walk: *const RwalkWalk,
    trajectories: u64,
    horizon: u64,
    seed: u64,
    out: *mut RwalkSimulation,
) -> RwalkStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let w = walk_ref(walk)?;
        let e = w.group().identity();
        let r = recurrence::simulate_harris(&w.law, &[e], trajectories as usize, horizon as usize, seed)?;
        *out = RwalkSimulation {
            trajectories: r.trajectories as u64,
            horizon: r.horizon as u64,
            hits: r.hits,
            return_fraction: r.return_fraction,
            ci_halfwidth: r.ci_halfwidth,
            drift_norm: r.drift_norm,
            drift_bound: r.drift_bound,
        };
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn rwalk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rwalk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_mapping() {
        let cases = [
            (Error::Parse("x".into()), RwalkStatus::Parse),
            (Error::Usage("x".into()), RwalkStatus::Usage),
            (Error::NotIrreducible { witness: "w".into() }, RwalkStatus::Precondition),
            (Error::Overflow { exponent: 800.0 }, RwalkStatus::Numerical),
        ];
        for (e, s) in cases {
            assert_eq!(Failure::from(e).0, s);
        }
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), RwalkStatus::Panic);
        assert!(!rwalk_last_error_message().is_null());
        assert_eq!(guard(|| Ok(())), RwalkStatus::Ok);
        assert!(rwalk_last_error_message().is_null());
    }
}
