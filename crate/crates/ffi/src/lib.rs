//! C ABI over the `timebin` tomography pipelines.
//!
//! Every function returns a [`TbStatus`]; results travel through out-pointers.
//! Handles are opaque and must be released with their matching `*_free`.
//! On failure a message is kept per thread and read with [`tb_last_error`].

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use timebin::cli::default_single;
use timebin::config::ScenarioConfig;
use timebin::tomography::pair::{center_peak, compute_gbar, concurrence, concurrence_approx, reconstruct_pair};
use timebin::tomography::single::{compute_gbar_single, fit_fringe, integrate_terms, reconstruct};
use timebin::Error;

/// Result codes; zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    NoSignal = 4,
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

/// Scenario description: source, phase grid and integration grid.
pub struct TbScenario {
    config: ScenarioConfig,
}

/// Reconstructed two-photon density matrix in the basis EE, EL, LE, LL.
pub struct TbPairState {
    rho: timebin::math::ComplexMatrix,
}

/// Reconstructed single-photon density matrix in the basis E, L.
pub struct TbSingleState {
    rho: timebin::math::ComplexMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config(_) => TbStatus::Config,
            Error::NoSignal(_) | Error::NoCounts(_) => TbStatus::NoSignal,
            Error::NoConvergence { .. } => TbStatus::Numerical,
            Error::Io(_) => TbStatus::Io,
            _ => TbStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

/// Runs `body`, converting errors and panics into a status and a stored message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            TbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TbStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or points to a live value of `T`.
unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for one write.
unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// # Safety
/// `out` is null or valid for one write.
unsafe fn write_f64(out: *mut f64, value: f64) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Copies an `n × n` matrix as interleaved `re, im` pairs in row-major order.
///
/// # Safety
/// `out` is null or valid for `len` writes.
unsafe fn write_matrix(m: &timebin::math::ComplexMatrix, out: *mut f64, len: usize) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    let needed = 2 * m.rows() * m.cols();
    if len < needed {
        return Err(Failure(TbStatus::InvalidArgument, format!("buffer holds {len} values, need {needed}")));
    }
    let out = std::slice::from_raw_parts_mut(out, needed);
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let z = m[(r, c)];
            let k = 2 * (r * m.cols() + c);
            out[k] = z.re;
            out[k + 1] = z.im;
        }
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tb_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a TOML scenario.
///
/// # Safety
/// `toml` is a NUL-terminated string; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_scenario_from_toml(toml: *const c_char, out: *mut *mut TbScenario) -> TbStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Failure(TbStatus::InvalidArgument, format!("toml is not UTF-8: {e}")))?;
        emit(out, TbScenario { config: ScenarioConfig::from_toml_str(text)? })
    })
}

/// Built-in pair scenario: a Bell state emitted in early and late bins.
///
/// # Safety
/// `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_scenario_default_pair(out: *mut *mut TbScenario) -> TbStatus {
    guard(|| emit(out, TbScenario { config: ScenarioConfig::default_pair() }))
}

/// Built-in single-photon scenario: an equal early/late superposition.
///
/// # Safety
/// `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_scenario_default_single(out: *mut *mut TbScenario) -> TbStatus {
    guard(|| emit(out, TbScenario { config: default_single() }))
}

/// Sets the integration nodes per time bin.
///
/// # Safety
/// `scenario` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn tb_scenario_set_steps_per_bin(scenario: *mut TbScenario, steps: usize) -> TbStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        if steps == 0 {
            return Err(Failure(TbStatus::InvalidArgument, "steps must be positive".into()));
        }
        s.config.grid.steps_per_bin = steps;
        Ok(())
    })
}

/// # Safety
/// `scenario` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_scenario_free(scenario: *mut TbScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Reconstructs the two-photon state from window-integrated correlations.
///
/// # Safety
/// `scenario` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_reconstruct_pair(scenario: *const TbScenario, out: *mut *mut TbPairState) -> TbStatus {
    guard(|| {
        let cfg = &borrow(scenario, "scenario")?.config;
        let source = cfg.pair_source()?;
        let gbar = compute_gbar(&*source, cfg.grid.steps_per_bin)?;
        let state = reconstruct_pair(&gbar, cfg.outputs.project_physical)?;
        emit(out, TbPairState { rho: state.rho })
    })
}

/// # Safety
/// `state` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_pair_state_free(state: *mut TbPairState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Writes the 4 × 4 matrix as 32 interleaved `re, im` values, row-major.
///
/// # Safety
/// `state` is a live handle; `out` is valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tb_pair_state_rho(state: *const TbPairState, out: *mut f64, len: usize) -> TbStatus {
    guard(|| write_matrix(&borrow(state, "state")?.rho, out, len))
}

/// Wootters concurrence.
///
/// # Safety
/// `state` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_pair_concurrence(state: *const TbPairState, out: *mut f64) -> TbStatus {
    guard(|| write_f64(out, concurrence(&borrow(state, "state")?.rho)?))
}

/// `max(0, 2|ρ_EE,LL| − ρ_EL,EL − ρ_LE,LE)`.
///
/// # Safety
/// `state` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_pair_concurrence_approx(state: *const TbPairState, out: *mut f64) -> TbStatus {
    guard(|| write_f64(out, concurrence_approx(&borrow(state, "state")?.rho)))
}

/// Center coincidence peak at the given interferometer phases, in units of the corner peaks.
///
/// # Safety
/// `state` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_pair_center_peak(
    state: *const TbPairState,
    phi_b: f64,
    phi_x: f64,
    out: *mut f64,
) -> TbStatus {
    guard(|| {
        let rho = &borrow(state, "state")?.rho;
        if !(phi_b.is_finite() && phi_x.is_finite()) {
            return Err(Failure(TbStatus::InvalidArgument, "phases must be finite".into()));
        }
        write_f64(out, center_peak(rho, phi_b, phi_x))
    })
}

/// Reconstructs the single-photon state.
///
/// # Safety
/// `scenario` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_reconstruct_single(scenario: *const TbScenario, out: *mut *mut TbSingleState) -> TbStatus {
    guard(|| {
        let cfg = &borrow(scenario, "scenario")?.config;
        let source = cfg.single_source()?;
        let state = reconstruct(&compute_gbar_single(&*source, cfg.grid.steps_per_bin)?)?;
        emit(out, TbSingleState { rho: state.rho })
    })
}

/// # Safety
/// `state` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_single_state_free(state: *mut TbSingleState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Writes the 2 × 2 matrix as 8 interleaved `re, im` values, row-major.
///
/// # Safety
/// `state` is a live handle; `out` is valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tb_single_state_rho(state: *const TbSingleState, out: *mut f64, len: usize) -> TbStatus {
    guard(|| write_matrix(&borrow(state, "state")?.rho, out, len))
}

/// Fringe visibility of the middle peak over the scenario's phase list.
///
/// # Safety
/// `scenario` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn tb_single_visibility(scenario: *const TbScenario, out: *mut f64) -> TbStatus {
    guard(|| {
        let cfg = &borrow(scenario, "scenario")?.config;
        let source = cfg.single_source()?;
        let table = integrate_terms(&*source, cfg.grid.steps_per_bin)?.peak_table(&cfg.phases.phi.values());
        let norm = table.p_early + table.p_late;
        if !(norm > 0.0) {
            return Err(Failure(TbStatus::NoSignal, format!("outer peaks sum to {norm}")));
        }
        let samples: Vec<(f64, f64)> = table.p_mid.iter().map(|&(phi, p)| (phi, p / norm)).collect();
        write_f64(out, fit_fringe(&samples)?.visibility)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_are_reported_per_thread() {
        let mut s = ptr::null_mut();
        let status = unsafe { tb_scenario_from_toml(c"seed = \"x\"".as_ptr(), &mut s) };
        assert_eq!(status, TbStatus::Config);
        assert!(s.is_null());
        let message = unsafe { CStr::from_ptr(tb_last_error()) }.to_string_lossy().into_owned();
        assert!(message.contains("seed"), "{message}");
        std::thread::spawn(|| assert!(tb_last_error().is_null())).join().unwrap();
    }

    #[test]
    fn panics_become_a_status() {
        assert_eq!(guard(|| panic!("boom")), TbStatus::Panic);
        let message = unsafe { CStr::from_ptr(tb_last_error()) }.to_string_lossy().into_owned();
        assert!(message.contains("boom"));
    }

    #[test]
    fn version_matches_the_package() {
        let v = unsafe { CStr::from_ptr(tb_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
