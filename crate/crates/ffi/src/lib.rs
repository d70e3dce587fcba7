//! C ABI over `nehari-core`.
//!
//! Handles are opaque and owned by the caller once returned; each has a
//! matching `_free` function that accepts null. Every fallible entry point
//! returns an [`NlsStatus`]; on failure the message is kept per thread and
//! read with [`nls_last_error_message`]. Panics never cross the boundary:
//! they are reported as [`NlsStatus::Panic`].
//!
//! Field buffers hold one value per grid node in node order (row-major,
//! `x` slowest), boundary nodes included, with boundary values zero.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nehari_core::app;
use nehari_core::config::{parse_config, RunConfig, DEFAULT_CONFIG};
use nehari_core::energy::{self, StatePair};
use nehari_core::grid::Field;
use nehari_core::minimize::{self, SolveReport};
use nehari_core::nehari;
use nehari_core::NlsError;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    NumericalInput = 5,
    GridMismatch = 6,
    Integrator = 7,
    Io = 8,
    BufferLength = 9,
    Panic = 10,
}

/// Parsed run configuration.
pub struct NlsConfig {
    inner: RunConfig,
}

/// Result of a ground-state solve.
pub struct NlsSolution {
    state: StatePair,
    report: SolveReport,
    params: energy::PhysParams,
}

/// Functional values at one state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NlsBreakdown {
    /// `sigma1 |grad u|^2 + sigma2 |grad v|^2 + omega (u^2 + v^2)`, integrated.
    pub quadratic: f64,
    /// `|u|^(p+1) + |v|^(p+1)`, integrated.
    pub power: f64,
    /// `lambda u^2 v^2`, integrated.
    pub coupling: f64,
    /// `I = L/2 - Mp/(p+1) - Nlam/2`.
    pub energy: f64,
    /// `F = L - Mp - 2 Nlam`.
    pub nehari: f64,
}

/// Scalar summary of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NlsSolveSummary {
    /// 1 if the gradient and manifold tolerances were both met, else 0.
    pub converged: i32,
    pub iterations: usize,
    pub i0_estimate: f64,
    pub grad_norm: f64,
    pub nehari_residual: f64,
    pub pde_residual_max: f64,
    pub seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

struct Failure(NlsStatus, String);

impl From<NlsError> for Failure {
    fn from(err: NlsError) -> Self {
        let status = match &err {
            NlsError::NumericalInput(_) => NlsStatus::NumericalInput,
            NlsError::GridMismatch(_) => NlsStatus::GridMismatch,
            NlsError::Domain(_) => NlsStatus::Domain,
            NlsError::Config { .. } => NlsStatus::Config,
            NlsError::Integrator { .. } => NlsStatus::Integrator,
            NlsError::FieldFile(_) | NlsError::Io(_) | NlsError::Json(_) => NlsStatus::Io,
        };
        Failure(status, err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(NlsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> NlsStatus {
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            NlsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {message}"));
            NlsStatus::Panic
        }
    }
}

unsafe fn config_ref<'a>(config: *const NlsConfig) -> Result<&'a NlsConfig, Failure> {
    config.as_ref().ok_or_else(|| null("config"))
}

unsafe fn solution_ref<'a>(solution: *const NlsSolution) -> Result<&'a NlsSolution, Failure> {
    solution.as_ref().ok_or_else(|| null("solution"))
}

/// Reads `len` values from each buffer into a state on the config's grid.
unsafe fn read_state(cfg: &RunConfig, u: *const f64, v: *const f64, len: usize) -> Result<StatePair, Failure> {
    if u.is_null() || v.is_null() {
        return Err(null("field buffer"));
    }
    check_len(cfg, len)?;
    let grid = cfg.grid;
    let u = Field::from_values(grid, slice::from_raw_parts(u, len).to_vec())?;
    let v = Field::from_values(grid, slice::from_raw_parts(v, len).to_vec())?;
    Ok(StatePair::new(u, v)?)
}

fn check_len(cfg: &RunConfig, len: usize) -> Result<(), Failure> {
    let expected = cfg.grid.node_count();
    if len == expected {
        Ok(())
    } else {
        Err(Failure(
            NlsStatus::BufferLength,
            format!("buffer holds {len} values, grid has {expected} nodes"),
        ))
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_into(dst: *mut f64, src: &[f64]) {
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a config in `section.key = value` form.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nls_config_parse(text: *const c_char, out: *mut *mut NlsConfig) -> NlsStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| Failure(NlsStatus::InvalidUtf8, format!("config text: {e}")))?;
        let inner = parse_config(text)?;
        write_out(out, Box::into_raw(Box::new(NlsConfig { inner })))
    })
}

/// The built-in symmetric cubic benchmark config.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nls_config_default(out: *mut *mut NlsConfig) -> NlsStatus {
    guard(|| {
        let inner = parse_config(DEFAULT_CONFIG)?;
        write_out(out, Box::into_raw(Box::new(NlsConfig { inner })))
    })
}

/// # Safety
/// `config` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nls_config_free(config: *mut NlsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Overrides `solver.rng_seed`.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn nls_config_set_seed(config: *mut NlsConfig, seed: u64) -> NlsStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        cfg.inner.solver.solve.rng_seed = seed;
        Ok(())
    })
}

/// Number of grid nodes, i.e. the length of every field buffer. Returns 0
/// for a null handle.
///
/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nls_config_node_count(config: *const NlsConfig) -> usize {
    config.as_ref().map_or(0, |c| c.inner.grid.node_count())
}

/// Minimizes the energy over the Nehari manifold for the configured problem.
/// A run that stops before the tolerances are met still succeeds; check
/// `converged` in the summary.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nls_solve(config: *const NlsConfig, out: *mut *mut NlsSolution) -> NlsStatus {
    guard(|| {
        let cfg = &config_ref(config)?.inner;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let solve_cfg = app::solve_config(cfg)?;
        let (state, report) = minimize::solve_ground_state(&cfg.grid, &cfg.params, &solve_cfg)?;
        let solution = NlsSolution { state, report, params: cfg.params };
        write_out(out, Box::into_raw(Box::new(solution)))
    })
}

/// # Safety
/// `solution` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nls_solution_free(solution: *mut NlsSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Node count of the solution grid; 0 for a null handle.
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nls_solution_len(solution: *const NlsSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.state.grid().node_count())
}

/// Copies the `u` and `v` fields into caller buffers of `len` values each.
///
/// # Safety
/// `solution` must be a live handle; `u` and `v` must each have room for
/// `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nls_solution_copy_fields(
    solution: *const NlsSolution,
    u: *mut f64,
    v: *mut f64,
    len: usize,
) -> NlsStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        if u.is_null() || v.is_null() {
            return Err(null("field buffer"));
        }
        let expected = s.state.grid().node_count();
        if len != expected {
            return Err(Failure(
                NlsStatus::BufferLength,
                format!("buffer holds {len} values, solution has {expected} nodes"),
            ));
        }
        copy_into(u, s.state.u().values());
        copy_into(v, s.state.v().values());
        Ok(())
    })
}

/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nls_solution_summary(solution: *const NlsSolution, out: *mut NlsSolveSummary) -> NlsStatus {
    guard(|| {
        let r = &solution_ref(solution)?.report;
        write_out(
            out,
            NlsSolveSummary {
                converged: r.converged as i32,
                iterations: r.iterations,
                i0_estimate: r.i0_estimate,
                grad_norm: r.grad_norm,
                nehari_residual: r.nehari_residual,
                pde_residual_max: r.pde_residual_max,
                seed: r.seed,
            },
        )
    })
}

/// The solve report as a JSON object, the same shape as the `solve` entry
/// of `report.json`. Release the string with [`nls_string_free`].
///
/// # Safety
/// `solution` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nls_solution_report_json(solution: *const NlsSolution, out: *mut *mut c_char) -> NlsStatus {
    guard(|| {
        let s = solution_ref(solution)?;
        let text = app::solve_report_value(&s.report, &s.state, &s.params)?.to_string();
        let text = CString::new(text).map_err(|e| Failure(NlsStatus::Io, e.to_string()))?;
        write_out(out, text.into_raw())
    })
}

/// # Safety
/// `text` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nls_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}

/// Evaluates the functionals at a state on the config's grid.
///
/// # Safety
/// `config` must be a live handle; `u` and `v` must hold `len` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nls_breakdown(
    config: *const NlsConfig,
    u: *const f64,
    v: *const f64,
    len: usize,
    out: *mut NlsBreakdown,
) -> NlsStatus {
    guard(|| {
        let cfg = &config_ref(config)?.inner;
        let s = read_state(cfg, u, v, len)?;
        let b = energy::breakdown(&s, &cfg.params)?;
        write_out(
            out,
            NlsBreakdown {
                quadratic: b.quadratic,
                power: b.power,
                coupling: b.coupling,
                energy: b.energy,
                nehari: b.nehari,
            },
        )
    })
}

/// Scales the state in place onto the Nehari manifold and stores the scale
/// factor in `t0_out` (may be null).
///
/// # Safety
/// `config` must be a live handle; `u` and `v` must hold `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn nls_project(
    config: *const NlsConfig,
    u: *mut f64,
    v: *mut f64,
    len: usize,
    t0_out: *mut f64,
) -> NlsStatus {
    guard(|| {
        let cfg = &config_ref(config)?.inner;
        let s = read_state(cfg, u, v, len)?;
        let proj = nehari::project(&s, &cfg.params, cfg.solver.solve.projection_tol)?;
        copy_into(u, proj.state.u().values());
        copy_into(v, proj.state.v().values());
        if !t0_out.is_null() {
            t0_out.write(proj.t0);
        }
        Ok(())
    })
}

/// Strong-form gradient of the energy at a state, written into `gu`, `gv`.
///
/// # Safety
/// `config` must be a live handle; all four buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nls_gradient(
    config: *const NlsConfig,
    u: *const f64,
    v: *const f64,
    len: usize,
    gu: *mut f64,
    gv: *mut f64,
) -> NlsStatus {
    guard(|| {
        let cfg = &config_ref(config)?.inner;
        let s = read_state(cfg, u, v, len)?;
        if gu.is_null() || gv.is_null() {
            return Err(null("gradient buffer"));
        }
        let g = energy::grad_i(&s, &cfg.params)?;
        copy_into(gu, g.u().values());
        copy_into(gv, g.v().values());
        Ok(())
    })
}
