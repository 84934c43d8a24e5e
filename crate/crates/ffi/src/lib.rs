//! C ABI for blcirk.
//!
//! Objects are opaque handles created by `*_build`/`*_load` and released with
//! the matching `*_free`. Every fallible call returns a [`BlcirkStatus`];
//! the message for the last failure on the calling thread is available from
//! [`blcirk_last_error`]. Arrays are caller-allocated: pass a buffer and its
//! length, query sizes first with the `*_m` getters.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, c_void, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use blcirk::gravity::GravityModel;
use blcirk::quadrature::{build_quadrature, QuadratureRule};
use blcirk::solver::{propagate, FnSystem, Schedule, SolveOptions, StageMatrix};
use blcirk::stability::stability_function;
use blcirk::tableau::{build_tableau, Method, Tableau};
use blcirk::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlcirkStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    BufferTooSmall = 3,
    Io = 4,
    Parse = 5,
    Certificate = 6,
    NoConvergence = 7,
    Numeric = 8,
    Callback = 9,
    Panic = 10,
}

/// Tableau construction routes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlcirkMethod {
    Collocation = 0,
    ExactPswf = 1,
    ApproxPswf = 2,
    GaussLegendre = 3,
}

impl From<BlcirkMethod> for Method {
    fn from(m: BlcirkMethod) -> Self {
        match m {
            BlcirkMethod::Collocation => Method::CollocationSplit,
            BlcirkMethod::ExactPswf => Method::ExactPswf,
            BlcirkMethod::ApproxPswf => Method::ApproxPswf,
            BlcirkMethod::GaussLegendre => Method::GaussLegendre,
        }
    }
}

/// Opaque quadrature rule on [-1,1].
pub struct BlcirkQuadrature(QuadratureRule);

/// Opaque tableau (nodes, weights, integration matrix).
pub struct BlcirkTableau(Tableau);

/// Opaque spherical-harmonic gravity model.
pub struct BlcirkGravity(GravityModel);

/// Right-hand side g(t, y) written to `out`; nonzero return aborts the run.
pub type BlcirkRhs = Option<extern "C" fn(t: f64, y: *const f64, out: *mut f64, dim: usize, user: *mut c_void) -> c_int>;

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> BlcirkStatus {
    match e {
        Error::InvalidInput(_) => BlcirkStatus::InvalidArgument,
        Error::Io(_) => BlcirkStatus::Io,
        Error::Parse { .. } | Error::Json(_) => BlcirkStatus::Parse,
        Error::Certificate(_) => BlcirkStatus::Certificate,
        Error::NoConvergence(_) | Error::Diverged { .. } => BlcirkStatus::NoConvergence,
        Error::Interval { source, .. } => status_of(source),
        _ => BlcirkStatus::Numeric,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (BlcirkStatus, String)>) -> BlcirkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BlcirkStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            BlcirkStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (BlcirkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BlcirkStatus, String) {
    (BlcirkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out_slice<'a>(buf: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], (BlcirkStatus, String)> {
    if buf.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err((BlcirkStatus::BufferTooSmall, format!("buffer holds {len}, need {need}")));
    }
    Ok(std::slice::from_raw_parts_mut(buf, need))
}

unsafe fn write_handle<T>(out: *mut *mut T, v: T) {
    *out = Box::into_raw(Box::new(v));
}

/// Copies the last error message (NUL-terminated, truncated to `len`) and
/// returns the full message length in bytes excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn blcirk_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Quadrature for exponentials of bandlimit `c` on [-1,1] to accuracy `eps`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn blcirk_quadrature_build(c: f64, eps: f64, out: *mut *mut BlcirkQuadrature) -> BlcirkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let rule = build_quadrature(c, eps).map_err(lib_err)?;
        write_handle(out, BlcirkQuadrature(rule));
        Ok(())
    })
}

/// Node count of a rule (0 for null).
///
/// # Safety
/// `q` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blcirk_quadrature_m(q: *const BlcirkQuadrature) -> usize {
    q.as_ref().map_or(0, |q| q.0.m())
}

/// # Safety
/// `q` must be a live handle; `nodes`/`weights` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn blcirk_quadrature_copy(
    q: *const BlcirkQuadrature,
    nodes: *mut f64,
    weights: *mut f64,
    len: usize,
) -> BlcirkStatus {
    guard(|| {
        let q = q.as_ref().ok_or_else(|| null("quadrature"))?;
        let m = q.0.m();
        out_slice(nodes, len, m)?.copy_from_slice(&q.0.nodes_f64());
        out_slice(weights, len, m)?.copy_from_slice(&q.0.weights_f64());
        Ok(())
    })
}

/// # Safety
/// `q` must be null or a handle from [`blcirk_quadrature_build`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blcirk_quadrature_free(q: *mut BlcirkQuadrature) {
    if !q.is_null() {
        drop(Box::from_raw(q));
    }
}

/// Certified tableau on [0,1]. `m == 0` picks the smallest node count that
/// reaches `eps`; Gauss–Legendre needs an explicit `m`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn blcirk_tableau_build(
    c: f64,
    eps: f64,
    m: usize,
    method: BlcirkMethod,
    out: *mut *mut BlcirkTableau,
) -> BlcirkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let m = (m > 0).then_some(m);
        let t = build_tableau(c, eps, m, method.into()).and_then(|t| t.rescale_to_unit()).map_err(lib_err)?;
        write_handle(out, BlcirkTableau(t));
        Ok(())
    })
}

/// Reads a tableau JSON file (either interval; stored on [0,1]).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn blcirk_tableau_load(path: *const c_char, out: *mut *mut BlcirkTableau) -> BlcirkStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null("path or out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| (BlcirkStatus::InvalidArgument, e.to_string()))?;
        let text = std::fs::read_to_string(path).map_err(|e| lib_err(e.into()))?;
        let json = serde_json::from_str(&text).map_err(|e| lib_err(e.into()))?;
        let t = Tableau::from_json(&json).and_then(|t| t.rescale_to_unit()).map_err(lib_err)?;
        write_handle(out, BlcirkTableau(t));
        Ok(())
    })
}

/// Stage count (0 for null).
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blcirk_tableau_m(t: *const BlcirkTableau) -> usize {
    t.as_ref().map_or(0, |t| t.0.m())
}

/// Copies nodes and weights (length M each) and S (M×M, row-major).
/// Any output pointer may be null to skip it.
///
/// # Safety
/// `t` must be a live handle; non-null outputs must hold the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn blcirk_tableau_copy(
    t: *const BlcirkTableau,
    nodes: *mut f64,
    weights: *mut f64,
    s: *mut f64,
    s_len: usize,
) -> BlcirkStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tableau"))?;
        let m = t.0.m();
        if !nodes.is_null() {
            out_slice(nodes, m, m)?.copy_from_slice(&t.0.nodes_f64());
        }
        if !weights.is_null() {
            out_slice(weights, m, m)?.copy_from_slice(&t.0.weights_f64());
        }
        if !s.is_null() {
            out_slice(s, s_len, m * m)?.copy_from_slice(&t.0.s_f64().data);
        }
        Ok(())
    })
}

/// r(z) = 1 + z wᵀ(I − zS)⁻¹1 at z = re + i·im.
///
/// # Safety
/// `t` must be a live handle; `out_re`/`out_im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn blcirk_tableau_stability(
    t: *const BlcirkTableau,
    re: f64,
    im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> BlcirkStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("tableau"))?;
        if out_re.is_null() || out_im.is_null() {
            return Err(null("output"));
        }
        let r = stability_function(&t.0, num_complex::Complex::new(re, im)).map_err(lib_err)?;
        *out_re = r.re;
        *out_im = r.im;
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blcirk_tableau_free(t: *mut BlcirkTableau) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Integrates y' = g(t, y) from t0 to t1 over `n_intervals` steps, iterating
/// each interval until the sweep change is below `tol` (at most `max_sweeps`).
/// Writes the final state to `y_out`.
///
/// # Safety
/// `t` must be a live handle; `y0` and `y_out` must hold `dim` doubles;
/// `rhs` must be safe to call with `user`.
#[no_mangle]
pub unsafe extern "C" fn blcirk_propagate(
    t: *const BlcirkTableau,
    rhs: BlcirkRhs,
    user: *mut c_void,
    dim: usize,
    y0: *const f64,
    t0: f64,
    t1: f64,
    n_intervals: usize,
    tol: f64,
    max_sweeps: usize,
    y_out: *mut f64,
) -> BlcirkStatus {
    guard(|| {
        let tab = t.as_ref().ok_or_else(|| null("tableau"))?;
        let rhs = rhs.ok_or_else(|| null("rhs"))?;
        if y0.is_null() {
            return Err(null("y0"));
        }
        if dim == 0 || max_sweeps == 0 {
            return Err((BlcirkStatus::InvalidArgument, "dim and max_sweeps must be positive".into()));
        }
        let y0 = std::slice::from_raw_parts(y0, dim);
        let out = out_slice(y_out, dim, dim)?;
        let failed = std::cell::Cell::new(0);
        let sys = FnSystem::new(dim, |tt: f64, y: &[f64], g: &mut [f64]| {
            if failed.get() != 0 {
                g.fill(f64::NAN);
                return;
            }
            let rc = rhs(tt, y.as_ptr(), g.as_mut_ptr(), dim, user);
            if rc != 0 {
                failed.set(rc);
                g.fill(f64::NAN);
            }
        });
        let stages = StageMatrix::from_tableau(&tab.0).map_err(lib_err)?;
        let opts = SolveOptions { tol, ..SolveOptions::default() }.with_schedule(Schedule::full(max_sweeps));
        let result = propagate(&sys, &stages, y0, t0, t1, n_intervals, &opts);
        if failed.get() != 0 {
            return Err((BlcirkStatus::Callback, format!("right-hand side returned {}", failed.get())));
        }
        let traj = result.map_err(lib_err)?;
        out.copy_from_slice(traj.final_state());
        Ok(())
    })
}

/// Loads a coefficient file (header "mu R N_max", then "n m C S" lines).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn blcirk_gravity_load(path: *const c_char, out: *mut *mut BlcirkGravity) -> BlcirkStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return Err(null("path or out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|e| (BlcirkStatus::InvalidArgument, e.to_string()))?;
        let g = GravityModel::load_file(path).map_err(lib_err)?;
        write_handle(out, BlcirkGravity(g));
        Ok(())
    })
}

/// Maximum degree of a model (0 for null).
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn blcirk_gravity_degree(g: *const BlcirkGravity) -> usize {
    g.as_ref().map_or(0, |g| g.0.n_max)
}

/// Potential (km²/s²) at `r` (3 doubles, km) truncated at degree `n`.
///
/// # Safety
/// `g` must be a live handle; `r` must hold 3 doubles; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn blcirk_gravity_potential(g: *const BlcirkGravity, r: *const f64, n: usize, out: *mut f64) -> BlcirkStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("gravity"))?;
        if r.is_null() || out.is_null() {
            return Err(null("r or out"));
        }
        let r = [*r, *r.add(1), *r.add(2)];
        *out = g.0.potential(r, n).map_err(lib_err)?;
        Ok(())
    })
}

/// Acceleration (km/s²) at `r` truncated at degree `n`, written to `out[3]`.
///
/// # Safety
/// `g` must be a live handle; `r` and `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn blcirk_gravity_acceleration(g: *const BlcirkGravity, r: *const f64, n: usize, out: *mut f64) -> BlcirkStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("gravity"))?;
        if r.is_null() {
            return Err(null("r"));
        }
        let r = [*r, *r.add(1), *r.add(2)];
        let a = g.0.acceleration(r, n).map_err(lib_err)?;
        out_slice(out, 3, 3)?.copy_from_slice(&a);
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn blcirk_gravity_free(g: *mut BlcirkGravity) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}
