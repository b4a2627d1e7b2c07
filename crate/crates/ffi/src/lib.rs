//! C ABI over the jetmech engine.
//!
//! Every fallible call returns a [`JmStatus`] and writes its result through an
//! out-pointer. On failure the message is kept per thread and can be read with
//! [`jm_last_error`]. Handles are opaque and must be released with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use jetmech::hamiltonian::{self, HamiltonianSystem};
use jetmech::lagrangian::{self, LagrangianSystem};
use jetmech::symexpr::{self, Expr, Point, Sym};
use jetmech::trajectory::Trajectory;
use jetmech::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Numerical = 5,
    Panic = 6,
}

/// Symbol families; indexed families take a zero-based index.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JmSymKind {
    T = 0,
    Q = 1,
    Qt = 2,
    Qtt = 3,
    P0 = 4,
    P = 5,
    Pt = 6,
}

pub struct JmExpr(Expr);
pub struct JmLagrangian(LagrangianSystem);
pub struct JmHamiltonian(HamiltonianSystem);
pub struct JmTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(JmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Parse(_) => JmStatus::Parse,
            Error::NonFinite { .. }
            | Error::Domain { .. }
            | Error::LinearSolve { .. }
            | Error::SingularHessian { .. } => JmStatus::Numerical,
            _ => JmStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

impl From<symexpr::ParseError> for Failure {
    fn from(e: symexpr::ParseError) -> Self {
        Failure(JmStatus::Parse, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(JmStatus::NullPointer, format!("{what} is null"))
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> JmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => JmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            JmStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure(JmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn sym(kind: JmSymKind, index: usize) -> Sym {
    match kind {
        JmSymKind::T => Sym::T,
        JmSymKind::Q => Sym::Q(index),
        JmSymKind::Qt => Sym::Qt(index),
        JmSymKind::Qtt => Sym::Qtt(index),
        JmSymKind::P0 => Sym::P0,
        JmSymKind::P => Sym::P(index),
        JmSymKind::Pt => Sym::Pt(index),
    }
}

fn string_out(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from a jetmech call returning an owned string, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses `src` over coordinates of dimension `dim`.
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_expr_parse(src: *const c_char, dim: usize, out: *mut *mut JmExpr) -> JmStatus {
    guard(|| {
        let e = symexpr::parse(text(src, "source")?, dim)?;
        emit(out, JmExpr(e))
    })
}

/// Canonical text of `expr`; release with [`jm_string_free`]. NULL if `expr` is NULL.
///
/// # Safety
/// `expr` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_expr_to_string(expr: *const JmExpr) -> *mut c_char {
    expr.as_ref().map_or(ptr::null_mut(), |e| string_out(e.0.to_string()))
}

/// Partial derivative with respect to one symbol.
///
/// # Safety
/// `expr` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_expr_diff(
    expr: *const JmExpr,
    kind: JmSymKind,
    index: usize,
    out: *mut *mut JmExpr,
) -> JmStatus {
    guard(|| {
        let e = handle(expr, "expression")?;
        emit(out, JmExpr(symexpr::diff(&e.0, sym(kind, index))))
    })
}

/// Evaluates `expr` at the point assigning `values[k]` to symbol `(kinds[k], indices[k])`.
///
/// # Safety
/// `kinds`, `indices` and `values` must each hold `count` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jm_expr_evaluate(
    expr: *const JmExpr,
    kinds: *const JmSymKind,
    indices: *const usize,
    values: *const f64,
    count: usize,
    out: *mut f64,
) -> JmStatus {
    guard(|| {
        let e = handle(expr, "expression")?;
        let values = slice(values, count, "values")?;
        let mut pt = Point::new();
        if count > 0 {
            if kinds.is_null() || indices.is_null() {
                return Err(null("symbol list"));
            }
            let kinds = std::slice::from_raw_parts(kinds, count);
            let indices = std::slice::from_raw_parts(indices, count);
            for k in 0..count {
                pt.set(sym(kinds[k], indices[k]), values[k]);
            }
        }
        let v = e.0.evaluate(&pt)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = v;
        Ok(())
    })
}

/// # Safety
/// `expr` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_expr_free(expr: *mut JmExpr) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// # Safety
/// `src` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_lagrangian_parse(src: *const c_char, dim: usize, out: *mut *mut JmLagrangian) -> JmStatus {
    guard(|| {
        let sys = LagrangianSystem::parse(dim, text(src, "source")?)?;
        emit(out, JmLagrangian(sys))
    })
}

/// Configuration dimension, or 0 for NULL.
///
/// # Safety
/// `sys` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_lagrangian_dim(sys: *const JmLagrangian) -> usize {
    sys.as_ref().map_or(0, |s| s.0.dim())
}

/// Component `index` of the Lagrange operator.
///
/// # Safety
/// `sys` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_lagrangian_operator(
    sys: *const JmLagrangian,
    index: usize,
    out: *mut *mut JmExpr,
) -> JmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        let ops = lagrangian::lagrange_operator(sys);
        let e = ops.get(index).cloned().ok_or_else(|| {
            Failure(JmStatus::Validation, format!("index {index} out of range for dimension {}", sys.dim()))
        })?;
        emit(out, JmExpr(e))
    })
}

/// Integrates the Euler–Lagrange equations from `(t0, q, qt)` to `t1`.
///
/// # Safety
/// `q` and `qt` must hold `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jm_lagrangian_integrate(
    sys: *const JmLagrangian,
    t0: f64,
    q: *const f64,
    qt: *const f64,
    t1: f64,
    dt: f64,
    out: *mut *mut JmTrajectory,
) -> JmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        let n = sys.dim();
        let ic = Point::new()
            .with(Sym::T, t0)
            .with_components(Sym::Q, slice(q, n, "q")?)
            .with_components(Sym::Qt, slice(qt, n, "qt")?);
        emit(out, JmTrajectory(lagrangian::integrate_lagrange(sys, &ic, t1, dt)?))
    })
}

/// # Safety
/// `sys` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_lagrangian_free(sys: *mut JmLagrangian) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `src` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_hamiltonian_parse(
    src: *const c_char,
    dim: usize,
    out: *mut *mut JmHamiltonian,
) -> JmStatus {
    guard(|| {
        let h = HamiltonianSystem::parse(dim, text(src, "source")?)?;
        emit(out, JmHamiltonian(h))
    })
}

/// Hamiltonian associated with a hyperregular Lagrangian.
///
/// # Safety
/// `sys` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_hamiltonian_from_lagrangian(
    sys: *const JmLagrangian,
    out: *mut *mut JmHamiltonian,
) -> JmStatus {
    guard(|| {
        let h = hamiltonian::associated_hamiltonian(&handle(sys, "system")?.0)?;
        emit(out, JmHamiltonian(h))
    })
}

/// The Hamiltonian function as an expression.
///
/// # Safety
/// `h` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_hamiltonian_expr(h: *const JmHamiltonian, out: *mut *mut JmExpr) -> JmStatus {
    guard(|| {
        let h = handle(h, "system")?;
        emit(out, JmExpr(h.0.hamiltonian().clone()))
    })
}

/// Poisson bracket of two expressions.
///
/// # Safety
/// `f` and `g` must be live handles and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn jm_poisson_bracket(f: *const JmExpr, g: *const JmExpr, out: *mut *mut JmExpr) -> JmStatus {
    guard(|| {
        let b = hamiltonian::poisson_bracket(&handle(f, "f")?.0, &handle(g, "g")?.0)?;
        emit(out, JmExpr(b))
    })
}

/// Integrates Hamilton's equations from `(t0, q, p)` to `t1`.
///
/// # Safety
/// `q` and `p` must hold `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn jm_hamiltonian_integrate(
    h: *const JmHamiltonian,
    t0: f64,
    q: *const f64,
    p: *const f64,
    t1: f64,
    dt: f64,
    out: *mut *mut JmTrajectory,
) -> JmStatus {
    guard(|| {
        let h = &handle(h, "system")?.0;
        let n = h.dim();
        let ic = Point::new()
            .with(Sym::T, t0)
            .with_components(Sym::Q, slice(q, n, "q")?)
            .with_components(Sym::P, slice(p, n, "p")?);
        emit(out, JmTrajectory(hamiltonian::integrate_hamilton(h, &ic, t1, dt)?))
    })
}

/// # Safety
/// `h` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_hamiltonian_free(h: *mut JmHamiltonian) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `tr` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_trajectory_len(tr: *const JmTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.0.len())
}

/// Configuration dimension, or 0 for NULL. Each state has twice this many values.
///
/// # Safety
/// `tr` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_trajectory_dim(tr: *const JmTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.0.dim)
}

/// Copies sample `k`: its time into `time` and its `2 * dim` state values into `state`.
///
/// # Safety
/// `tr` must be a live handle, `time` writable and `state` writable for `2 * dim` values.
#[no_mangle]
pub unsafe extern "C" fn jm_trajectory_sample(
    tr: *const JmTrajectory,
    k: usize,
    time: *mut f64,
    state: *mut f64,
) -> JmStatus {
    guard(|| {
        let tr = &handle(tr, "trajectory")?.0;
        if k >= tr.len() {
            return Err(Failure(JmStatus::Validation, format!("sample {k} out of range ({} samples)", tr.len())));
        }
        if time.is_null() || state.is_null() {
            return Err(null("output pointer"));
        }
        *time = tr.times[k];
        let row = &tr.states[k];
        ptr::copy_nonoverlapping(row.as_ptr(), state, row.len());
        Ok(())
    })
}

/// Trajectory as CSV text; release with [`jm_string_free`]. NULL if `tr` is NULL.
///
/// # Safety
/// `tr` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_trajectory_to_csv(tr: *const JmTrajectory) -> *mut c_char {
    tr.as_ref().map_or(ptr::null_mut(), |t| string_out(t.0.to_csv()))
}

/// # Safety
/// `tr` must come from this library, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn jm_trajectory_free(tr: *mut JmTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}
