//! C ABI for varreg.
//!
//! Objects are opaque handles created by `vr_*_new`-style constructors and
//! released with the matching `vr_*_free`. Every fallible call returns a
//! [`VrStatus`]; on failure [`vr_last_error_message`] describes the error.
//! Buffers are caller-owned and passed with their lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use varreg::linear::{adjoint_consistency_check, operator_norm_estimate, POWER_ITERATIONS};
use varreg::operators::{identity, make_convolution, make_dense, make_radon, RadonGeometry};
use varreg::regularizers::DiscreteGradient;
use varreg::solvers::{solve_variational, RegularizedSolution, SolverConfig};
use varreg::{DataVector, Error, LinearForwardMap, Regularizer, SolutionVector, Subgradient};

pub struct VrOperator(LinearForwardMap);
pub struct VrRegularizer(Regularizer);
pub struct VrSolution(RegularizedSolution);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VrStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    InvalidParameter = 3,
    NonFinite = 4,
    NotConverged = 5,
    NotASubgradient = 6,
    Unsupported = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VrRegularizerKind {
    Quadratic = 0,
    L1 = 1,
    TvAniso = 2,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VrStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => VrStatus::DimensionMismatch,
        Error::InvalidParameter { .. } | Error::Empty(_) | Error::Config { .. } => VrStatus::InvalidParameter,
        Error::NonFinite { .. } => VrStatus::NonFinite,
        Error::NotConverged { .. } | Error::Iteration { .. } => VrStatus::NotConverged,
        Error::NotASubgradient { .. } | Error::NegativeBregman { .. } => VrStatus::NotASubgradient,
        Error::Unsupported(_) => VrStatus::Unsupported,
        Error::Io(_) => VrStatus::Other,
    }
}

struct Fail(VrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VrStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            VrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(VrStatus::NullPointer, format!("null pointer: {what}"))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn expect_len(expected: usize, found: usize) -> Result<(), Fail> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found }.into());
    }
    Ok(())
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    out.write(Box::into_raw(Box::new(value)));
    Ok(())
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(p))));
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_identity(n: usize, out: *mut *mut VrOperator) -> VrStatus {
    guard(|| {
        if n == 0 {
            return Err(Error::Empty("identity dimension").into());
        }
        emit(out, VrOperator(identity(n)))
    })
}

/// Row-major `rows x cols` matrix.
///
/// # Safety
/// `data` must hold `rows * cols` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_dense(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut VrOperator,
) -> VrStatus {
    guard(|| {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(VrStatus::InvalidParameter, "size overflow".into()))?;
        let d = slice(data, n, "data")?;
        let m: Vec<Vec<f64>> = if cols == 0 {
            Vec::new()
        } else {
            d.chunks(cols).map(<[f64]>::to_vec).collect()
        };
        emit(out, VrOperator(make_dense(&m)?))
    })
}

/// Periodic convolution of length `n` with a centred kernel.
///
/// # Safety
/// `kernel` must hold `kernel_len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_convolution(
    kernel: *const f64,
    kernel_len: usize,
    n: usize,
    out: *mut *mut VrOperator,
) -> VrStatus {
    guard(|| {
        let k = slice(kernel, kernel_len, "kernel")?;
        emit(out, VrOperator(make_convolution(k, n)?))
    })
}

/// Parallel-beam Radon transform on a `grid_n x grid_n` image.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_radon(
    grid_n: usize,
    n_angles: usize,
    n_offsets: usize,
    out: *mut *mut VrOperator,
) -> VrStatus {
    guard(|| {
        let g = RadonGeometry::uniform(grid_n, n_angles, n_offsets)?;
        emit(out, VrOperator(make_radon(&g)))
    })
}

/// # Safety
/// `op` must come from a `vr_operator_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_free(op: *mut VrOperator) {
    release(op);
}

/// # Safety
/// `op` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_dims(op: *const VrOperator, in_dim: *mut usize, out_dim: *mut usize) -> VrStatus {
    guard(|| {
        let f = &handle(op, "op")?.0;
        write(in_dim, f.in_dim(), "in_dim")?;
        write(out_dim, f.out_dim(), "out_dim")
    })
}

/// `out = F u`
///
/// # Safety
/// Buffers must hold the given lengths.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_apply(
    op: *const VrOperator,
    u: *const f64,
    u_len: usize,
    out: *mut f64,
    out_len: usize,
) -> VrStatus {
    guard(|| {
        let f = &handle(op, "op")?.0;
        expect_len(f.in_dim(), u_len)?;
        expect_len(f.out_dim(), out_len)?;
        let u = SolutionVector::new(slice(u, u_len, "u")?.to_vec())?;
        slice_mut(out, out_len, "out")?.copy_from_slice(&f.try_apply(&u)?);
        Ok(())
    })
}

/// `out = F* v`
///
/// # Safety
/// Buffers must hold the given lengths.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_adjoint(
    op: *const VrOperator,
    v: *const f64,
    v_len: usize,
    out: *mut f64,
    out_len: usize,
) -> VrStatus {
    guard(|| {
        let f = &handle(op, "op")?.0;
        expect_len(f.out_dim(), v_len)?;
        expect_len(f.in_dim(), out_len)?;
        let v = DataVector::new(slice(v, v_len, "v")?.to_vec())?;
        slice_mut(out, out_len, "out")?.copy_from_slice(&f.try_adjoint(&v)?);
        Ok(())
    })
}

/// Power-iteration estimate of the operator norm.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_operator_norm_estimate(op: *const VrOperator, seed: u64, out: *mut f64) -> VrStatus {
    guard(|| {
        let f = &handle(op, "op")?.0;
        write(out, operator_norm_estimate(f, POWER_ITERATIONS, seed)?, "out")
    })
}

/// Largest relative defect of `<Fu, v> = <u, F*v>` over seeded trials.
///
/// # Safety
/// `op` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_adjoint_defect(op: *const VrOperator, trials: usize, seed: u64, out: *mut f64) -> VrStatus {
    guard(|| {
        let f = &handle(op, "op")?.0;
        write(out, adjoint_consistency_check(f, trials, seed)?, "out")
    })
}

/// Anisotropic TV uses a `rows x cols` pixel grid; the other kinds ignore
/// the grid.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_regularizer_new(
    kind: VrRegularizerKind,
    rows: usize,
    cols: usize,
    out: *mut *mut VrRegularizer,
) -> VrStatus {
    guard(|| {
        let j = match kind {
            VrRegularizerKind::Quadratic => Regularizer::Quadratic,
            VrRegularizerKind::L1 => Regularizer::L1,
            VrRegularizerKind::TvAniso => Regularizer::TvAniso(DiscreteGradient::new(rows, cols)?),
        };
        emit(out, VrRegularizer(j))
    })
}

/// # Safety
/// `reg` must come from [`vr_regularizer_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn vr_regularizer_free(reg: *mut VrRegularizer) {
    release(reg);
}

/// `J(u)`
///
/// # Safety
/// `u` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_regularizer_value(
    reg: *const VrRegularizer,
    u: *const f64,
    n: usize,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let j = &handle(reg, "reg")?.0;
        if let Regularizer::TvAniso(d) = j {
            expect_len(d.n_pixels(), n)?;
        }
        let u = SolutionVector::new(slice(u, n, "u")?.to_vec())?;
        write(out, j.value(&u), "out")
    })
}

/// `out = argmin_w |w - x|^2 / 2 + tau J(w)`; unsupported for TV.
///
/// # Safety
/// `x` and `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn vr_regularizer_prox(
    reg: *const VrRegularizer,
    tau: f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let j = &handle(reg, "reg")?.0;
        let x = SolutionVector::new(slice(x, n, "x")?.to_vec())?;
        let w = j.prox(tau, &x)?;
        slice_mut(out, n, "out")?.copy_from_slice(&w);
        Ok(())
    })
}

/// `J(u~) - J(u) - <p, u~ - u>` after checking `p` in `dJ(u)` to `tol`.
///
/// # Safety
/// `u_tilde`, `u` and `p` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_bregman_distance(
    reg: *const VrRegularizer,
    u_tilde: *const f64,
    u: *const f64,
    p: *const f64,
    n: usize,
    tol: f64,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let j = &handle(reg, "reg")?.0;
        let ut = SolutionVector::new(slice(u_tilde, n, "u_tilde")?.to_vec())?;
        let at = SolutionVector::new(slice(u, n, "u")?.to_vec())?;
        let p = SolutionVector::new(slice(p, n, "p")?.to_vec())?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Fail(VrStatus::InvalidParameter, "tol must be positive".into()));
        }
        let s = Subgradient::new(p, at).with_tol(tol);
        write(out, j.bregman_distance(&ut, &s)?, "out")
    })
}

/// Minimizes `|Fu - v|^2 / 2 + alpha J(u)`. `tol <= 0` and `max_iters == 0`
/// select the defaults.
///
/// # Safety
/// Handles must be live, `v` must hold `v_len` values and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn vr_solve(
    op: *const VrOperator,
    reg: *const VrRegularizer,
    v: *const f64,
    v_len: usize,
    alpha: f64,
    tol: f64,
    max_iters: usize,
    out: *mut *mut VrSolution,
) -> VrStatus {
    guard(|| {
        let f = &handle(op, "op")?.0;
        let j = &handle(reg, "reg")?.0;
        expect_len(f.out_dim(), v_len)?;
        let v = DataVector::new(slice(v, v_len, "v")?.to_vec())?;
        let mut cfg = SolverConfig::default();
        if tol > 0.0 {
            cfg.tol = tol;
        }
        if max_iters > 0 {
            cfg.max_iters = max_iters;
        }
        emit(out, VrSolution(solve_variational(f, &v, alpha, j, &cfg)?))
    })
}

/// # Safety
/// `sol` must come from [`vr_solve`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_free(sol: *mut VrSolution) {
    release(sol);
}

/// Length of `u_alpha`, 0 for a null handle.
///
/// # Safety
/// `sol` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_dim(sol: *const VrSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.u_alpha.dim())
}

/// # Safety
/// `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_u(sol: *const VrSolution, out: *mut f64, n: usize) -> VrStatus {
    guard(|| {
        let s = &handle(sol, "sol")?.0;
        expect_len(s.u_alpha.dim(), n)?;
        slice_mut(out, n, "out")?.copy_from_slice(&s.u_alpha);
        Ok(())
    })
}

/// Subgradient `p_alpha` certified at `u_alpha`.
///
/// # Safety
/// `out` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_p(sol: *const VrSolution, out: *mut f64, n: usize) -> VrStatus {
    guard(|| {
        let s = &handle(sol, "sol")?.0;
        expect_len(s.p_alpha.p.dim(), n)?;
        slice_mut(out, n, "out")?.copy_from_slice(&s.p_alpha.p);
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_objective(sol: *const VrSolution, out: *mut f64) -> VrStatus {
    guard(|| write(out, handle(sol, "sol")?.0.objective(), "out"))
}

/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_defect(sol: *const VrSolution, out: *mut f64) -> VrStatus {
    guard(|| write(out, handle(sol, "sol")?.0.optimality_defect, "out"))
}

/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_solution_iterations(sol: *const VrSolution, out: *mut usize) -> VrStatus {
    guard(|| write(out, handle(sol, "sol")?.0.iterations, "out"))
}
