//! C ABI over `densepoly`.
//!
//! Every fallible call returns a [`DpStatus`] and writes results through out
//! pointers. On failure the message is available from [`dp_last_error`] on
//! the same thread. Handles are opaque and owned by the caller, who releases
//! them with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use densepoly::approx::{pipeline_approximate, PipelineLimits};
use densepoly::flt::{growth_norm, DiscreteFunctional, Rect, Term, Verdict};
use densepoly::kernel::taylor_u;
use densepoly::seqspace::{km_sum, SeqWeightFamily};
use densepoly::smoothfn::seminorm_q;
use densepoly::{Error, Fleet, FleetFunction, GridSpec, MultiPoly, SharedFn, WeightFamily};
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Order = 3,
    Truncation = 4,
    Certificate = 5,
    Divergence = 6,
    Budget = 7,
    Numeric = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpFleet {
    Gaussian = 0,
    Cosh = 1,
    SinGaussian = 2,
    Bump = 3,
    Sin = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpVerdict {
    Interior = 0,
    Boundary = 1,
    Divergent = 2,
}

pub struct DpWeight(WeightFamily);
pub struct DpFunction(SharedFn);
pub struct DpPoly(MultiPoly);
pub struct DpFunctional(DiscreteFunctional);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DpStatus {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::Range { .. } => DpStatus::InvalidInput,
        Error::Order { .. } => DpStatus::Order,
        Error::Truncation { .. } => DpStatus::Truncation,
        Error::Certificate(_) => DpStatus::Certificate,
        Error::Divergence(_) => DpStatus::Divergence,
        Error::Budget(_) => DpStatus::Budget,
        Error::Overflow { .. } | Error::Resolution { .. } | Error::Io(_) => DpStatus::Numeric,
    }
}

/// Runs `f`, mapping errors and panics to a status.
fn guard(f: impl FnOnce() -> Result<(), DpStatus>) -> DpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DpStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, DpStatus>;
}

impl<T> OrStatus<T> for densepoly::Result<T> {
    fn or_status(self) -> Result<T, DpStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, DpStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{what} is null"));
        DpStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, DpStatus> {
    p.as_mut().ok_or_else(|| {
        set_error(format!("{what} is null"));
        DpStatus::NullPointer
    })
}

unsafe fn array<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], DpStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(DpStatus::NullPointer);
    }
    Ok(slice::from_raw_parts(p, len))
}

fn weight_index(m: usize) -> Result<(), DpStatus> {
    if m == 0 {
        set_error("weight index starts at 1".into());
        return Err(DpStatus::InvalidInput);
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

// Weights

/// `φ_m(x) = (1 + 1/m)·‖x‖^a`, `a > 1`.
///
/// # Safety
/// `out_w` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_weight_power(
    a: f64,
    dim: usize,
    out_w: *mut *mut DpWeight,
) -> DpStatus {
    guard(|| {
        let o = out(out_w, "out")?;
        *o = boxed(DpWeight(WeightFamily::power(a, dim).or_status()?));
        Ok(())
    })
}

/// # Safety
/// `out_w` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_weight_log_penalty(
    coeff: f64,
    exponent: f64,
    dim: usize,
    out_w: *mut *mut DpWeight,
) -> DpStatus {
    guard(|| {
        let o = out(out_w, "out")?;
        *o = boxed(DpWeight(
            WeightFamily::log_penalty(coeff, exponent, dim).or_status()?,
        ));
        Ok(())
    })
}

/// `φ_m(x)` with `x` of length `dim`.
///
/// # Safety
/// `w` must come from this library; `x` must point to `dim` values.
#[no_mangle]
pub unsafe extern "C" fn dp_weight_eval(
    w: *const DpWeight,
    m: usize,
    x: *const f64,
    dim: usize,
    value: *mut f64,
) -> DpStatus {
    guard(|| {
        let w = &get(w, "weight")?.0;
        let x = array(x, dim, "x")?;
        weight_index(m)?;
        if dim != w.dim() {
            set_error(format!(
                "point has {dim} coordinates, weight expects {}",
                w.dim()
            ));
            return Err(DpStatus::InvalidInput);
        }
        *out(value, "value")? = w.eval(m, x);
        Ok(())
    })
}

/// # Safety
/// `w` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dp_weight_free(w: *mut DpWeight) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

// Functions

/// # Safety
/// `out_f` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_function_fleet(
    kind: DpFleet,
    dim: usize,
    out_f: *mut *mut DpFunction,
) -> DpStatus {
    guard(|| {
        let o = out(out_f, "out")?;
        if dim == 0 {
            set_error("dimension must be positive".into());
            return Err(DpStatus::InvalidInput);
        }
        let k = match kind {
            DpFleet::Gaussian => Fleet::Gaussian,
            DpFleet::Cosh => Fleet::Cosh,
            DpFleet::SinGaussian => Fleet::SinGaussian,
            DpFleet::Bump => Fleet::Bump,
            DpFleet::Sin => Fleet::Sin,
        };
        *o = boxed(DpFunction(Arc::new(FleetFunction::new(k, dim))));
        Ok(())
    })
}

/// `D^α f(x)`; `alpha` and `x` both have length `dim`.
///
/// # Safety
/// Pointers must be valid for `dim` elements.
#[no_mangle]
pub unsafe extern "C" fn dp_function_deriv(
    f: *const DpFunction,
    alpha: *const usize,
    x: *const f64,
    dim: usize,
    value: *mut f64,
) -> DpStatus {
    guard(|| {
        let f = &get(f, "function")?.0;
        let (alpha, x) = (array(alpha, dim, "alpha")?, array(x, dim, "x")?);
        if dim != f.dim() {
            set_error(format!("function has dimension {}, got {dim}", f.dim()));
            return Err(DpStatus::InvalidInput);
        }
        let order: usize = alpha.iter().sum();
        if order > f.max_order() {
            set_error(format!("order {order} exceeds {}", f.max_order()));
            return Err(DpStatus::Order);
        }
        *out(value, "value")? = f.deriv(alpha, x);
        Ok(())
    })
}

/// Grid value of `q_m(f)` on `[−radius, radius]^n`.
///
/// # Safety
/// Handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn dp_seminorm(
    f: *const DpFunction,
    w: *const DpWeight,
    m: usize,
    radius: f64,
    points_per_axis: usize,
    value: *mut f64,
) -> DpStatus {
    guard(|| {
        let f = &get(f, "function")?.0;
        let w = &get(w, "weight")?.0;
        weight_index(m)?;
        let grid = GridSpec::new(radius, f.dim(), points_per_axis).or_status()?;
        *out(value, "value")? = seminorm_q(f.as_ref(), m, m, w, &grid).or_status()?.value;
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dp_function_free(f: *mut DpFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

// Polynomials

/// Full approximation pipeline for `f` to accuracy `eps` in `q_m`.
/// Writes the polynomial and the re-measured error.
///
/// # Safety
/// Handles must come from this library; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn dp_pipeline(
    f: *const DpFunction,
    w: *const DpWeight,
    m: usize,
    eps: f64,
    nu_max: usize,
    lambda_max: f64,
    n_max: usize,
    points_per_axis: usize,
    out_p: *mut *mut DpPoly,
    error: *mut f64,
) -> DpStatus {
    guard(|| {
        let f = get(f, "function")?.0.clone();
        let w = &get(w, "weight")?.0;
        let (o, e) = (out(out_p, "out")?, out(error, "error")?);
        let limits = PipelineLimits {
            nu_max,
            lambda_max,
            n_max,
            points_per_axis,
            ..PipelineLimits::default()
        };
        let r = pipeline_approximate(f, w, m, eps, limits).or_status()?;
        *e = r.final_error;
        *o = boxed(DpPoly(r.poly));
        Ok(())
    })
}

/// Degree-`n` Taylor polynomial of the product kernel in `dim` variables.
///
/// # Safety
/// `out_p` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_kernel_taylor(
    n: usize,
    dim: usize,
    out_p: *mut *mut DpPoly,
) -> DpStatus {
    guard(|| {
        let o = out(out_p, "out")?;
        if dim == 0 {
            set_error("dimension must be positive".into());
            return Err(DpStatus::InvalidInput);
        }
        *o = boxed(DpPoly(taylor_u(n, dim)));
        Ok(())
    })
}

/// # Safety
/// `p` must come from this library; `x` must hold `dim` values.
#[no_mangle]
pub unsafe extern "C" fn dp_poly_eval(
    p: *const DpPoly,
    x: *const f64,
    dim: usize,
    value: *mut f64,
) -> DpStatus {
    guard(|| {
        let p = &get(p, "polynomial")?.0;
        let x = array(x, dim, "x")?;
        if dim != p.dim() {
            set_error(format!("polynomial has {} variables, got {dim}", p.dim()));
            return Err(DpStatus::InvalidInput);
        }
        *out(value, "value")? = p.eval(x);
        Ok(())
    })
}

/// Total degree; 0 for the zero polynomial or a null handle.
///
/// # Safety
/// `p` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dp_poly_degree(p: *const DpPoly) -> usize {
    p.as_ref().map_or(0, |p| p.0.degree())
}

/// Number of nonzero terms.
///
/// # Safety
/// `p` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dp_poly_num_terms(p: *const DpPoly) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dp_poly_free(p: *mut DpPoly) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

// Functionals

/// `F(f) = Σ_j (re_j + i·im_j)·f^{(order_j)}(point_j)` over `n` terms.
///
/// # Safety
/// Arrays must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn dp_functional_new(
    n: usize,
    re: *const f64,
    im: *const f64,
    orders: *const usize,
    points: *const f64,
    out_f: *mut *mut DpFunctional,
) -> DpStatus {
    guard(|| {
        let o = out(out_f, "out")?;
        let (re, im) = (array(re, n, "re")?, array(im, n, "im")?);
        let (orders, points) = (array(orders, n, "orders")?, array(points, n, "points")?);
        let terms = (0..n)
            .map(|j| Term::new(Complex64::new(re[j], im[j]), orders[j], points[j]))
            .collect();
        *o = boxed(DpFunctional(DiscreteFunctional::new(terms).or_status()?));
        Ok(())
    })
}

/// `F(f)` for a one-variable function.
///
/// # Safety
/// Handles must come from this library.
#[no_mangle]
pub unsafe extern "C" fn dp_functional_apply(
    func: *const DpFunctional,
    f: *const DpFunction,
    re: *mut f64,
    im: *mut f64,
) -> DpStatus {
    guard(|| {
        let func = &get(func, "functional")?.0;
        let f = &get(f, "function")?.0;
        let v = func.apply(f.as_ref()).or_status()?;
        *out(re, "re")? = v.re;
        *out(im, "im")? = v.im;
        Ok(())
    })
}

/// Growth norm of the transform on the default rectangle protocol.
///
/// # Safety
/// Handles must come from this library; `verdict` may be null.
#[no_mangle]
pub unsafe extern "C" fn dp_functional_growth_norm(
    func: *const DpFunctional,
    m: usize,
    w: *const DpWeight,
    value: *mut f64,
    verdict: *mut DpVerdict,
) -> DpStatus {
    guard(|| {
        let func = &get(func, "functional")?.0;
        let w = &get(w, "weight")?.0;
        let v = out(value, "value")?;
        let n = growth_norm(&func.transform(), m, w, &Rect::default()).or_status()?;
        *v = n.value;
        if let Some(d) = verdict.as_mut() {
            *d = match n.verdict {
                Verdict::Interior => DpVerdict::Interior,
                Verdict::Boundary => DpVerdict::Boundary,
                Verdict::Divergent => DpVerdict::Divergent,
            };
        }
        Ok(())
    })
}

/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn dp_functional_free(f: *mut DpFunctional) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

// Sequence spaces

/// `K_m = Σ_k c_k^{(m)}/c_k^{(m+1)}` for `c_k^{(m)} = base^{km}`.
///
/// # Safety
/// `value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_km_geometric(
    base: f64,
    m: usize,
    tol: f64,
    value: *mut f64,
) -> DpStatus {
    guard(|| {
        let v = out(value, "value")?;
        *v = km_sum(&SeqWeightFamily::Geometric { base }, m, tol)
            .or_status()?
            .value;
        Ok(())
    })
}
