//! C ABI over `fracpoho`.
//!
//! Every entry point returns an [`FpStatus`]; results go through out
//! pointers. On failure the message is available from
//! [`fp_last_error_message`] on the calling thread. Points are passed as
//! `dim` contiguous doubles, where `dim` is the dimension of the handle or
//! problem. Strings returned by the library are released with
//! [`fp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fracpoho::cli::report_json;
use fracpoho::verify::run_identity;
use fracpoho::{BallDomain, Error, FracParams, FractionalGreen, IdentityId, IdentityProblem, Point, Slot};

/// Status codes. `Ok` is zero; everything else is an error.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    Domain = 3,
    DimensionMismatch = 4,
    CoincidentPoints = 5,
    OutsideDomain = 6,
    NotOnBoundary = 7,
    UnsupportedDimension = 8,
    InvalidOrder = 9,
    Hypothesis = 10,
    Convergence = 11,
    BudgetExceeded = 12,
    Config = 13,
    InvalidString = 14,
    Panic = 15,
}

impl From<&Error> for FpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => FpStatus::Domain,
            Error::InvalidParams(_) => FpStatus::InvalidParams,
            Error::DimensionMismatch { .. } => FpStatus::DimensionMismatch,
            Error::CoincidentPoints => FpStatus::CoincidentPoints,
            Error::OutsideDomain { .. } => FpStatus::OutsideDomain,
            Error::NotOnBoundary { .. } => FpStatus::NotOnBoundary,
            Error::UnsupportedDimension(_) => FpStatus::UnsupportedDimension,
            Error::InvalidOrder(_) => FpStatus::InvalidOrder,
            Error::Hypothesis(_) => FpStatus::Hypothesis,
            Error::Convergence { .. } => FpStatus::Convergence,
            Error::BudgetExceeded(_) => FpStatus::BudgetExceeded,
            Error::Config(_) => FpStatus::Config,
        }
    }
}

/// Which argument a gradient is taken with respect to.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpSlot {
    First = 0,
    Second = 1,
}

/// Opaque handle to the fractional kernels on one ball.
pub struct FpGreen {
    inner: FractionalGreen,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(FpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(FpStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(FpStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any error or panic, and returns the status.
fn guard<F>(f: F) -> FpStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FpStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            FpStatus::Panic
        }
    }
}

unsafe fn point(p: *const f64, dim: usize, what: &str) -> Result<Point, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Point::new(std::slice::from_raw_parts(p, dim).to_vec()))
}

unsafe fn handle<'a>(h: *const FpGreen) -> Result<&'a FpGreen, Failure> {
    h.as_ref().ok_or_else(|| null("handle"))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message of the most recent call on this thread that failed; empty after
/// a successful call. The pointer stays valid until the next call on the
/// same thread.
#[no_mangle]
pub extern "C" fn fp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the kernels for `(-Δ)^s` on `B_radius(0) ⊂ R^dim`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn fp_green_new(dim: usize, s: f64, radius: f64, out: *mut *mut FpGreen) -> FpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let params = FracParams::new(dim, s)?;
        let ball = BallDomain::new(dim, radius)?;
        let g = FractionalGreen::new(params, ball)?;
        out.write(Box::into_raw(Box::new(FpGreen { inner: g })));
        Ok(())
    })
}

/// Releases a handle. Null is accepted.
///
/// # Safety
/// `h` must be null or a handle from [`fp_green_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fp_green_free(h: *mut FpGreen) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Dimension of the handle, or 0 for null.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_green_dim(h: *const FpGreen) -> usize {
    h.as_ref().map_or(0, |g| g.inner.params().dim())
}

macro_rules! two_point {
    ($(#[$m:meta])* $name:ident, $method:ident) => {
        $(#[$m])*
        ///
        /// # Safety
        /// `h` must be a live handle, `x` and `y` must point to `dim`
        /// doubles and `out` to one writable double.
        #[no_mangle]
        pub unsafe extern "C" fn $name(h: *const FpGreen, x: *const f64, y: *const f64, out: *mut f64) -> FpStatus {
            guard(|| {
                let g = handle(h)?;
                let n = g.inner.params().dim();
                let v = g.inner.$method(&point(x, n, "x")?, &point(y, n, "y")?)?;
                write(out, v)
            })
        }
    };
}

two_point!(
    /// Fundamental solution `F_s(x, y)`.
    fp_green_fundamental, fundamental_f
);
two_point!(
    /// Green function `G_s(x, y)` of the ball.
    fp_green_g, ball_green_g
);
two_point!(
    /// Regular part `H_s(x, y) = F_s(x, y) - G_s(x, y)`.
    fp_green_h, regular_part_h
);
two_point!(
    /// Boundary trace `lim G_s(x, z)/δ(z)^s` as `z → sigma ∈ ∂B`.
    fp_green_trace, boundary_trace
);

/// Robin function `R_s(x) = H_s(x, x)`.
///
/// # Safety
/// `h` must be a live handle, `x` must point to `dim` doubles and `out` to
/// one writable double.
#[no_mangle]
pub unsafe extern "C" fn fp_green_robin(h: *const FpGreen, x: *const f64, out: *mut f64) -> FpStatus {
    guard(|| {
        let g = handle(h)?;
        let v = g.inner.robin(&point(x, g.inner.params().dim(), "x")?)?;
        write(out, v)
    })
}

/// Gradient of `H_s(x, y)` in the argument picked by `slot`.
///
/// # Safety
/// `h` must be a live handle; `x`, `y` must point to `dim` doubles and
/// `out` to `dim` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fp_green_grad_h(
    h: *const FpGreen,
    x: *const f64,
    y: *const f64,
    slot: FpSlot,
    out: *mut f64,
) -> FpStatus {
    guard(|| {
        let g = handle(h)?;
        let n = g.inner.params().dim();
        let slot = match slot {
            FpSlot::First => Slot::First,
            FpSlot::Second => Slot::Second,
        };
        let grad = g.inner.grad_h(&point(x, n, "x")?, &point(y, n, "y")?, slot)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        ptr::copy_nonoverlapping(grad.coords().as_ptr(), out, n);
        Ok(())
    })
}

/// Inputs of [`fp_verify`]. Optional points are null when absent; `axis`
/// is negative when absent.
#[repr(C)]
pub struct FpProblem {
    /// Identity name: `robin`, `bilinear`, `bilinear-general`,
    /// `difference`, `local` or `local-vector`.
    pub identity: *const c_char,
    pub dim: usize,
    pub s: f64,
    pub radius: f64,
    pub x: *const f64,
    pub y: *const f64,
    pub xi: *const f64,
    pub axis: i32,
    pub seed: u64,
    pub orders: *const usize,
    pub n_orders: usize,
}

/// Evaluates both sides of an identity over the given quadrature orders
/// and writes the report as a JSON string to `out_json`.
///
/// # Safety
/// Every non-null pointer in `problem` must be valid for its documented
/// length; `identity` must be NUL-terminated. `out_json` must be writable.
/// The returned string is released with [`fp_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fp_verify(problem: *const FpProblem, out_json: *mut *mut c_char) -> FpStatus {
    guard(|| {
        let p = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out_json.is_null() {
            return Err(null("output pointer"));
        }
        if p.identity.is_null() {
            return Err(null("identity"));
        }
        let name = CStr::from_ptr(p.identity)
            .to_str()
            .map_err(|_| Failure(FpStatus::InvalidString, "identity is not valid UTF-8".into()))?;
        let id: IdentityId = name.parse()?;
        if p.orders.is_null() || p.n_orders == 0 {
            return Err(Failure(FpStatus::InvalidOrder, "at least one quadrature order is required".into()));
        }
        let orders = std::slice::from_raw_parts(p.orders, p.n_orders);
        let mut prob = IdentityProblem::new(id, p.dim, p.s, p.radius, point(p.x, p.dim, "x")?).with_seed(p.seed);
        if !p.y.is_null() {
            prob = prob.with_y(point(p.y, p.dim, "y")?);
        }
        if !p.xi.is_null() {
            prob = prob.with_xi(point(p.xi, p.dim, "xi")?);
        }
        if p.axis >= 0 {
            prob = prob.with_axis(p.axis as usize);
        }
        prob.validate()?;
        let rep = run_identity(&prob, orders)?;
        let json = CString::new(report_json(&rep, true)).expect("JSON contains no NUL");
        out_json.write(json.into_raw());
        Ok(())
    })
}

/// Releases a string returned by the library. Null is accepted.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
