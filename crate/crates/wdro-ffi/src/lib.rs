//! C ABI for the toolkit: opaque dataset handles, status codes, and a
//! thread-local last-error message. The header is generated into
//! `include/wdro.h` at build time.
//!
//! Conventions: every function returns a `WdroStatus`; outputs go through
//! pointers supplied by the caller; all pointers must be non-null unless
//! documented otherwise; handles are freed exactly once with their `_free`
//! function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};
use wdro_core::dataset::Dataset;
use wdro_core::worstcase::RegressionModel;

/// Status code returned by every API function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WdroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ComputationFailed = 3,
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Message describing the most recent failure on this thread, or null when
/// the last call succeeded. The pointer stays valid until the next API call
/// on the same thread.
#[no_mangle]
pub extern "C" fn wdro_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn wdro_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque dataset handle.
pub struct WdroDataset {
    inner: Dataset,
}

fn guard<F: FnOnce() -> WdroStatus>(f: F) -> WdroStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            WdroStatus::Panic
        }
    }
}

/// Builds a dataset from a row-major `n x d` feature matrix and an optional
/// response vector of length `n` (pass null for none). Returns a handle
/// through `out`; free it with `wdro_dataset_free`.
///
/// # Safety
/// `features` must point to `n * d` doubles; `response` must be null or
/// point to `n` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn wdro_dataset_new(
    features: *const f64,
    n: usize,
    d: usize,
    response: *const f64,
    out: *mut *mut WdroDataset,
) -> WdroStatus {
    guard(|| {
        if features.is_null() || out.is_null() {
            set_error("features and out must be non-null");
            return WdroStatus::NullPointer;
        }
        if n == 0 || d == 0 {
            set_error("n and d must be positive");
            return WdroStatus::InvalidArgument;
        }
        let raw = unsafe { std::slice::from_raw_parts(features, n * d) };
        if raw.iter().any(|v| !v.is_finite()) {
            set_error("features must be finite");
            return WdroStatus::InvalidArgument;
        }
        let mat = DMatrix::from_row_slice(n, d, raw);
        let resp = if response.is_null() {
            None
        } else {
            let r = unsafe { std::slice::from_raw_parts(response, n) };
            if r.iter().any(|v| !v.is_finite()) {
                set_error("response must be finite");
                return WdroStatus::InvalidArgument;
            }
            Some(DVector::from_column_slice(r))
        };
        let handle = Box::new(WdroDataset { inner: Dataset::from_parts(mat, resp) });
        unsafe { *out = Box::into_raw(handle) };
        WdroStatus::Ok
    })
}

/// Frees a dataset handle. Passing null is a no-op.
///
/// # Safety
/// `ds` must be a handle from `wdro_dataset_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wdro_dataset_free(ds: *mut WdroDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Number of rows in the dataset.
///
/// # Safety
/// `ds` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn wdro_dataset_len(ds: *const WdroDataset, out: *mut usize) -> WdroStatus {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        unsafe { *out = (*ds).inner.n() };
        WdroStatus::Ok
    })
}

unsafe fn theta_slice<'a>(theta: *const f64, d: usize) -> Option<&'a [f64]> {
    if theta.is_null() || d == 0 {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(theta, d) })
    }
}

/// Worst-case squared-loss regression risk over the ball of radius `delta`
/// (closed form). `a` is the response transport weight; pass INFINITY to
/// pin the response.
///
/// # Safety
/// `ds` must be a live handle with a response; `theta` must point to `d`
/// doubles matching the feature dimension; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wdro_wc_regression_risk(
    ds: *const WdroDataset,
    theta: *const f64,
    d: usize,
    delta: f64,
    p: f64,
    a: f64,
    out: *mut f64,
) -> WdroStatus {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        let Some(theta) = (unsafe { theta_slice(theta, d) }) else {
            set_error("theta must be non-null and d positive");
            return WdroStatus::NullPointer;
        };
        let data = unsafe { &(*ds).inner };
        let Some(samples) = data.regression_rows() else {
            set_error("dataset has no response column");
            return WdroStatus::InvalidArgument;
        };
        if d != data.dim() {
            set_error("theta dimension does not match the dataset");
            return WdroStatus::InvalidArgument;
        }
        let model = RegressionModel::new(d, p, a);
        let theta = DVector::from_column_slice(theta);
        match wdro_core::worstcase::wc_regression_risk(&model, &samples, &theta, delta) {
            Ok(v) => {
                unsafe { *out = v };
                WdroStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                WdroStatus::ComputationFailed
            }
        }
    })
}

/// Worst-case (smallest) mean portfolio return over the ball.
///
/// # Safety
/// As for `wdro_wc_regression_risk`, on a dataset without a response.
#[no_mangle]
pub unsafe extern "C" fn wdro_wc_portfolio_return(
    ds: *const WdroDataset,
    theta: *const f64,
    d: usize,
    delta: f64,
    p: f64,
    out: *mut f64,
) -> WdroStatus {
    guard(|| {
        if ds.is_null() || out.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        let Some(theta) = (unsafe { theta_slice(theta, d) }) else {
            set_error("theta must be non-null and d positive");
            return WdroStatus::NullPointer;
        };
        let data = unsafe { &(*ds).inner };
        if d != data.dim() {
            set_error("theta dimension does not match the dataset");
            return WdroStatus::InvalidArgument;
        }
        let samples = data.feature_rows();
        let theta = DVector::from_column_slice(theta);
        match wdro_core::worstcase::wc_portfolio_return(&samples, &theta, p, delta) {
            Ok(v) => {
                unsafe { *out = v };
                WdroStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                WdroStatus::ComputationFailed
            }
        }
    })
}

/// Fits the distributionally robust regression (square-root penalty) and
/// writes the coefficient vector into `out_theta` (length `d`).
///
/// # Safety
/// `ds` must be a live handle with a response; `out_theta` must point to
/// `d` writable doubles with `d` the feature dimension.
#[no_mangle]
pub unsafe extern "C" fn wdro_fit_sqrt_lasso(
    ds: *const WdroDataset,
    delta: f64,
    p: f64,
    out_theta: *mut f64,
    d: usize,
) -> WdroStatus {
    guard(|| {
        if ds.is_null() || out_theta.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        let data = unsafe { &(*ds).inner };
        if d != data.dim() {
            set_error("output dimension does not match the dataset");
            return WdroStatus::InvalidArgument;
        }
        match wdro_core::estimators::fit_sqrt_lasso(data, delta, p) {
            Ok(fit) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_theta, d) };
                out.copy_from_slice(&fit.theta);
                WdroStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                WdroStatus::ComputationFailed
            }
        }
    })
}

/// Profile (projection) distance of the sample to the mean-estimation
/// manifold at `theta`, and the scaled statistic `n * value`.
///
/// # Safety
/// `ds` must be a live handle; `theta` points to `d` doubles; the out
/// pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wdro_profile_mean(
    ds: *const WdroDataset,
    theta: *const f64,
    d: usize,
    out_value: *mut f64,
    out_scaled: *mut f64,
) -> WdroStatus {
    guard(|| {
        if ds.is_null() || out_value.is_null() || out_scaled.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        let Some(theta) = (unsafe { theta_slice(theta, d) }) else {
            set_error("theta must be non-null and d positive");
            return WdroStatus::NullPointer;
        };
        let data = unsafe { &(*ds).inner };
        if d != data.dim() {
            set_error("theta dimension does not match the dataset");
            return WdroStatus::InvalidArgument;
        }
        let samples = data.feature_rows();
        let model = wdro_core::worstcase::MeanModel { dim: d };
        let cost = wdro_core::ot::CostSpec::new(2.0, 2.0);
        let theta = DVector::from_column_slice(theta);
        match wdro_core::profile::profile_value(&model, &samples, &theta, &cost) {
            Ok(v) => {
                unsafe {
                    *out_value = v.value;
                    *out_scaled = v.scaled;
                }
                WdroStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                WdroStatus::ComputationFailed
            }
        }
    })
}

/// Data-driven ball radius: the `1 - alpha` Monte Carlo quantile of the
/// profile limit law at `theta`, divided by `n`. Deterministic in `seed`.
///
/// # Safety
/// `ds` must be a live handle with a response; `theta` points to `d`
/// doubles; `out_delta` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wdro_estimate_radius(
    ds: *const WdroDataset,
    theta: *const f64,
    d: usize,
    p: f64,
    alpha: f64,
    draws: usize,
    seed: u64,
    out_delta: *mut f64,
) -> WdroStatus {
    guard(|| {
        if ds.is_null() || out_delta.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        let Some(theta) = (unsafe { theta_slice(theta, d) }) else {
            set_error("theta must be non-null and d positive");
            return WdroStatus::NullPointer;
        };
        let data = unsafe { &(*ds).inner };
        let Some(samples) = data.regression_rows() else {
            set_error("dataset has no response column");
            return WdroStatus::InvalidArgument;
        };
        if d != data.dim() {
            set_error("theta dimension does not match the dataset");
            return WdroStatus::InvalidArgument;
        }
        let model = RegressionModel::new(d, p, f64::INFINITY);
        let theta = DVector::from_column_slice(theta);
        match wdro_core::radius::estimate_radius(&model, &samples, &theta, p, alpha, draws, seed) {
            Ok((_, quant)) => {
                unsafe { *out_delta = quant.eta / data.n() as f64 };
                WdroStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                WdroStatus::ComputationFailed
            }
        }
    })
}

/// High-dimensional radius prescription; writes `sqrt(delta)`.
#[no_mangle]
pub extern "C" fn wdro_sqrt_lasso_radius(
    n: usize,
    d: usize,
    alpha: f64,
    out_sqrt_delta: *mut f64,
) -> WdroStatus {
    guard(|| {
        if out_sqrt_delta.is_null() {
            set_error("null pointer");
            return WdroStatus::NullPointer;
        }
        match wdro_core::radius::sqrt_lasso_radius(n, d, alpha) {
            Ok((sqrt_delta, _, _)) => {
                unsafe { *out_sqrt_delta = sqrt_delta };
                WdroStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                WdroStatus::ComputationFailed
            }
        }
    })
}
