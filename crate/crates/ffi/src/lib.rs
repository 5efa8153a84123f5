//! C ABI for `sheetreg`.
//!
//! Objects are opaque handles returned through out-pointers (for example by
//! `sr_domain_circle`) and released by the matching `sr_*_free`. Every
//! fallible call returns an [`SrStatus`]; on failure `sr_last_error_message`
//! describes the cause.
//! Matrices are written row-major into caller buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sheetreg::estimation::{estimate, fisher, EstimationResult};
use sheetreg::geometry::{circle_domain, DomainConfig, ValidatedDomain, DEFAULT_GRID_POINTS};
use sheetreg::random_fields::{draw_kl, FieldModel, FieldSample};
use sheetreg::regressors::{RegressorSet, RegressorSpec};
use sheetreg::stochastic_integrals::StochIntConfig;
use sheetreg::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The domain violates its geometric conditions.
    DomainError = 3,
    /// Model parameters or rectangle are inadmissible.
    ModelError = 4,
    /// Quadrature failed or a matrix is singular.
    NumericalError = 5,
    /// Malformed JSON, expression or UTF-8.
    ParseError = 6,
    /// A caller buffer is too small.
    BufferTooSmall = 7,
    /// Unexpected internal failure.
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrModelKind {
    Wiener = 0,
    StationaryOu = 1,
    ZeroStartOu = 2,
}

/// Driving sheet; `alpha`, `beta`, `sigma` are ignored for Wiener.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SrModel {
    pub kind: SrModelKind,
    pub alpha: f64,
    pub beta: f64,
    pub sigma: f64,
}

impl SrModel {
    fn to_model(self) -> FieldModel {
        let (alpha, beta, sigma) = (self.alpha, self.beta, self.sigma);
        match self.kind {
            SrModelKind::Wiener => FieldModel::Wiener,
            SrModelKind::StationaryOu => FieldModel::StationaryOu { alpha, beta, sigma },
            SrModelKind::ZeroStartOu => FieldModel::ZeroStartOu { alpha, beta, sigma },
        }
    }
}

/// A validated observation domain.
pub struct SrDomain(ValidatedDomain);

/// An ordered set of regressors.
pub struct SrRegressors(RegressorSet);

/// The outcome of one estimation.
pub struct SrEstimate(EstimationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::MonotonicityViolation { .. }
        | Error::EndpointMismatch { .. }
        | Error::NonPositiveOrdinate { .. }
        | Error::StripOverlap { .. }
        | Error::InverseMismatch { .. }
        | Error::CircleNotInPositiveQuadrant { .. } => SrStatus::DomainError,
        Error::OutOfRectangle { .. } | Error::WrongModelVariant { .. } | Error::NonPositiveCoordinate { .. } => {
            SrStatus::ModelError
        }
        Error::MaxDepthExceeded { .. } | Error::QuadratureFailure(_) | Error::SingularMatrix => SrStatus::NumericalError,
        Error::ExpressionParse { .. } | Error::Json(_) | Error::Csv(_) | Error::Grid(_) => SrStatus::ParseError,
        _ => SrStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (SrStatus, String)>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SrStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SrStatus, String) {
    (SrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SrStatus::ParseError, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SrStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (SrStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write_buf(src: &[f64], out: *mut f64, len: usize) -> Result<(), (SrStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err((
            SrStatus::BufferTooSmall,
            format!("buffer holds {len} values but {} are needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Disc of radius `r` centred at `(cx, cy)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_domain_circle(cx: f64, cy: f64, r: f64, out: *mut *mut SrDomain) -> SrStatus {
    guard(|| {
        let d = circle_domain(cx, cy, r)
            .and_then(|d| d.validate(DEFAULT_GRID_POINTS))
            .map_err(lib)?;
        put(out, SrDomain(d))
    })
}

/// Domain from its JSON description, e.g.
/// `{"kind":"circle","cx":6,"cy":6,"r":2}`.
///
/// # Safety
/// `json` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_domain_from_json(json: *const c_char, out: *mut *mut SrDomain) -> SrStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let cfg: DomainConfig = serde_json::from_str(text).map_err(|e| lib(e.into()))?;
        let d = cfg.build().and_then(|d| d.validate(DEFAULT_GRID_POINTS)).map_err(lib)?;
        put(out, SrDomain(d))
    })
}

/// Whether `(s, t)` lies in the closed domain.
///
/// # Safety
/// `d` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_domain_contains(d: *const SrDomain, s: f64, t: f64, out: *mut bool) -> SrStatus {
    guard(|| {
        let d = ref_arg(d, "domain")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        *out = d.0.contains(s, t);
        Ok(())
    })
}

/// Writes `s_min, s_max, t_min, t_max` into `out[0..4]`.
///
/// # Safety
/// `d` must be a live handle and `out` hold 4 values.
#[no_mangle]
pub unsafe extern "C" fn sr_domain_bounding_box(d: *const SrDomain, out: *mut f64) -> SrStatus {
    guard(|| {
        let (s0, s1, t0, t1) = ref_arg(d, "domain")?.0.bounding_box();
        write_buf(&[s0, s1, t0, t1], out, 4)
    })
}

/// # Safety
/// `d` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_domain_free(d: *mut SrDomain) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Regressors from a JSON array of expressions, e.g. `["s^2+t^2", "s*t"]`.
///
/// # Safety
/// `json` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_regressors_from_json(json: *const c_char, out: *mut *mut SrRegressors) -> SrStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let exprs: Vec<String> = serde_json::from_str(text).map_err(|e| lib(e.into()))?;
        let specs: Vec<RegressorSpec> = exprs.into_iter().map(|expr| RegressorSpec { expr }).collect();
        let set = RegressorSet::from_specs(&specs).map_err(lib)?;
        put(out, SrRegressors(set))
    })
}

/// Number of regressors, or 0 for a null handle.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_regressors_count(r: *const SrRegressors) -> usize {
    r.as_ref().map_or(0, |r| r.0.p())
}

/// # Safety
/// `r` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_regressors_free(r: *mut SrRegressors) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Fisher matrix, `p × p` row-major into `out` of capacity `len`.
///
/// # Safety
/// Handles must be live; `model` and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_fisher(
    model: *const SrModel,
    d: *const SrDomain,
    r: *const SrRegressors,
    out: *mut f64,
    len: usize,
) -> SrStatus {
    guard(|| {
        let model = ref_arg(model, "model")?.to_model();
        let d = ref_arg(d, "domain")?;
        let r = ref_arg(r, "regressors")?;
        let a = fisher(&model, &d.0, &r.0, &Default::default()).map_err(lib)?;
        // nalgebra is column-major; A is symmetric but transpose anyway
        write_buf(a.transpose().as_slice(), out, len)
    })
}

/// Simulates `Σ m_k g_k + noise_scale·noise` with an `n`-term KL expansion
/// on `[0,s_max]×[0,t_max]` and estimates `m`.
///
/// # Safety
/// Handles must be live; `true_m` holds `p` values; `out` valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sr_estimate_simulated(
    model: *const SrModel,
    d: *const SrDomain,
    r: *const SrRegressors,
    true_m: *const f64,
    p: usize,
    s_max: f64,
    t_max: f64,
    n: usize,
    seed: u64,
    noise_scale: f64,
    out: *mut *mut SrEstimate,
) -> SrStatus {
    guard(|| {
        let model = ref_arg(model, "model")?.to_model();
        let d = ref_arg(d, "domain")?;
        let r = ref_arg(r, "regressors")?;
        if true_m.is_null() {
            return Err(null("true_m"));
        }
        if p != r.0.p() {
            return Err((
                SrStatus::InvalidArgument,
                format!("{} regressors but {p} coefficients", r.0.p()),
            ));
        }
        let m = std::slice::from_raw_parts(true_m, p).to_vec();
        let z = if noise_scale == 0.0 {
            FieldSample::drift_only(model, s_max, t_max, r.0.clone(), m)
        } else {
            draw_kl(n, s_max, t_max, seed)
                .and_then(|kl| FieldSample::new(model, kl))
                .and_then(|f| f.with_drift(r.0.clone(), m))
                .map(|f| f.with_noise_scale(noise_scale))
        }
        .map_err(lib)?;
        let est = estimate(&model, &z, &d.0, &r.0, &StochIntConfig::default()).map_err(lib)?;
        put(out, SrEstimate(est))
    })
}

/// Number of estimated coefficients, or 0 for a null handle.
///
/// # Safety
/// `e` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sr_estimate_p(e: *const SrEstimate) -> usize {
    e.as_ref().map_or(0, |e| e.0.m_hat.len())
}

/// Writes `m̂` into `out` of capacity `len`.
///
/// # Safety
/// `e` must be live and `out` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sr_estimate_m_hat(e: *const SrEstimate, out: *mut f64, len: usize) -> SrStatus {
    guard(|| write_buf(&ref_arg(e, "estimate")?.0.m_hat, out, len))
}

/// Writes the score `ζ` into `out` of capacity `len`.
///
/// # Safety
/// `e` must be live and `out` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sr_estimate_zeta(e: *const SrEstimate, out: *mut f64, len: usize) -> SrStatus {
    guard(|| write_buf(&ref_arg(e, "estimate")?.0.zeta, out, len))
}

/// Writes the covariance of `m̂`, row-major, into `out` of capacity `len`.
///
/// # Safety
/// `e` must be live and `out` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sr_estimate_covariance(e: *const SrEstimate, out: *mut f64, len: usize) -> SrStatus {
    guard(|| {
        let flat: Vec<f64> = ref_arg(e, "estimate")?.0.covariance.concat();
        write_buf(&flat, out, len)
    })
}

/// The full result as JSON; release with `sr_string_free`.
///
/// # Safety
/// `e` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_estimate_to_json(e: *const SrEstimate, out: *mut *mut c_char) -> SrStatus {
    guard(|| {
        let e = ref_arg(e, "estimate")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text = serde_json::to_string(&e.0).map_err(|e| lib(e.into()))?;
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `e` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sr_estimate_free(e: *mut SrEstimate) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_statuses() {
        assert_eq!(status_of(&Error::SingularMatrix), SrStatus::NumericalError);
        assert_eq!(
            status_of(&Error::CircleNotInPositiveQuadrant { cx: 1.0, cy: 1.0, r: 2.0 }),
            SrStatus::DomainError
        );
        assert_eq!(status_of(&Error::InvalidArgument("x".into())), SrStatus::InvalidArgument);
        assert_eq!(status_of(&Error::Grid("x".into())), SrStatus::ParseError);
    }

    #[test]
    fn panics_become_status() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, SrStatus::Panic);
        let msg = unsafe { CStr::from_ptr(sr_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}
