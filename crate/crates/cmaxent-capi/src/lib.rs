//! C ABI for the cmaxent library: opaque handles, integer status codes,
//! and JSON/CSV strings for structured data.
//!
//! Conventions:
//! - Every fallible call returns a [`CmxStatus`]; `CMX_OK` is zero.
//! - Output handles and strings are written through out-pointers and must
//!   be released with the matching `cmx_*_free` / [`cmx_string_free`].
//! - On failure, a thread-local message is readable through
//!   [`cmx_last_error_message`] until the next failing call on the thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cmaxent::anticausal::{AnticausalModel, ImputationStrategy};
use cmaxent::causal::CausalModel;
use cmaxent::combined::{CombinedModel, CombinedMomentSpec};
use cmaxent::datagen::Seeded;
use cmaxent::error::Error;
use cmaxent::moments::{MomentSpec, SampleSet};
use cmaxent::Direction;
use nalgebra::{Matrix2, Vector2, Vector4};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmxStatus {
    CmxOk = 0,
    /// A required pointer argument was null.
    CmxErrNullArgument = 1,
    /// A string argument was not valid UTF-8.
    CmxErrUtf8 = 2,
    /// JSON or CSV input could not be parsed.
    CmxErrParse = 3,
    /// The input violates a documented invariant.
    CmxErrInvalid = 4,
    /// The constraint set admits no solution.
    CmxErrInfeasible = 5,
    /// An iterative solve did not reach its tolerance.
    CmxErrNoConvergence = 6,
    /// The requested geometry is degenerate (zero normal).
    CmxErrDegenerate = 7,
    /// The callee panicked; state may be stale but memory is intact.
    CmxErrInternal = 8,
}

/// Imputation rule for an unobserved `phi2`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmxStrategy {
    /// Closed-form bound.
    CmxStrategyPaper = 0,
    /// Numeric conditional-entropy maximizer (default).
    CmxStrategyEntropy = 1,
}

/// Assumed causal role of the covariates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmxDirection {
    CmxDirectionCausal = 0,
    CmxDirectionAnticausal = 1,
}

/// Opaque moment-constraint set.
pub struct CmxMomentSpec(MomentSpec);
/// Opaque causal-direction model.
pub struct CmxCausalModel(CausalModel);
/// Opaque anticausal-direction model.
pub struct CmxAnticausalModel(AnticausalModel);
/// Opaque merged four-covariate model.
pub struct CmxCombinedModel(CombinedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn remember(message: String) {
    let message = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error").expect("static"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> CmxStatus {
    match err {
        Error::Io(_) | Error::Json(_) | Error::Parse(_) => CmxStatus::CmxErrParse,
        Error::EmptySamples
        | Error::SingleClass { .. }
        | Error::NonFinite { .. }
        | Error::InvalidSpec(_)
        | Error::InvalidArgument(_) => CmxStatus::CmxErrInvalid,
        Error::Infeasible { .. } | Error::Singular { .. } => CmxStatus::CmxErrInfeasible,
        Error::NonConvergence { .. } | Error::QuadratureAccuracy { .. } => {
            CmxStatus::CmxErrNoConvergence
        }
        Error::DegenerateBoundary => CmxStatus::CmxErrDegenerate,
    }
}

fn fail(err: Error) -> CmxStatus {
    let status = status_of(&err);
    remember(err.to_string());
    status
}

/// Run a fallible body, translating errors and panics to status codes.
fn guard(body: impl FnOnce() -> Result<(), Error>) -> CmxStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => CmxStatus::CmxOk,
        Ok(Err(e)) => fail(e),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in cmaxent".to_string());
            remember(msg);
            CmxStatus::CmxErrInternal
        }
    }
}

unsafe fn utf8_arg<'a>(ptr: *const c_char) -> Result<&'a str, Error> {
    if ptr.is_null() {
        return Err(Error::InvalidArgument("null string argument".into()));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::Parse("argument is not valid UTF-8".into()))
}

fn null_check<T>(ptr: *const T) -> Result<(), Error> {
    if ptr.is_null() {
        Err(Error::InvalidArgument("null pointer argument".into()))
    } else {
        Ok(())
    }
}

unsafe fn emit_string(out: *mut *mut c_char, value: String) -> Result<(), Error> {
    null_check(out)?;
    let c = CString::new(value.replace('\0', " "))
        .map_err(|_| Error::Parse("interior NUL in output".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    cmaxent::json::to_string_17(value)
}

/// Last error message for this thread, or null when no call failed yet.
/// The pointer stays valid until the next failing call on the thread.
#[no_mangle]
pub extern "C" fn cmx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |s| s.as_ptr())
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must have been produced by a `cmx_*` call and not freed before.
#[no_mangle]
pub unsafe extern "C" fn cmx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

macro_rules! free_fn {
    ($(#[$doc:meta])* $name:ident, $ty:ty) => {
        $(#[$doc])*
        ///
        /// # Safety
        /// The handle must come from this library and not be freed twice.
        #[no_mangle]
        pub unsafe extern "C" fn $name(handle: *mut $ty) {
            if !handle.is_null() {
                drop(Box::from_raw(handle));
            }
        }
    };
}

free_fn!(
    /// Release a moment spec.
    cmx_moment_spec_free,
    CmxMomentSpec
);
free_fn!(
    /// Release a causal model.
    cmx_causal_model_free,
    CmxCausalModel
);
free_fn!(
    /// Release an anticausal model.
    cmx_anticausal_model_free,
    CmxAnticausalModel
);
free_fn!(
    /// Release a combined model.
    cmx_combined_model_free,
    CmxCombinedModel
);

unsafe fn deref<'a, T>(handle: *const T) -> Result<&'a T, Error> {
    handle
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("null handle".into()))
}

/// Build a moment spec from scalars. `sigma_x` is row-major
/// `[s11, s12, s21, s22]`.
///
/// # Safety
/// `xbar` and `phi` must point to 2 doubles, `sigma_x` to 4, and `out`
/// must be a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_moment_spec_new(
    q: f64,
    xbar: *const f64,
    phi: *const f64,
    sigma_x: *const f64,
    avail_phi2: bool,
    avail_s12: bool,
    out: *mut *mut CmxMomentSpec,
) -> CmxStatus {
    guard(|| {
        null_check(xbar)?;
        null_check(phi)?;
        null_check(sigma_x)?;
        null_check(out)?;
        let spec = MomentSpec {
            q,
            xbar: Vector2::new(*xbar, *xbar.add(1)),
            phi: Vector2::new(*phi, *phi.add(1)),
            sigma_x: Matrix2::new(*sigma_x, *sigma_x.add(1), *sigma_x.add(2), *sigma_x.add(3)),
            avail_phi2,
            avail_s12,
        };
        *out = Box::into_raw(Box::new(CmxMomentSpec(spec)));
        Ok(())
    })
}

/// Parse a moment spec from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_moment_spec_from_json(
    json: *const c_char,
    out: *mut *mut CmxMomentSpec,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        let spec: MomentSpec = serde_json::from_str(utf8_arg(json)?)?;
        *out = Box::into_raw(Box::new(CmxMomentSpec(spec)));
        Ok(())
    })
}

/// Estimate a moment spec from CSV text (`y,x1,x2` header).
///
/// # Safety
/// `csv` must be a NUL-terminated string; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_moment_spec_from_csv(
    csv: *const c_char,
    out: *mut *mut CmxMomentSpec,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        let samples = SampleSet::from_csv(utf8_arg(csv)?.as_bytes())?;
        let spec = cmaxent::moments::estimate_moments(&samples)?;
        *out = Box::into_raw(Box::new(CmxMomentSpec(spec)));
        Ok(())
    })
}

/// Serialize a moment spec to JSON (17 significant digits).
///
/// # Safety
/// `spec` must be a live handle; `out_json` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_moment_spec_to_json(
    spec: *const CmxMomentSpec,
    out_json: *mut *mut c_char,
) -> CmxStatus {
    guard(|| emit_string(out_json, to_json(&deref(spec)?.0)?))
}

/// Shift a spec to the zero-mean convention.
///
/// # Safety
/// `spec` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_moment_spec_center(
    spec: *const CmxMomentSpec,
    out: *mut *mut CmxMomentSpec,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        let centered = cmaxent::moments::center(&deref(spec)?.0);
        *out = Box::into_raw(Box::new(CmxMomentSpec(centered)));
        Ok(())
    })
}

/// `CMX_OK` when the spec satisfies every invariant; otherwise
/// `CMX_ERR_INVALID` with the violation list in the error message.
///
/// # Safety
/// `spec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cmx_moment_spec_validate(spec: *const CmxMomentSpec) -> CmxStatus {
    guard(|| {
        let violations = cmaxent::moments::validate(&deref(spec)?.0);
        if violations.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::InvalidSpec(msgs.join("; ")))
        }
    })
}

macro_rules! fit_fn {
    ($(#[$doc:meta])* $name:ident, $fit:path, $handle:ident) => {
        $(#[$doc])*
        ///
        /// # Safety
        /// `spec` must be a live handle; `out` a valid out-pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $name(
            spec: *const CmxMomentSpec,
            out: *mut *mut $handle,
        ) -> CmxStatus {
            guard(|| {
                null_check(out)?;
                let model = $fit(&deref(spec)?.0)?;
                *out = Box::into_raw(Box::new($handle(model)));
                Ok(())
            })
        }
    };
}

fit_fn!(
    /// Full-information causal fit.
    cmx_fit_causal,
    cmaxent::causal::fit_causal,
    CmxCausalModel
);
fit_fn!(
    /// Causal fit with `phi2` unobserved (`lambda2` pinned to zero).
    cmx_fit_causal_missing_phi2,
    cmaxent::causal::fit_causal_missing_phi2,
    CmxCausalModel
);
fit_fn!(
    /// Causal fit with `s12` unobserved (diagonal marginal).
    cmx_fit_causal_missing_s12,
    cmaxent::causal::fit_causal_missing_s12,
    CmxCausalModel
);
fit_fn!(
    /// Full-information anticausal fit.
    cmx_fit_anticausal,
    cmaxent::anticausal::fit_anticausal,
    CmxAnticausalModel
);
fit_fn!(
    /// Anticausal fit with `s12` unobserved (conditionally independent
    /// covariates).
    cmx_fit_anticausal_missing_s12,
    cmaxent::anticausal::fit_anticausal_missing_s12,
    CmxAnticausalModel
);

/// Anticausal fit with `phi2` unobserved; the missing moment is imputed
/// with the chosen strategy and recorded in the model metadata.
///
/// # Safety
/// `spec` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_fit_anticausal_missing_phi2(
    spec: *const CmxMomentSpec,
    strategy: CmxStrategy,
    out: *mut *mut CmxAnticausalModel,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        let strategy = match strategy {
            CmxStrategy::CmxStrategyPaper => ImputationStrategy::Paper,
            CmxStrategy::CmxStrategyEntropy => ImputationStrategy::Entropy,
        };
        let model = cmaxent::anticausal::fit_anticausal_missing_phi2(&deref(spec)?.0, strategy)?;
        *out = Box::into_raw(Box::new(CmxAnticausalModel(model)));
        Ok(())
    })
}

/// Fit the merged four-covariate model: a causal block and an anticausal
/// block sharing one target frequency.
///
/// # Safety
/// Both specs must be live handles; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_fit_combined(
    cause: *const CmxMomentSpec,
    effect: *const CmxMomentSpec,
    out: *mut *mut CmxCombinedModel,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        let spec4 = CombinedMomentSpec {
            cause: deref(cause)?.0.clone(),
            effect: deref(effect)?.0.clone(),
        };
        let model = cmaxent::combined::fit_combined(&spec4)?;
        *out = Box::into_raw(Box::new(CmxCombinedModel(model)));
        Ok(())
    })
}

/// `p(y = +1 | x)` under a causal model.
///
/// # Safety
/// `model` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_causal_posterior(
    model: *const CmxCausalModel,
    x1: f64,
    x2: f64,
    out: *mut f64,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        *out = cmaxent::causal::causal_posterior(&deref(model)?.0, Vector2::new(x1, x2));
        Ok(())
    })
}

/// `p(y = +1 | x)` under an anticausal model.
///
/// # Safety
/// `model` must be a live handle; `out` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_anticausal_posterior(
    model: *const CmxAnticausalModel,
    x1: f64,
    x2: f64,
    out: *mut f64,
) -> CmxStatus {
    guard(|| {
        null_check(out)?;
        *out = cmaxent::anticausal::anticausal_posterior(&deref(model)?.0, Vector2::new(x1, x2));
        Ok(())
    })
}

/// `p(y = +1 | x1..x4)` under a combined model.
///
/// # Safety
/// `model` must be a live handle; `x` must point to 4 doubles; `out` a
/// valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_combined_posterior(
    model: *const CmxCombinedModel,
    x: *const f64,
    out: *mut f64,
) -> CmxStatus {
    guard(|| {
        null_check(x)?;
        null_check(out)?;
        let point = Vector4::new(*x, *x.add(1), *x.add(2), *x.add(3));
        *out = cmaxent::combined::combined_posterior(&deref(model)?.0, point);
        Ok(())
    })
}

macro_rules! model_json_fns {
    ($to_name:ident, $from_name:ident, $handle:ident, $model:ty) => {
        /// Serialize the model to JSON (17 significant digits).
        ///
        /// # Safety
        /// `model` must be a live handle; `out_json` a valid out-pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $to_name(
            model: *const $handle,
            out_json: *mut *mut c_char,
        ) -> CmxStatus {
            guard(|| emit_string(out_json, to_json(&deref(model)?.0)?))
        }

        /// Parse a model from its JSON form.
        ///
        /// # Safety
        /// `json` must be a NUL-terminated string; `out` a valid out-pointer.
        #[no_mangle]
        pub unsafe extern "C" fn $from_name(
            json: *const c_char,
            out: *mut *mut $handle,
        ) -> CmxStatus {
            guard(|| {
                null_check(out)?;
                let model: $model = serde_json::from_str(utf8_arg(json)?)?;
                *out = Box::into_raw(Box::new($handle(model)));
                Ok(())
            })
        }
    };
}

model_json_fns!(
    cmx_causal_model_to_json,
    cmx_causal_model_from_json,
    CmxCausalModel,
    CausalModel
);
model_json_fns!(
    cmx_anticausal_model_to_json,
    cmx_anticausal_model_from_json,
    CmxAnticausalModel,
    AnticausalModel
);
model_json_fns!(
    cmx_combined_model_to_json,
    cmx_combined_model_from_json,
    CmxCombinedModel,
    CombinedModel
);

/// Canonical decision boundary `w.x + b = 0` of a causal model.
///
/// # Safety
/// `model` must be a live handle; `out_w` must point to 2 doubles and
/// `out_b` to one.
#[no_mangle]
pub unsafe extern "C" fn cmx_boundary_causal(
    model: *const CmxCausalModel,
    out_w: *mut f64,
    out_b: *mut f64,
) -> CmxStatus {
    guard(|| {
        null_check(out_w)?;
        null_check(out_b)?;
        let boundary = cmaxent::boundary::boundary_from_causal(&deref(model)?.0)?;
        *out_w = boundary.w.x;
        *out_w.add(1) = boundary.w.y;
        *out_b = boundary.b;
        Ok(())
    })
}

/// Canonical decision boundary of a shared-covariance anticausal model.
///
/// # Safety
/// `model` must be a live handle; `out_w` must point to 2 doubles and
/// `out_b` to one.
#[no_mangle]
pub unsafe extern "C" fn cmx_boundary_anticausal(
    model: *const CmxAnticausalModel,
    out_w: *mut f64,
    out_b: *mut f64,
) -> CmxStatus {
    guard(|| {
        null_check(out_w)?;
        null_check(out_b)?;
        let boundary = cmaxent::boundary::boundary_from_anticausal(&deref(model)?.0)?;
        *out_w = boundary.w.x;
        *out_w.add(1) = boundary.w.y;
        *out_b = boundary.b;
        Ok(())
    })
}

/// Boundary-geometry comparison of the two directions as a JSON report,
/// honoring the spec's availability flags.
///
/// # Safety
/// `spec` must be a live handle; `out_json` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_compare(
    spec: *const CmxMomentSpec,
    strategy: CmxStrategy,
    out_json: *mut *mut c_char,
) -> CmxStatus {
    guard(|| {
        let strategy = match strategy {
            CmxStrategy::CmxStrategyPaper => ImputationStrategy::Paper,
            CmxStrategy::CmxStrategyEntropy => ImputationStrategy::Entropy,
        };
        let report = cmaxent::boundary::compare(&deref(spec)?.0, strategy)?;
        emit_string(out_json, to_json(&report)?)
    })
}

/// Run the brute-force grid oracle against the closed forms; the JSON
/// report carries constraint residuals and the sup-norm gap.
///
/// # Safety
/// `spec` must be a live handle; `out_json` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_oracle_report(
    spec: *const CmxMomentSpec,
    direction: CmxDirection,
    cells_per_axis: usize,
    out_json: *mut *mut c_char,
) -> CmxStatus {
    guard(|| {
        let direction = match direction {
            CmxDirection::CmxDirectionCausal => Direction::Causal,
            CmxDirection::CmxDirectionAnticausal => Direction::Anticausal,
        };
        let report = cmaxent::grid::oracle_report(&deref(spec)?.0, direction, cells_per_axis)?;
        emit_string(out_json, to_json(&report)?)
    })
}

/// Draw a deterministic sample from a causal model as CSV text.
///
/// # Safety
/// `model` must be a live handle; `out_csv` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_sample_causal_csv(
    model: *const CmxCausalModel,
    n: usize,
    seed: u64,
    out_csv: *mut *mut c_char,
) -> CmxStatus {
    guard(|| {
        let samples = cmaxent::datagen::sample_causal(&deref(model)?.0, n, &mut Seeded::new(seed))?;
        let mut buf = Vec::new();
        samples.to_csv(&mut buf)?;
        emit_string(out_csv, String::from_utf8(buf).expect("ascii csv"))
    })
}

/// Draw a deterministic sample from an anticausal model as CSV text.
///
/// # Safety
/// `model` must be a live handle; `out_csv` a valid out-pointer.
#[no_mangle]
pub unsafe extern "C" fn cmx_sample_anticausal_csv(
    model: *const CmxAnticausalModel,
    n: usize,
    seed: u64,
    out_csv: *mut *mut c_char,
) -> CmxStatus {
    guard(|| {
        let samples =
            cmaxent::datagen::sample_anticausal(&deref(model)?.0, n, &mut Seeded::new(seed))?;
        let mut buf = Vec::new();
        samples.to_csv(&mut buf)?;
        emit_string(out_csv, String::from_utf8(buf).expect("ascii csv"))
    })
}
