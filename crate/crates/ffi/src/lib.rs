//! C ABI over `hse-core`.
//!
//! Every fallible call returns an [`HseStatus`]; on failure the message is
//! available from [`hse_last_error`] on the same thread until the next call.
//! Objects cross the boundary as opaque handles released by their `_free`
//! function. Strings returned through `char **` are owned by the caller and
//! released with [`hse_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hse_core::analysis::{dominates_cost, front_indices};
use hse_core::dove::{plan_lhs, plan_maximin_lhs, ExperimentPlan};
use hse_core::exemplars::{self, FevSimulator, YawSimulator};
use hse_core::hyperspace::{DesignPoint, HyperSpace, UseCasePoint, Value, Variable};
use hse_core::runner::{load_store, Simulator};
use hse_core::surrogate::{fit, ModelSpec, SurrogateModel};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Simulation = 5,
    Fit = 6,
    Analysis = 7,
    Integrity = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Opaque hyper space.
pub struct HseSpace(HyperSpace);

/// Opaque experiment plan.
pub struct HsePlan(ExperimentPlan);

/// Opaque surrogate model.
pub struct HseModel(SurrogateModel);

struct Failure(HseStatus, String);

impl Failure {
    fn new(status: HseStatus, msg: impl ToString) -> Self {
        Self(status, msg.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HseStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HseStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            HseStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(HseStatus::NullPointer, format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(HseStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(HseStatus::NullPointer, format!("{what} is null")))
}

fn out_arg<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(HseStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    out_arg(out, "output string")?;
    let c = CString::new(s).map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(HseStatus::NullPointer, format!("{what} is null")));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn hse_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` is null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hse_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

// ---- spaces ----

/// Parses and validates a hyper space document.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hse_space_from_json(json: *const c_char, out: *mut *mut HseSpace) -> HseStatus {
    guard(|| {
        let text = unsafe { str_arg(json, "json") }?;
        out_arg(out, "out")?;
        let space = HyperSpace::from_json_str(text).map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
        unsafe { put_handle(out, HseSpace(space)) };
        Ok(())
    })
}

/// Space of a built-in exemplar, `"fev"` or `"yaw"`.
///
/// # Safety
/// `name` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hse_space_builtin(name: *const c_char, out: *mut *mut HseSpace) -> HseStatus {
    guard(|| {
        let name = unsafe { str_arg(name, "name") }?;
        out_arg(out, "out")?;
        let (space, _) = exemplars::builtin(name)
            .ok_or_else(|| Failure::new(HseStatus::InvalidArgument, format!("unknown exemplar `{name}`")))?;
        unsafe { put_handle(out, HseSpace(space)) };
        Ok(())
    })
}

/// # Safety
/// `space` and `out` are valid.
#[no_mangle]
pub unsafe extern "C" fn hse_space_to_json(space: *const HseSpace, out: *mut *mut c_char) -> HseStatus {
    guard(|| {
        let s = unsafe { ref_arg(space, "space") }?;
        unsafe { put_string(out, s.0.to_json_pretty()) }
    })
}

/// Content hash used to tie plans, stores and models to a space.
///
/// # Safety
/// `space` and `out` are valid.
#[no_mangle]
pub unsafe extern "C" fn hse_space_hash(space: *const HseSpace, out: *mut *mut c_char) -> HseStatus {
    guard(|| {
        let s = unsafe { ref_arg(space, "space") }?;
        unsafe { put_string(out, s.0.hash()) }
    })
}

/// # Safety
/// `space` is null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hse_space_free(space: *mut HseSpace) {
    if !space.is_null() {
        drop(unsafe { Box::from_raw(space) });
    }
}

// ---- plans ----

/// Latin hypercube plan; with `candidates > 1` the best of that many by
/// minimum pairwise distance.
///
/// # Safety
/// `space` and `out` are valid.
#[no_mangle]
pub unsafe extern "C" fn hse_plan_lhs(
    space: *const HseSpace,
    n: usize,
    seed: u64,
    candidates: usize,
    out: *mut *mut HsePlan,
) -> HseStatus {
    guard(|| {
        let s = unsafe { ref_arg(space, "space") }?;
        out_arg(out, "out")?;
        let plan = if candidates > 1 { plan_maximin_lhs(&s.0, n, seed, candidates) } else { plan_lhs(&s.0, n, seed) }
            .map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
        unsafe { put_handle(out, HsePlan(plan)) };
        Ok(())
    })
}

/// Number of runs, or 0 for a null handle.
///
/// # Safety
/// `plan` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn hse_plan_len(plan: *const HsePlan) -> usize {
    unsafe { plan.as_ref() }.map_or(0, |p| p.0.len())
}

/// Plan as CSV text, `run_id` followed by design and use-case columns.
///
/// # Safety
/// All pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn hse_plan_to_csv(
    space: *const HseSpace,
    plan: *const HsePlan,
    out: *mut *mut c_char,
) -> HseStatus {
    guard(|| {
        let s = unsafe { ref_arg(space, "space") }?;
        let p = unsafe { ref_arg(plan, "plan") }?;
        if p.0.space_hash != s.0.hash() {
            return Err(Failure::new(HseStatus::Integrity, "plan was built for a different space"));
        }
        unsafe { put_string(out, p.0.to_csv(&s.0)) }
    })
}

/// # Safety
/// `plan` is null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hse_plan_free(plan: *mut HsePlan) {
    if !plan.is_null() {
        drop(unsafe { Box::from_raw(plan) });
    }
}

// ---- surrogate models ----

/// Fits a surrogate to a results CSV. `spec_json` is a model spec such as
/// `{"family":"polynomial","degree":2}`; null means that default.
///
/// # Safety
/// `space`, `results_path` and `out` are valid; `spec_json` is null or a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hse_model_fit(
    space: *const HseSpace,
    results_path: *const c_char,
    spec_json: *const c_char,
    out: *mut *mut HseModel,
) -> HseStatus {
    guard(|| {
        let s = unsafe { ref_arg(space, "space") }?;
        let path = unsafe { str_arg(results_path, "results_path") }?;
        out_arg(out, "out")?;
        let spec = if spec_json.is_null() {
            ModelSpec::polynomial(2)
        } else {
            let text = unsafe { str_arg(spec_json, "spec_json") }?;
            serde_json::from_str(text).map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?
        };
        let store = load_store(Path::new(path), &s.0).map_err(|e| Failure::new(HseStatus::Io, e))?;
        let model = fit(&store, &spec).map_err(|e| Failure::new(HseStatus::Fit, e))?;
        unsafe { put_handle(out, HseModel(model)) };
        Ok(())
    })
}

/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hse_model_from_json(json: *const c_char, out: *mut *mut HseModel) -> HseStatus {
    guard(|| {
        let text = unsafe { str_arg(json, "json") }?;
        out_arg(out, "out")?;
        let model = SurrogateModel::from_json(text).map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
        unsafe { put_handle(out, HseModel(model)) };
        Ok(())
    })
}

/// # Safety
/// `model` and `out` are valid.
#[no_mangle]
pub unsafe extern "C" fn hse_model_to_json(model: *const HseModel, out: *mut *mut c_char) -> HseStatus {
    guard(|| {
        let m = unsafe { ref_arg(model, "model") }?;
        unsafe { put_string(out, m.0.to_json()) }
    })
}

/// Number of predicted targets, or 0 for a null handle.
///
/// # Safety
/// `model` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn hse_model_target_count(model: *const HseModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.targets.len())
}

fn value_of(var: &Variable, v: &serde_json::Value) -> Result<Value, Failure> {
    let bad = || Failure::new(HseStatus::InvalidArgument, format!("bad value for `{}`", var.name));
    match v {
        serde_json::Value::Number(n) => n.as_f64().map(Value::Real).ok_or_else(bad),
        serde_json::Value::String(s) => Ok(Value::Label(s.clone())),
        _ => Err(bad()),
    }
}

fn point_of(vars: &[Variable], obj: Option<&serde_json::Value>) -> Result<Vec<Value>, Failure> {
    let empty = serde_json::Map::new();
    let obj = match obj {
        Some(serde_json::Value::Object(o)) => o,
        None => &empty,
        Some(_) => return Err(Failure::new(HseStatus::InvalidArgument, "point blocks must be objects")),
    };
    vars.iter()
        .map(|var| {
            let v = obj
                .get(&var.name)
                .ok_or_else(|| Failure::new(HseStatus::InvalidArgument, format!("missing `{}`", var.name)))?;
            value_of(var, v)
        })
        .collect()
}

/// Predicts every target at `{"design": {...}, "use_case": {...}}`.
/// Writes `hse_model_target_count` values to `out_values` and, when
/// `out_extrapolated` is non-null, whether the point lies outside the
/// validation area.
///
/// # Safety
/// `model`, `space` and `point_json` are valid; `out_values` has room for
/// `capacity` doubles; `out_extrapolated` is null or writable.
#[no_mangle]
pub unsafe extern "C" fn hse_model_predict(
    model: *const HseModel,
    space: *const HseSpace,
    point_json: *const c_char,
    out_values: *mut f64,
    capacity: usize,
    out_extrapolated: *mut c_int,
) -> HseStatus {
    guard(|| {
        let m = unsafe { ref_arg(model, "model") }?;
        let s = unsafe { ref_arg(space, "space") }?;
        let text = unsafe { str_arg(point_json, "point_json") }?;
        out_arg(out_values, "out_values")?;
        let k = m.0.targets.len();
        if capacity < k {
            return Err(Failure::new(HseStatus::BufferTooSmall, format!("{k} values needed, room for {capacity}")));
        }
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
        let d = DesignPoint(point_of(&s.0.design, doc.get("design"))?);
        let u = UseCasePoint(point_of(&s.0.use_case, doc.get("use_case"))?);
        let p = m.0.predict(&s.0, &d, &u).map_err(|e| {
            let status = match e {
                hse_core::surrogate::PredictError::SpaceMismatch { .. } => HseStatus::Integrity,
                _ => HseStatus::InvalidArgument,
            };
            Failure::new(status, e)
        })?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_values, k) };
        out.copy_from_slice(&p.targets.0);
        if !out_extrapolated.is_null() {
            unsafe { *out_extrapolated = c_int::from(p.extrapolated) };
        }
        Ok(())
    })
}

/// # Safety
/// `model` is null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hse_model_free(model: *mut HseModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

// ---- Pareto analysis on raw cost matrices (every column minimized) ----

/// Whether cost vector `a` dominates `b`, both of length `k`.
///
/// # Safety
/// `a` and `b` point to `k` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn hse_dominates(a: *const f64, b: *const f64, k: usize, out: *mut c_int) -> HseStatus {
    guard(|| {
        let a = unsafe { slice_arg(a, k, "a") }?;
        let b = unsafe { slice_arg(b, k, "b") }?;
        out_arg(out, "out")?;
        unsafe { *out = c_int::from(dominates_cost(a, b)) };
        Ok(())
    })
}

/// Non-dominated rows of the row-major `n x k` matrix `costs`, ascending.
/// Rows with equal costs and equal `keys` repeat each other and only the
/// first is kept; a null `keys` makes every row distinct. `out_indices` needs
/// room for `n` entries; the front size goes to `out_len`.
///
/// # Safety
/// `costs` points to `n * k` doubles, `keys` is null or points to `n`
/// integers, `out_indices` has room for `n` entries and `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn hse_pareto_front(
    costs: *const f64,
    n: usize,
    k: usize,
    keys: *const u64,
    out_indices: *mut usize,
    out_len: *mut usize,
) -> HseStatus {
    guard(|| {
        if k == 0 {
            return Err(Failure::new(HseStatus::InvalidArgument, "k must be at least 1"));
        }
        let total = n.checked_mul(k).ok_or_else(|| Failure::new(HseStatus::InvalidArgument, "n * k overflows"))?;
        let flat = unsafe { slice_arg(costs, total, "costs") }?;
        if flat.iter().any(|c| c.is_nan()) {
            return Err(Failure::new(HseStatus::Analysis, "costs contain NaN"));
        }
        out_arg(out_len, "out_len")?;
        if n > 0 {
            out_arg(out_indices, "out_indices")?;
        }
        let rows: Vec<Vec<f64>> = flat.chunks(k).map(<[f64]>::to_vec).collect();
        let keys: Vec<u64> =
            if keys.is_null() { (0..n as u64).collect() } else { unsafe { slice_arg(keys, n, "keys") }?.to_vec() };
        let front = front_indices(&rows, &keys);
        if n > 0 {
            unsafe { std::slice::from_raw_parts_mut(out_indices, front.len()) }.copy_from_slice(&front);
        }
        unsafe { *out_len = front.len() };
        Ok(())
    })
}

// ---- exemplars ----

fn simulation(
    r: Result<hse_core::hyperspace::TargetVector, hse_core::runner::SimFailure>,
) -> Result<Vec<f64>, Failure> {
    r.map(|t| t.0).map_err(|e| Failure::new(HseStatus::Simulation, e.0))
}

/// Electric-vehicle drivetrain: acceleration time to 50 km/h in seconds and
/// urban-cycle energy in kWh/100 km. `topology` 0 is single ratio (A1, `g2`
/// and `shift_speed` ignored), 1 is two-speed (A2).
///
/// # Safety
/// `out_t_a50` and `out_e_c` are writable.
#[no_mangle]
pub unsafe extern "C" fn hse_fev_evaluate(
    t_max: f64,
    base_speed: f64,
    g1: f64,
    topology: c_int,
    g2: f64,
    shift_speed: f64,
    out_t_a50: *mut f64,
    out_e_c: *mut f64,
) -> HseStatus {
    guard(|| {
        out_arg(out_t_a50, "out_t_a50")?;
        out_arg(out_e_c, "out_e_c")?;
        let label = match topology {
            0 => "A1",
            1 => "A2",
            t => return Err(Failure::new(HseStatus::InvalidArgument, format!("topology {t} is not 0 or 1"))),
        };
        let (g2, shift_speed) = if topology == 0 {
            // Inactive inputs still need in-range placeholders.
            (exemplars::fev::G2_RANGE.0, exemplars::fev::SHIFT_SPEED_RANGE.0)
        } else {
            (g2, shift_speed)
        };
        let d = DesignPoint(vec![
            Value::Real(t_max),
            Value::Real(base_speed),
            Value::Real(g1),
            label.into(),
            Value::Real(g2),
            Value::Real(shift_speed),
        ]);
        exemplars::fev_space().validate_design(&d).map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
        let t = simulation(FevSimulator::default().evaluate(0, &d, &UseCasePoint::default()))?;
        unsafe {
            *out_t_a50 = t[0];
            *out_e_c = t[1];
        }
        Ok(())
    })
}

/// Relative lateral-stability gain of yaw-moment control with gain `k` on a
/// circle of radius `r` metres while accelerating at `a_x` m/s^2.
/// `four_wheel_drive` non-zero selects 4WD.
///
/// # Safety
/// `out_gain` is writable.
#[no_mangle]
pub unsafe extern "C" fn hse_yaw_gain(
    k: f64,
    four_wheel_drive: c_int,
    r: f64,
    a_x: f64,
    out_gain: *mut f64,
) -> HseStatus {
    guard(|| {
        out_arg(out_gain, "out_gain")?;
        let drive = if four_wheel_drive != 0 { "4WD" } else { "2WD" };
        let d = DesignPoint(vec![Value::Real(k), drive.into()]);
        let u = UseCasePoint(vec![Value::Real(r), Value::Real(a_x)]);
        let space = exemplars::yaw_space();
        space
            .validate_design(&d)
            .and_then(|_| space.validate_use_case(&u))
            .map_err(|e| Failure::new(HseStatus::InvalidArgument, e))?;
        let t = simulation(YawSimulator::default().evaluate(0, &d, &u))?;
        unsafe { *out_gain = t[0] };
        Ok(())
    })
}
