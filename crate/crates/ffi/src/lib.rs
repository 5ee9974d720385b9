//! C ABI over the prescriptor library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_from_*`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`PrescriptorStatus`]; on failure the message is available from
//! [`prescriptor_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use prescriptor::exact::solve_extensive;
use prescriptor::model::{build_scenario_tree, ProblemInstance};
use prescriptor::rng::{derive_seed, tags};
use prescriptor::sddp::{solve_sddp, SddpConfig};
use prescriptor::weights::WeightModels;
use prescriptor::Error;

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrescriptorStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Infeasible = 3,
    Unbounded = 4,
    ResourceLimit = 5,
    SolverFailure = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A validated problem instance with its fitted weight models.
pub struct PrescriptorInstance {
    instance: ProblemInstance,
    models: WeightModels,
    seed: u64,
}

/// Result of a solve.
pub struct PrescriptorSolution {
    objective: f64,
    lower_bound: f64,
    upper_bound: f64,
    first_stage: Vec<f64>,
    iterations: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PrescriptorStatus {
    match e {
        Error::Input(_) | Error::Json(_) | Error::Csv(_) => PrescriptorStatus::InvalidInput,
        Error::Infeasible { .. } => PrescriptorStatus::Infeasible,
        Error::Unbounded { .. } => PrescriptorStatus::Unbounded,
        Error::Resource { .. } => PrescriptorStatus::ResourceLimit,
        Error::Solver(_) => PrescriptorStatus::SolverFailure,
        Error::Io { .. } => PrescriptorStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (PrescriptorStatus, String)>) -> PrescriptorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PrescriptorStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PrescriptorStatus::Panic
        }
    }
}

fn lib(e: Error) -> (PrescriptorStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PrescriptorStatus, String) {
    (PrescriptorStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(
    p: *const c_char,
    what: &str,
) -> Result<&'a str, (PrescriptorStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        (
            PrescriptorStatus::InvalidInput,
            format!("{what} is not UTF-8"),
        )
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn prescriptor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn prescriptor_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an instance from JSON and fits its weight models with `seed`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_instance_from_json(
    json: *const c_char,
    seed: u64,
    out: *mut *mut PrescriptorInstance,
) -> PrescriptorStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let instance = ProblemInstance::from_json(text).map_err(lib)?;
        instance.check().map_err(lib)?;
        let models = instance
            .fit_weights(derive_seed(seed, &[tags::WEIGHTS]))
            .map_err(lib)?;
        *out = Box::into_raw(Box::new(PrescriptorInstance {
            instance,
            models,
            seed,
        }));
        Ok(())
    })
}

/// # Safety
/// `instance` must come from [`prescriptor_instance_from_json`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_instance_free(instance: *mut PrescriptorInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Number of stages minus one.
///
/// # Safety
/// `instance` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn prescriptor_instance_horizon(
    instance: *const PrescriptorInstance,
) -> usize {
    instance.as_ref().map_or(0, |i| i.instance.horizon())
}

/// # Safety
/// `instance` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn prescriptor_instance_samples(
    instance: *const PrescriptorInstance,
) -> usize {
    instance.as_ref().map_or(0, |i| i.instance.n_samples())
}

/// Stage-`stage` weights at covariate `x` (length `dim`) into `out` (capacity `cap`);
/// `len` receives the number of training samples.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_weights(
    instance: *const PrescriptorInstance,
    stage: usize,
    x: *const f64,
    dim: usize,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> PrescriptorStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        if (x.is_null() && dim > 0) || len.is_null() {
            return Err(null("x or len"));
        }
        let query = if dim == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(x, dim)
        };
        if stage == 0 || stage > inst.models.horizon() {
            return Err((
                PrescriptorStatus::InvalidInput,
                format!("stage {stage} outside 1..={}", inst.models.horizon()),
            ));
        }
        let w = inst.models.weights(stage, query).map_err(lib)?;
        *len = w.len();
        copy_out(w.as_slice(), out, cap)
    })
}

unsafe fn copy_out(
    src: &[f64],
    out: *mut f64,
    cap: usize,
) -> Result<(), (PrescriptorStatus, String)> {
    if cap < src.len() {
        return Err((
            PrescriptorStatus::BufferTooSmall,
            format!("need {} entries, have {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

/// Solves the extensive form on the weighted scenario tree.
///
/// # Safety
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solve_exact(
    instance: *const PrescriptorInstance,
    out: *mut *mut PrescriptorSolution,
) -> PrescriptorStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tree = build_scenario_tree(&inst.instance, &inst.models).map_err(lib)?;
        let sol = solve_extensive(&inst.instance, &tree).map_err(lib)?;
        *out = Box::into_raw(Box::new(PrescriptorSolution {
            objective: sol.objective,
            lower_bound: sol.objective,
            upper_bound: sol.objective,
            first_stage: sol.first_stage,
            iterations: 0,
        }));
        Ok(())
    })
}

/// Runs SDDP. `config_json` is an optional JSON object of solver settings
/// (`forward_samples`, `alpha`, `gap_tol`, `max_iter`, `cut_families`, ...); NULL uses defaults.
///
/// # Safety
/// `instance` must be a live handle, `config_json` NULL or NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solve_sddp(
    instance: *const PrescriptorInstance,
    config_json: *const c_char,
    out: *mut *mut PrescriptorSolution,
) -> PrescriptorStatus {
    guard(|| {
        let inst = instance.as_ref().ok_or_else(|| null("instance"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config: SddpConfig = if config_json.is_null() {
            SddpConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?).map_err(|e| lib(e.into()))?
        };
        config.seed = derive_seed(inst.seed, &[tags::SDDP_FORWARD]);
        let run = solve_sddp(&inst.instance, &inst.models, &config).map_err(lib)?;
        *out = Box::into_raw(Box::new(PrescriptorSolution {
            objective: run.lb,
            lower_bound: run.lb,
            upper_bound: run.ub,
            first_stage: run.first_stage,
            iterations: run.iterations,
        }));
        Ok(())
    })
}

/// # Safety
/// `solution` must come from a solve call and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solution_free(solution: *mut PrescriptorSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Objective (SDDP: final lower bound). NaN for NULL.
///
/// # Safety
/// `solution` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solution_objective(
    solution: *const PrescriptorSolution,
) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.objective)
}

/// # Safety
/// `solution` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solution_bounds(
    solution: *const PrescriptorSolution,
    lower: *mut f64,
    upper: *mut f64,
) -> PrescriptorStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if lower.is_null() || upper.is_null() {
            return Err(null("lower or upper"));
        }
        *lower = s.lower_bound;
        *upper = s.upper_bound;
        Ok(())
    })
}

/// SDDP iterations run; 0 for exact solves or NULL.
///
/// # Safety
/// `solution` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solution_iterations(
    solution: *const PrescriptorSolution,
) -> usize {
    solution.as_ref().map_or(0, |s| s.iterations)
}

/// Copies the stage-0 decision into `out` (capacity `cap`); `len` receives its length.
/// Call with `cap = 0` to query the length.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn prescriptor_solution_first_stage(
    solution: *const PrescriptorSolution,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> PrescriptorStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        *len = s.first_stage.len();
        copy_out(&s.first_stage, out, cap)
    })
}
