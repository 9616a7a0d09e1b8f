//! C interface to `fourwire`.
//!
//! Networks and solutions are opaque handles owned by the caller and
//! released with their `_free` function. Every fallible call returns an
//! [`FwStatus`]; on failure [`fw_last_error`] describes the problem for the
//! calling thread. Strings returned by the library are released with
//! [`fw_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fourwire::config::RunOptions;
use fourwire::form::Form;
use fourwire::netmodel::{json, validate_network, Network};
use fourwire::reduce::Model;
use fourwire::solve::{run_opf, run_pf, SolutionReport, Status};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed network or options document.
    Parse = 3,
    /// The network is well formed but cannot be modelled or reduced.
    InvalidNetwork = 4,
    /// The solver could not run (for example a singular Jacobian).
    SolveFailed = 5,
    /// No such item (fixture, bus terminal).
    NotFound = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Outcome reported by a finished solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwSolveStatus {
    Optimal = 0,
    Infeasible = 1,
    IterationLimit = 2,
    NumericalFailure = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwForm {
    Ivr = 0,
    Acr = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwModel {
    FourWire = 0,
    Kron = 1,
    Balanced = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwProblem {
    PowerFlow = 0,
    OptimalPowerFlow = 1,
}

/// Opaque network handle.
pub struct FwNetwork(Network);

/// Opaque solution handle.
pub struct FwSolution(SolutionReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn guard(f: impl FnOnce() -> Result<(), (FwStatus, String)>) -> FwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FwStatus::Ok,
        Ok(Err((code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            FwStatus::Internal
        }
    }
}

fn fail<T>(code: FwStatus, msg: impl ToString) -> Result<T, (FwStatus, String)> {
    Err((code, msg.to_string()))
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, (FwStatus, String)> {
    if p.is_null() {
        return fail(FwStatus::NullPointer, "null string argument");
    }
    CStr::from_ptr(p).to_str().or_else(|e| fail(FwStatus::InvalidUtf8, e))
}

unsafe fn reference<'a, T>(p: *const T) -> Result<&'a T, (FwStatus, String)> {
    p.as_ref().map_or_else(|| fail(FwStatus::NullPointer, "null handle"), Ok)
}

fn out_ptr<T>(p: *mut T) -> Result<(), (FwStatus, String)> {
    if p.is_null() {
        return fail(FwStatus::NullPointer, "null output pointer");
    }
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

impl From<FwForm> for Form {
    fn from(f: FwForm) -> Self {
        match f {
            FwForm::Ivr => Form::Ivr,
            FwForm::Acr => Form::Acr,
        }
    }
}

impl From<FwModel> for Model {
    fn from(m: FwModel) -> Self {
        match m {
            FwModel::FourWire => Model::FourWire,
            FwModel::Kron => Model::Kron,
            FwModel::Balanced => Model::Balanced,
        }
    }
}

impl From<Status> for FwSolveStatus {
    fn from(s: Status) -> Self {
        match s {
            Status::Optimal => FwSolveStatus::Optimal,
            Status::Infeasible => FwSolveStatus::Infeasible,
            Status::IterationLimit => FwSolveStatus::IterationLimit,
            Status::NumericalFailure => FwSolveStatus::NumericalFailure,
        }
    }
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn fw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse a network from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_network_from_json(json: *const c_char, out: *mut *mut FwNetwork) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        let net = json::from_str(text(json)?).or_else(|e| fail(FwStatus::Parse, e))?;
        *out = Box::into_raw(Box::new(FwNetwork(net)));
        Ok(())
    })
}

/// Load one of the bundled test networks by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_network_fixture(name: *const c_char, out: *mut *mut FwNetwork) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        let name = text(name)?;
        let net = fourwire::fixtures::by_name(name).map_or_else(|| fail(FwStatus::NotFound, format!("no fixture `{name}`")), Ok)?;
        *out = Box::into_raw(Box::new(FwNetwork(net)));
        Ok(())
    })
}

/// Serialize a network to JSON. Free the result with [`fw_string_free`].
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_network_to_json(net: *const FwNetwork, out: *mut *mut c_char) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        let s = json::to_string(&reference(net)?.0).or_else(|e| fail(FwStatus::InvalidNetwork, e))?;
        *out = into_c_string(s);
        Ok(())
    })
}

/// Number of validation findings; zero means the network is valid. The
/// findings themselves are joined, one per line, in [`fw_last_error`].
///
/// # Safety
/// `net` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_network_validate(net: *const FwNetwork, count: *mut usize) -> FwStatus {
    guard(|| {
        out_ptr(count)?;
        let diags = validate_network(&reference(net)?.0);
        *count = diags.len();
        set_error(diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"));
        Ok(())
    })
}

/// The network as seen by a reduced model, as a new handle.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_network_reduce(net: *const FwNetwork, model: FwModel, out: *mut *mut FwNetwork) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        let reduced = Model::from(model).apply(&reference(net)?.0).or_else(|e| fail(FwStatus::InvalidNetwork, e))?;
        *out = Box::into_raw(Box::new(FwNetwork(reduced)));
        Ok(())
    })
}

/// Release a network handle. Null is ignored.
///
/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fw_network_free(net: *mut FwNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Solve a power flow or OPF. `options_json` may be null for defaults;
/// otherwise it holds `solver`, `formulation` and `start` sections as in
/// the CLI options file. A finished solve returns `Ok` whatever its
/// [`FwSolveStatus`].
///
/// # Safety
/// `net` must be a live handle, `options_json` null or NUL-terminated, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_solve(
    net: *const FwNetwork,
    problem: FwProblem,
    form: FwForm,
    model: FwModel,
    options_json: *const c_char,
    out: *mut *mut FwSolution,
) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        let net = &reference(net)?.0;
        let opts = if options_json.is_null() {
            RunOptions::default()
        } else {
            RunOptions::from_json(text(options_json)?).or_else(|e| fail(FwStatus::Parse, e))?
        };
        let reduced = Model::from(model).apply(net).or_else(|e| fail(FwStatus::InvalidNetwork, e))?;
        let run = match problem {
            FwProblem::PowerFlow => run_pf,
            FwProblem::OptimalPowerFlow => run_opf,
        };
        let (f, sol) = run(&reduced, form.into(), &opts.formulation, &opts.solver, opts.start).or_else(|e| fail(FwStatus::SolveFailed, e))?;
        *out = Box::into_raw(Box::new(FwSolution(SolutionReport::new(&f, &sol))));
        Ok(())
    })
}

/// Release a solution handle. Null is ignored.
///
/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fw_solution_free(sol: *mut FwSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_solution_status(sol: *const FwSolution, out: *mut FwSolveStatus) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        *out = reference(sol)?.0.status.into();
        Ok(())
    })
}

/// Per-unit objective and solver iterations.
///
/// # Safety
/// `sol` must be a live handle; `objective` and `iterations` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fw_solution_summary(sol: *const FwSolution, objective: *mut f64, iterations: *mut usize) -> FwStatus {
    guard(|| {
        out_ptr(objective)?;
        out_ptr(iterations)?;
        let r = &reference(sol)?.0;
        *objective = r.objective;
        *iterations = r.iterations;
        Ok(())
    })
}

/// Voltage phasor of one bus terminal in volts.
///
/// # Safety
/// `sol` must be a live handle, `bus` and `terminal` NUL-terminated, and
/// `re` and `im` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn fw_solution_voltage(
    sol: *const FwSolution,
    bus: *const c_char,
    terminal: *const c_char,
    re: *mut f64,
    im: *mut f64,
) -> FwStatus {
    guard(|| {
        out_ptr(re)?;
        out_ptr(im)?;
        let key = format!("{}.{}", text(bus)?, text(terminal)?);
        let v = reference(sol)?.0.voltages.get(&key).copied();
        let v = v.map_or_else(|| fail(FwStatus::NotFound, format!("no terminal `{key}` in the solution")), Ok)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// The full solution report as JSON. Free the result with
/// [`fw_string_free`].
///
/// # Safety
/// `sol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_solution_to_json(sol: *const FwSolution, out: *mut *mut c_char) -> FwStatus {
    guard(|| {
        out_ptr(out)?;
        let s = serde_json::to_string(&reference(sol)?.0).or_else(|e| fail(FwStatus::Internal, e))?;
        *out = into_c_string(s);
        Ok(())
    })
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
