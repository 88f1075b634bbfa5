//! C ABI for the relflow toolkit.
//!
//! All entry points are `extern "C"`, operate on opaque handles, and report
//! failures through integer codes (see [`RelflowStatus`]). A thread-local
//! message describing the most recent error is available through
//! `relflow_last_error`; the pointer stays valid until the next failing call
//! on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use relflow::config::parse_config;
use relflow::constitutive::PressureLaw;
use relflow::relenergy::{build_trace, gronwall_monitor, ReferencePair};
use relflow::scenarios::{self, Scenario};
use relflow::solver1d::{self, EnergyLedger, Trajectory};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelflowStatus {
    RelflowOk = 0,
    /// A required pointer argument was null.
    RelflowNullPointer = 1,
    /// Invalid configuration or parameter (bad law exponent, unknown
    /// scenario, malformed UTF-8, undersized buffer).
    RelflowInvalidArgument = 2,
    /// The solver or a certification routine failed numerically.
    RelflowNumericalError = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(code: RelflowStatus, msg: String) -> RelflowStatus {
    set_error(msg);
    code
}

/// Message for the most recent error on this thread, or null if none.
/// The pointer is invalidated by the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn relflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null(), |c| c.as_ptr())
    })
}

/// Opaque barotropic pressure law p(rho) = a rho^gamma.
pub struct RelflowLaw {
    law: PressureLaw,
}

/// Opaque completed scenario run: trajectory, energy ledger, and the
/// ingredients needed for certification.
pub struct RelflowRun {
    scenario: Scenario,
    trajectory: Trajectory,
    ledger: EnergyLedger,
}

/// Creates a pressure law with coefficient `a > 0` and exponent
/// `gamma` in (1, 2]. On success writes the handle to `out`.
#[no_mangle]
pub extern "C" fn relflow_law_new(
    a: f64,
    gamma: f64,
    out: *mut *mut RelflowLaw,
) -> RelflowStatus {
    if out.is_null() {
        return fail(RelflowStatus::RelflowNullPointer, "out is null".into());
    }
    match PressureLaw::new(a, gamma) {
        Ok(law) => {
            unsafe { *out = Box::into_raw(Box::new(RelflowLaw { law })) };
            RelflowStatus::RelflowOk
        }
        Err(e) => fail(RelflowStatus::RelflowInvalidArgument, e.to_string()),
    }
}

/// Releases a law handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn relflow_law_free(law: *mut RelflowLaw) {
    if !law.is_null() {
        drop(unsafe { Box::from_raw(law) });
    }
}

/// Evaluates p(rho). `rho` must be nonnegative.
#[no_mangle]
pub extern "C" fn relflow_law_pressure(
    law: *const RelflowLaw,
    rho: f64,
    out: *mut f64,
) -> RelflowStatus {
    if law.is_null() || out.is_null() {
        return fail(RelflowStatus::RelflowNullPointer, "law or out is null".into());
    }
    match unsafe { &*law }.law.pressure(rho) {
        Ok(p) => {
            unsafe { *out = p };
            RelflowStatus::RelflowOk
        }
        Err(e) => fail(RelflowStatus::RelflowInvalidArgument, e.to_string()),
    }
}

/// Evaluates the Bregman pressure distance between `rho` and the reference
/// value `r > 0`; nonnegative, zero only at `rho == r`.
#[no_mangle]
pub extern "C" fn relflow_law_bregman(
    law: *const RelflowLaw,
    rho: f64,
    r: f64,
    out: *mut f64,
) -> RelflowStatus {
    if law.is_null() || out.is_null() {
        return fail(RelflowStatus::RelflowNullPointer, "law or out is null".into());
    }
    match unsafe { &*law }.law.bregman_pressure(rho, r) {
        Ok(b) => {
            unsafe { *out = b };
            RelflowStatus::RelflowOk
        }
        Err(e) => fail(RelflowStatus::RelflowInvalidArgument, e.to_string()),
    }
}

/// Runs a named scenario preset (`viscous-relaxation`, `equilibrium-vacuum`,
/// `compact-support`, `polynomial-decay`, `inflow-channel`) on `n_cells`
/// cells up to time `t_end` and returns the completed run.
#[no_mangle]
pub extern "C" fn relflow_run_scenario(
    name: *const c_char,
    n_cells: usize,
    t_end: f64,
    out: *mut *mut RelflowRun,
) -> RelflowStatus {
    if name.is_null() || out.is_null() {
        return fail(RelflowStatus::RelflowNullPointer, "name or out is null".into());
    }
    let name = match unsafe { CStr::from_ptr(name) }.to_str() {
        Ok(s) => s,
        Err(_) => {
            return fail(
                RelflowStatus::RelflowInvalidArgument,
                "scenario name is not valid UTF-8".into(),
            )
        }
    };
    let text = format!("scenario = {name}\nn_cells = {n_cells}\nt_end = {t_end}\n");
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return fail(RelflowStatus::RelflowInvalidArgument, e.to_string()),
    };
    let scenario = match scenarios::build(&cfg) {
        Ok(s) => s,
        Err(e) => return fail(RelflowStatus::RelflowInvalidArgument, e.to_string()),
    };
    let result = solver1d::run(
        &scenario.grid,
        scenario.initial.clone(),
        &scenario.bc,
        &scenario.law,
        scenario.nu,
        scenario.t_end,
        scenario.control,
    );
    match result {
        Ok((trajectory, ledger)) => {
            let run = RelflowRun { scenario, trajectory, ledger };
            unsafe { *out = Box::into_raw(Box::new(run)) };
            RelflowStatus::RelflowOk
        }
        Err(e) => fail(RelflowStatus::RelflowNumericalError, e.to_string()),
    }
}

/// Releases a run handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn relflow_run_free(run: *mut RelflowRun) {
    if !run.is_null() {
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Number of cells in the run's grid; 0 for a null handle.
#[no_mangle]
pub extern "C" fn relflow_run_n_cells(run: *const RelflowRun) -> usize {
    if run.is_null() {
        return 0;
    }
    unsafe { &*run }.scenario.grid.n_cells
}

/// Final simulated time; NaN for a null handle.
#[no_mangle]
pub extern "C" fn relflow_run_final_time(run: *const RelflowRun) -> f64 {
    if run.is_null() {
        return f64::NAN;
    }
    unsafe { &*run }.trajectory.final_state().t
}

/// Copies the final density field into `buf` (capacity `len`). Fails with
/// `RelflowInvalidArgument` if the buffer is smaller than the grid.
#[no_mangle]
pub extern "C" fn relflow_run_final_density(
    run: *const RelflowRun,
    buf: *mut f64,
    len: usize,
) -> RelflowStatus {
    if run.is_null() || buf.is_null() {
        return fail(RelflowStatus::RelflowNullPointer, "run or buf is null".into());
    }
    let rho = &unsafe { &*run }.trajectory.final_state().rho;
    if len < rho.len() {
        return fail(
            RelflowStatus::RelflowInvalidArgument,
            format!("buffer holds {len} values, need {}", rho.len()),
        );
    }
    unsafe { ptr::copy_nonoverlapping(rho.as_ptr(), buf, rho.len()) };
    RelflowStatus::RelflowOk
}

/// Total discrete energy at the end of the run; NaN for a null handle.
#[no_mangle]
pub extern "C" fn relflow_run_final_energy(run: *const RelflowRun) -> f64 {
    if run.is_null() {
        return f64::NAN;
    }
    *unsafe { &*run }.ledger.energy.last().unwrap_or(&f64::NAN)
}

/// Certifies the run against the scenario's built-in reference solution.
/// Writes 1 to `pass` when the relative-energy bound holds at every sample,
/// 0 otherwise, and the worst margin to `margin`.
#[no_mangle]
pub extern "C" fn relflow_run_certify(
    run: *const RelflowRun,
    pass: *mut i32,
    margin: *mut f64,
) -> RelflowStatus {
    if run.is_null() || pass.is_null() || margin.is_null() {
        return fail(
            RelflowStatus::RelflowNullPointer,
            "run, pass, or margin is null".into(),
        );
    }
    let run = unsafe { &*run };
    let reference: ReferencePair = run.scenario.static_reference();
    let trace = match build_trace(&run.trajectory, &reference, &run.scenario.law, run.scenario.nu)
    {
        Ok(t) => t,
        Err(e) => return fail(RelflowStatus::RelflowNumericalError, e.to_string()),
    };
    let cert = gronwall_monitor(&trace);
    unsafe {
        *pass = cert.pass as i32;
        *margin = cert.margin;
    }
    RelflowStatus::RelflowOk
}
