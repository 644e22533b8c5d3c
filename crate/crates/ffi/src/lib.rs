//! C ABI for the storefleet library: opaque handles for fleets and
//! signals, status-code error reporting, and flat structs for run
//! summaries. The generated header lives at `include/storefleet.h`.
//!
//! Conventions:
//! - every fallible call returns an [`SfStatus`]; outputs are written
//!   through caller-supplied pointers only on `Ok`;
//! - on any failure the thread-local message behind [`sf_last_error`] is
//!   set; the pointer stays valid until the next failing call on the same
//!   thread;
//! - handles from `sf_*_new` must be released with the matching
//!   `sf_*_free`; passing them after free is undefined behavior.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use storefleet::model::{validate_fleet, validate_state, Fleet, FleetState, StepSignal, Store};
use storefleet::oracle::{min_unserved, OracleError};
use storefleet::policies::PolicyKind;
use storefleet::sim::{simulate, SimConfig, SimError};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument failed validation; see `sf_last_error`.
    InvalidArgument = 2,
    /// The fleet definition is inconsistent; see `sf_last_error`.
    InvalidFleet = 3,
    /// The policy cannot run on this instance (for example, mixed
    /// efficiencies under the combined policy).
    PolicyError = 4,
    /// The computation failed at runtime; see `sf_last_error`.
    RuntimeError = 5,
    /// A bug: an internal panic was caught at the boundary.
    InternalPanic = 6,
}

/// Dispatch policies selectable through the flat ABI. Priority orders
/// take their permutation through `sf_simulate_priority` instead.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfPolicy {
    /// Greedy greatest-discharge-duration-first.
    Ggddf = 0,
    /// Greedy greatest-charge-duration-first (absorbs surplus).
    Ggcdf = 1,
    /// Ggddf on demand, Ggcdf on surplus.
    Combined = 2,
    /// Offline time-reversed plan; needs the whole signal upfront.
    ReverseGgddf = 3,
}

/// One store definition for `sf_fleet_new`.
#[repr(C)]
pub struct SfStoreSpec {
    /// UTF-8 store name; null picks "s1", "s2", ... by position.
    pub id: *const c_char,
    pub capacity_mwh: f64,
    pub max_discharge_mw: f64,
    pub max_charge_mw: f64,
    /// Round-trip efficiency in (0, 1].
    pub efficiency: f64,
}

/// Flat run summary written by the simulate calls.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfRunSummary {
    pub total_unserved_mwh: f64,
    pub total_spilled_mwh: f64,
    /// Meaningful only when `has_failure` is true.
    pub first_failure_time_h: f64,
    pub has_failure: bool,
}

/// Opaque fleet handle.
pub struct SfFleet(Fleet);

/// Opaque demand-signal handle.
pub struct SfSignal(StepSignal);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg);
}

/// Message describing the most recent failure on this thread. Never null;
/// empty before the first failure. Valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

fn guarded(f: impl FnOnce() -> SfStatus) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic; this is a bug in storefleet-ffi");
            SfStatus::InternalPanic
        }
    }
}

fn sim_status(e: &SimError) -> SfStatus {
    match e {
        SimError::Policy(_) => SfStatus::PolicyError,
        SimError::EventOverflow(_) => SfStatus::RuntimeError,
        _ => SfStatus::InvalidArgument,
    }
}

fn oracle_status(e: &OracleError) -> SfStatus {
    match e {
        OracleError::BadInstance(_) => SfStatus::InvalidArgument,
        _ => SfStatus::RuntimeError,
    }
}

/// Builds a fleet from `count` specs. On success writes a handle to
/// `out`; release it with `sf_fleet_free`.
///
/// # Safety
/// `specs` must point to `count` valid specs; `out` must be a valid
/// pointer; spec ids must be null or nul-terminated UTF-8.
#[no_mangle]
pub unsafe extern "C" fn sf_fleet_new(
    specs: *const SfStoreSpec,
    count: usize,
    out: *mut *mut SfFleet,
) -> SfStatus {
    guarded(|| {
        if out.is_null() || (specs.is_null() && count > 0) {
            set_error("sf_fleet_new: null pointer");
            return SfStatus::NullPointer;
        }
        let specs = if count == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(specs, count)
        };
        let mut stores = Vec::with_capacity(count);
        for (i, spec) in specs.iter().enumerate() {
            let id = if spec.id.is_null() {
                format!("s{}", i + 1)
            } else {
                match CStr::from_ptr(spec.id).to_str() {
                    Ok(s) => s.to_owned(),
                    Err(_) => {
                        set_error(&format!("store {} id is not valid UTF-8", i + 1));
                        return SfStatus::InvalidArgument;
                    }
                }
            };
            stores.push(Store {
                id,
                capacity: spec.capacity_mwh,
                max_discharge: spec.max_discharge_mw,
                max_charge: spec.max_charge_mw,
                efficiency: spec.efficiency,
            });
        }
        let fleet = Fleet::new(stores);
        let violations = validate_fleet(&fleet);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
            set_error(&msgs.join("; "));
            return SfStatus::InvalidFleet;
        }
        *out = Box::into_raw(Box::new(SfFleet(fleet)));
        SfStatus::Ok
    })
}

/// Number of stores behind a fleet handle; 0 for null.
///
/// # Safety
/// `fleet` must be null or a live handle from `sf_fleet_new`.
#[no_mangle]
pub unsafe extern "C" fn sf_fleet_len(fleet: *const SfFleet) -> usize {
    if fleet.is_null() {
        0
    } else {
        (*fleet).0.len()
    }
}

/// Releases a fleet handle; null is a no-op.
///
/// # Safety
/// `fleet` must be null or a live handle from `sf_fleet_new`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sf_fleet_free(fleet: *mut SfFleet) {
    if !fleet.is_null() {
        drop(Box::from_raw(fleet));
    }
}

/// Builds a piecewise-constant demand signal from `count` breakpoints
/// (strictly increasing, hours) and `count - 1` values (MW). On success
/// writes a handle to `out`; release it with `sf_signal_free`.
///
/// # Safety
/// `breakpoints` must point to `count` doubles, `values` to `count - 1`
/// doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sf_signal_new(
    breakpoints: *const f64,
    count: usize,
    values: *const f64,
    out: *mut *mut SfSignal,
) -> SfStatus {
    guarded(|| {
        if out.is_null() || breakpoints.is_null() || (values.is_null() && count > 1) {
            set_error("sf_signal_new: null pointer");
            return SfStatus::NullPointer;
        }
        if count < 2 {
            set_error("a signal needs at least two breakpoints");
            return SfStatus::InvalidArgument;
        }
        let breakpoints = std::slice::from_raw_parts(breakpoints, count).to_vec();
        let values = std::slice::from_raw_parts(values, count - 1).to_vec();
        match StepSignal::new(breakpoints, values) {
            Ok(signal) => {
                *out = Box::into_raw(Box::new(SfSignal(signal)));
                SfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                SfStatus::InvalidArgument
            }
        }
    })
}

/// Releases a signal handle; null is a no-op.
///
/// # Safety
/// `signal` must be null or a live handle from `sf_signal_new`, not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn sf_signal_free(signal: *mut SfSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

unsafe fn initial_state(
    fleet: &Fleet,
    energies: *const f64,
    start: f64,
) -> Result<FleetState, SfStatus> {
    let state = if energies.is_null() {
        let mut s = fleet.full_state();
        s.time = start;
        s
    } else {
        let e = std::slice::from_raw_parts(energies, fleet.len()).to_vec();
        FleetState::new(start, e)
    };
    let violations = validate_state(fleet, &state, storefleet::DEFAULT_EPS);
    if violations.is_empty() {
        Ok(state)
    } else {
        let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
        set_error(&msgs.join("; "));
        Err(SfStatus::InvalidArgument)
    }
}

unsafe fn simulate_impl(
    fleet: *const SfFleet,
    initial_energies: *const f64,
    signal: *const SfSignal,
    policy: PolicyKind,
    final_energies: *mut f64,
    summary: *mut SfRunSummary,
) -> SfStatus {
    if fleet.is_null() || signal.is_null() || summary.is_null() {
        set_error("sf_simulate: null pointer");
        return SfStatus::NullPointer;
    }
    let fleet = &(*fleet).0;
    let signal = &(*signal).0;
    let state = match initial_state(fleet, initial_energies, signal.start()) {
        Ok(s) => s,
        Err(status) => return status,
    };
    match simulate(fleet, &state, signal, &policy, &SimConfig::default()) {
        Ok(report) => {
            *summary = SfRunSummary {
                total_unserved_mwh: report.total_unserved,
                total_spilled_mwh: report.total_spilled,
                first_failure_time_h: report.first_failure_time.unwrap_or(0.0),
                has_failure: report.first_failure_time.is_some(),
            };
            if !final_energies.is_null() {
                let out = std::slice::from_raw_parts_mut(final_energies, fleet.len());
                out.copy_from_slice(&report.final_state.energies);
            }
            SfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            sim_status(&e)
        }
    }
}

/// Runs a dispatch policy over the whole signal.
///
/// `initial_energies`: per-store starting energies (MWh), or null to
/// start full. `final_energies`: buffer of `sf_fleet_len` doubles for the
/// end state, or null to skip it.
///
/// # Safety
/// `fleet`, `signal` must be live handles; `summary` must be valid;
/// non-null `initial_energies`/`final_energies` must hold
/// `sf_fleet_len(fleet)` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_simulate(
    fleet: *const SfFleet,
    initial_energies: *const f64,
    signal: *const SfSignal,
    policy: SfPolicy,
    final_energies: *mut f64,
    summary: *mut SfRunSummary,
) -> SfStatus {
    guarded(|| {
        let policy = match policy {
            SfPolicy::Ggddf => PolicyKind::Ggddf,
            SfPolicy::Ggcdf => PolicyKind::Ggcdf,
            SfPolicy::Combined => PolicyKind::Combined,
            SfPolicy::ReverseGgddf => PolicyKind::ReverseGgddf,
        };
        simulate_impl(
            fleet,
            initial_energies,
            signal,
            policy,
            final_energies,
            summary,
        )
    })
}

/// Runs the priority-order policy: serve demand store-by-store in the
/// order given by `order`, a permutation of `0..sf_fleet_len(fleet)`.
///
/// # Safety
/// As for `sf_simulate`; additionally `order` must hold `order_len`
/// indexes.
#[no_mangle]
pub unsafe extern "C" fn sf_simulate_priority(
    fleet: *const SfFleet,
    initial_energies: *const f64,
    signal: *const SfSignal,
    order: *const usize,
    order_len: usize,
    final_energies: *mut f64,
    summary: *mut SfRunSummary,
) -> SfStatus {
    guarded(|| {
        if order.is_null() {
            set_error("sf_simulate_priority: null order");
            return SfStatus::NullPointer;
        }
        let order = std::slice::from_raw_parts(order, order_len).to_vec();
        simulate_impl(
            fleet,
            initial_energies,
            signal,
            PolicyKind::PriorityGreedy(order),
            final_energies,
            summary,
        )
    })
}

/// Least unserved energy (MWh) any dispatch can achieve, from the grid
/// oracle. `cross_charging` permits store-to-store transfers.
///
/// # Safety
/// `fleet`, `signal` must be live handles; `out` must be valid; non-null
/// `initial_energies` must hold `sf_fleet_len(fleet)` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_min_unserved(
    fleet: *const SfFleet,
    initial_energies: *const f64,
    signal: *const SfSignal,
    cross_charging: bool,
    out: *mut f64,
) -> SfStatus {
    guarded(|| {
        if fleet.is_null() || signal.is_null() || out.is_null() {
            set_error("sf_min_unserved: null pointer");
            return SfStatus::NullPointer;
        }
        let fleet = &(*fleet).0;
        let signal = &(*signal).0;
        let state = match initial_state(fleet, initial_energies, signal.start()) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match min_unserved(fleet, &state, signal, cross_charging) {
            Ok(v) => {
                *out = v;
                SfStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                oracle_status(&e)
            }
        }
    })
}
