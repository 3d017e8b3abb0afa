//! C ABI over the tsch-cluster model.
//!
//! Every fallible function returns a [`TcStatus`] and writes its result
//! through an out-pointer. Handles are opaque and owned by the caller once
//! returned; release them with the matching `*_free` function. When a call
//! fails, [`tc_last_error`] describes why until the next call on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tsch_cluster::explorer::{
    check_formation, explore_bounded, max_states_from_env, shortest_witness, sweep_initial_configs, FailureClass,
    Verdict,
};
use tsch_cluster::scalability::lower_bound_slots;
use tsch_cluster::scenario::{self, check_channels, InitialSpec, Scenario};
use tsch_cluster::simulator::{run_init, InitChannels, RunOptions, RunResult};
use tsch_cluster::{trace, Channel, Error, Variant};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    NotFound = 4,
    BudgetExceeded = 5,
    NoWitness = 6,
    Overflow = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcVariant {
    WithAcks = 0,
    NoAcks = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcVerdict {
    Holds = 0,
    Fails = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcFailureClass {
    None = 0,
    AckCollision = 1,
    AssociateCollision = 2,
    NarrowBridge = 3,
    Other = 4,
}

/// Outcome of a formation check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcVerifyResult {
    pub verdict: TcVerdict,
    pub failure_class: TcFailureClass,
    pub states: u64,
    /// Slots of the shortest forming execution, or -1 when none exists.
    pub witness_slots: i64,
}

/// A parsed scenario with any overrides applied.
pub struct TcScenario {
    inner: Scenario,
}

/// A finished simulation run.
pub struct TcRun {
    scenario: Scenario,
    result: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: TcStatus, msg: impl Into<String>) -> TcStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> TcStatus {
    let status = match e {
        Error::Budget { .. } => TcStatus::BudgetExceeded,
        Error::WitnessAbsent => TcStatus::NoWitness,
        _ => TcStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> TcStatus) -> TcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(TcStatus::Panic, "internal panic"))
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, TcStatus> {
    if p.is_null() {
        return Err(fail(TcStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TcStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn emit_scenario(sc: Scenario, out: *mut *mut TcScenario) -> TcStatus {
    unsafe { *out = Box::into_raw(Box::new(TcScenario { inner: sc })) };
    TcStatus::Ok
}

macro_rules! try_tc {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(TcStatus::NullPointer, concat!("`", stringify!($p), "` is null"));
        })+
    };
}

/// Message for the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn tc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a built-in scenario by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_scenario_builtin(name: *const c_char, out: *mut *mut TcScenario) -> TcStatus {
    guard(|| {
        non_null!(out);
        let name = try_tc!(read_str(name));
        match scenario::builtin(name) {
            Some(sc) => emit_scenario(sc, out),
            None => fail(TcStatus::NotFound, format!("no built-in scenario {name:?}")),
        }
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_scenario_parse(toml: *const c_char, out: *mut *mut TcScenario) -> TcStatus {
    guard(|| {
        non_null!(out);
        let text = try_tc!(read_str(toml));
        match scenario::parse_scenario(text) {
            Ok(sc) => emit_scenario(sc, out),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sc` must be NULL or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tc_scenario_free(sc: *mut TcScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn tc_scenario_node_count(sc: *const TcScenario) -> u32 {
    sc.as_ref().map_or(0, |s| s.inner.cfg.max_id)
}

/// # Safety
/// `sc` must be a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn tc_scenario_set_variant(sc: *mut TcScenario, variant: TcVariant) -> TcStatus {
    guard(|| {
        non_null!(sc);
        (*sc).inner.cfg.variant = match variant {
            TcVariant::WithAcks => Variant::WithAcks,
            TcVariant::NoAcks => Variant::NoAcks,
        };
        TcStatus::Ok
    })
}

/// Fixes the initial channels of nodes 2..=n (`len` must be n - 1).
///
/// # Safety
/// `sc` must be a live scenario handle and `channels` must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn tc_scenario_set_channels(sc: *mut TcScenario, channels: *const u32, len: usize) -> TcStatus {
    guard(|| {
        non_null!(sc);
        if len > 0 {
            non_null!(channels);
        }
        let list: &[u32] = if len == 0 { &[] } else { std::slice::from_raw_parts(channels, len) };
        let chans: Vec<Channel> = std::iter::once(1).chain(list.iter().copied()).map(Channel).collect();
        let s = &mut (*sc).inner;
        if let Err(e) = check_channels(&s.name, &chans, &s.cfg) {
            return from_error(e);
        }
        s.initial = InitialSpec::Fixed(chans);
        TcStatus::Ok
    })
}

fn class_code(c: Option<FailureClass>) -> TcFailureClass {
    match c {
        None => TcFailureClass::None,
        Some(FailureClass::AckCollision) => TcFailureClass::AckCollision,
        Some(FailureClass::AssociateCollision) => TcFailureClass::AssociateCollision,
        Some(FailureClass::NarrowBridge) => TcFailureClass::NarrowBridge,
        Some(FailureClass::Other) => TcFailureClass::Other,
    }
}

fn verdict_code(v: &Verdict) -> TcVerdict {
    match v {
        Verdict::Holds => TcVerdict::Holds,
        Verdict::FailsWithLasso(_) => TcVerdict::Fails,
        Verdict::Inconclusive { .. } => TcVerdict::Inconclusive,
    }
}

/// Explores every execution from the scenario's fixed initial channels.
/// A `depth` of 0 uses the scenario's own depth bound.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_verify(sc: *const TcScenario, depth: usize, out: *mut TcVerifyResult) -> TcStatus {
    guard(|| {
        non_null!(sc, out);
        let s = &(*sc).inner;
        let InitialSpec::Fixed(chans) = &s.initial else {
            return fail(TcStatus::InvalidInput, "scenario has no fixed initial channels");
        };
        let depth = if depth == 0 { s.analysis.depth } else { depth };
        let g = match explore_bounded(&s.topology, chans, &s.cfg, depth, max_states_from_env()) {
            Ok(g) => g,
            Err(e) => return from_error(e),
        };
        let v = check_formation(&g);
        *out = TcVerifyResult {
            verdict: verdict_code(&v),
            failure_class: class_code(v.failure_class()),
            states: g.state_count() as u64,
            witness_slots: shortest_witness(&g).map_or(-1, |w| w.len() as i64),
        };
        TcStatus::Ok
    })
}

/// Shortest forming execution over every initial configuration where formation is inevitable.
///
/// # Safety
/// `sc` must be a live scenario handle and `out_slots` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_sweep_min_witness(sc: *const TcScenario, depth: usize, out_slots: *mut u64) -> TcStatus {
    guard(|| {
        non_null!(sc, out_slots);
        let s = &(*sc).inner;
        let depth = if depth == 0 { s.analysis.depth } else { depth };
        let sweep = match sweep_initial_configs(&s.topology, &s.cfg, depth) {
            Ok(sw) => sw,
            Err(e) => return from_error(e),
        };
        match sweep.min_witness() {
            Some((w, _)) => {
                *out_slots = w as u64;
                TcStatus::Ok
            }
            None => fail(TcStatus::NoWitness, "no configuration both always forms and has a witness"),
        }
    })
}

/// Runs one seeded simulation. Scenarios without fixed channels draw them from the seed.
///
/// # Safety
/// `sc` must be a live scenario handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_simulate(
    sc: *const TcScenario,
    seed: u64,
    slot_bound: u64,
    out: *mut *mut TcRun,
) -> TcStatus {
    guard(|| {
        non_null!(sc, out);
        let s = &(*sc).inner;
        let init = match &s.initial {
            InitialSpec::Fixed(c) => InitChannels::Fixed(c.clone()),
            _ => InitChannels::Random,
        };
        match run_init(&s.topology, &init, &s.cfg, seed, slot_bound, &RunOptions::default()) {
            Ok(result) => {
                *out = Box::into_raw(Box::new(TcRun {
                    scenario: s.clone(),
                    result,
                }));
                TcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must be NULL or a handle from [`tc_simulate`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tc_run_free(run: *mut TcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn tc_run_formed(run: *const TcRun) -> bool {
    run.as_ref().is_some_and(|r| r.result.formed)
}

/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn tc_run_slots(run: *const TcRun) -> u64 {
    run.as_ref().map_or(0, |r| r.result.slots_used)
}

/// # Safety
/// `run` must be a live run handle.
#[no_mangle]
pub unsafe extern "C" fn tc_run_milliseconds(run: *const TcRun) -> u64 {
    run.as_ref().map_or(0, |r| r.result.milliseconds)
}

/// Renders the run as a replayable trace; free the string with [`tc_string_free`].
///
/// # Safety
/// `run` must be a live run handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_run_trace(run: *const TcRun, out: *mut *mut c_char) -> TcStatus {
    guard(|| {
        non_null!(run, out);
        let r = &*run;
        let text = match trace::record(&r.scenario.topology, &r.scenario.cfg, &r.result.init_channels, &r.result.resolutions) {
            Ok((t, _)) => t.to_text(),
            Err(e) => return from_error(e),
        };
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                TcStatus::Ok
            }
            Err(_) => fail(TcStatus::InvalidInput, "trace contains NUL"),
        }
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn tc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Closed-form lower bound on reserved slots for a balanced binary tree of height `h`.
///
/// # Safety
/// `out_slots` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn tc_lower_bound_slots(h: u32, out_slots: *mut u64) -> TcStatus {
    guard(|| {
        non_null!(out_slots);
        match lower_bound_slots(h) {
            Ok(v) => match u64::try_from(&v).ok() {
                Some(n) => {
                    *out_slots = n;
                    TcStatus::Ok
                }
                None => fail(TcStatus::Overflow, format!("bound for height {h} exceeds 64 bits")),
            },
            Err(e) => from_error(e),
        }
    })
}
