//! C ABI over the simulator: opaque simulation handles, a single-vehicle
//! kinematic step and the Dubins path length.
//!
//! Every fallible call returns a [`HavStatus`]; on failure the message is kept
//! per thread and can be copied out with [`hav_last_error_message`]. Panics
//! never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hav_swarm::dubins::DubinsPath;
use hav_swarm::scenario::Scenario;
use hav_swarm::sim::{Classification, SimParams, Simulation};
use hav_swarm::{Action, Error, HavConfig, HavState, Pose};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HavStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Generation = 4,
    SafetyViolation = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HavOutcome {
    Running = -1,
    Success = 0,
    Deadlock = 1,
    Livelock = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HavPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl From<Pose> for HavPose {
    fn from(p: Pose) -> Self {
        Self { x: p.x, y: p.y, heading: p.heading }
    }
}

impl From<HavPose> for Pose {
    fn from(p: HavPose) -> Self {
        Pose::new(p.x, p.y, p.heading)
    }
}

/// Opaque simulation handle.
pub struct HavSimulation {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: HavStatus, msg: impl Into<String>) -> HavStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> HavStatus {
    let status = match &e {
        Error::InvalidConfig(_) | Error::InvalidAction(_) | Error::TrailerCountMismatch { .. } => HavStatus::InvalidArgument,
        Error::ShapeMismatch { .. } | Error::InvalidParameter(_) => HavStatus::InvalidArgument,
        Error::Config(_) => HavStatus::Config,
        Error::Generation(_) => HavStatus::Generation,
        Error::SafetyViolation { .. } => HavStatus::SafetyViolation,
        Error::Io(_) => HavStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> HavStatus) -> HavStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == HavStatus::Ok {
                set_error(String::new());
            }
            s
        }
        Err(_) => fail(HavStatus::Panic, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, HavStatus> {
    if p.is_null() {
        return Err(fail(HavStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HavStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn read_params(p: *const c_char) -> Result<SimParams, HavStatus> {
    if p.is_null() {
        return Ok(SimParams::default());
    }
    SimParams::from_toml(read_str(p, "params")?).map_err(from_error)
}

fn outcome_code(sim: &Simulation) -> HavOutcome {
    match sim.outcome().map(|o| o.classification) {
        None => HavOutcome::Running,
        Some(Classification::Success) => HavOutcome::Success,
        Some(Classification::Deadlock) => HavOutcome::Deadlock,
        Some(Classification::Livelock) => HavOutcome::Livelock,
    }
}

fn finish_create(scenario: Scenario, params: SimParams, out: *mut *mut HavSimulation) -> HavStatus {
    match Simulation::new(&scenario, params) {
        Ok(sim) => {
            unsafe { *out = Box::into_raw(Box::new(HavSimulation { sim })) };
            HavStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hav_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static NUL-terminated library version.
#[no_mangle]
pub extern "C" fn hav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Generates a random scenario and creates a simulation for it. `params_toml`
/// may be null for default parameters.
///
/// # Safety
/// `params_toml` must be null or a NUL-terminated string; `out` must be valid
/// for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_generate(
    seed: u64,
    hav_count: usize,
    density: f64,
    params_toml: *const c_char,
    out: *mut *mut HavSimulation,
) -> HavStatus {
    guard(|| {
        if out.is_null() {
            return fail(HavStatus::NullPointer, "out is null");
        }
        let params = match read_params(params_toml) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::generate(seed, hav_count, density) {
            Ok(s) => finish_create(s, params, out),
            Err(e) => from_error(e),
        }
    })
}

/// Creates a simulation from a scenario document.
///
/// # Safety
/// `scenario_toml` must be a NUL-terminated string, `params_toml` null or a
/// NUL-terminated string, and `out` valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_from_toml(
    scenario_toml: *const c_char,
    params_toml: *const c_char,
    out: *mut *mut HavSimulation,
) -> HavStatus {
    guard(|| {
        if out.is_null() {
            return fail(HavStatus::NullPointer, "out is null");
        }
        let text = match read_str(scenario_toml, "scenario") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let params = match read_params(params_toml) {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Scenario::from_toml(text) {
            Ok(s) => finish_create(s, params, out),
            Err(e) => from_error(e),
        }
    })
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_free(sim: *mut HavSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

unsafe fn with_sim<'a>(sim: *mut HavSimulation) -> Result<&'a mut Simulation, HavStatus> {
    sim.as_mut().map(|h| &mut h.sim).ok_or_else(|| fail(HavStatus::NullPointer, "simulation is null"))
}

/// Advances one synchronous step and reports the outcome so far.
///
/// # Safety
/// `sim` must be a live handle; `outcome` null or writable.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_step(sim: *mut HavSimulation, outcome: *mut HavOutcome) -> HavStatus {
    guard(|| {
        let sim = match with_sim(sim) {
            Ok(s) => s,
            Err(s) => return s,
        };
        if let Err(e) = sim.step() {
            return from_error(e);
        }
        if !outcome.is_null() {
            *outcome = outcome_code(sim);
        }
        HavStatus::Ok
    })
}

/// Runs to termination.
///
/// # Safety
/// `sim` must be a live handle; `outcome` null or writable.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_run(sim: *mut HavSimulation, outcome: *mut HavOutcome) -> HavStatus {
    guard(|| {
        let sim = match with_sim(sim) {
            Ok(s) => s,
            Err(s) => return s,
        };
        if let Err(e) = sim.run() {
            return from_error(e);
        }
        if !outcome.is_null() {
            *outcome = outcome_code(sim);
        }
        HavStatus::Ok
    })
}

/// Number of vehicles; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_vehicle_count(sim: *const HavSimulation) -> usize {
    sim.as_ref().map_or(0, |h| h.sim.agents().len())
}

/// Steps taken so far; 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_time_step(sim: *const HavSimulation) -> u64 {
    sim.as_ref().map_or(0, |h| h.sim.time_step())
}

/// Truck rear-axle pose of vehicle `index`.
///
/// # Safety
/// `sim` must be a live handle and `pose` writable.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_pose(sim: *const HavSimulation, index: usize, pose: *mut HavPose) -> HavStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else { return fail(HavStatus::NullPointer, "simulation is null") };
        if pose.is_null() {
            return fail(HavStatus::NullPointer, "pose is null");
        }
        match h.sim.agents().get(index) {
            Some(a) => {
                *pose = a.state.pose().into();
                HavStatus::Ok
            }
            None => fail(HavStatus::InvalidArgument, format!("vehicle index {index} out of range")),
        }
    })
}

/// Writes the articulation angles of vehicle `index` into `buf`. `len` always
/// receives the trailer count; a short buffer gives `BufferTooSmall`.
///
/// # Safety
/// `sim` must be a live handle, `buf` null or valid for `cap` doubles, and
/// `len` writable.
#[no_mangle]
pub unsafe extern "C" fn hav_simulation_articulation(
    sim: *const HavSimulation,
    index: usize,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> HavStatus {
    guard(|| {
        let Some(h) = sim.as_ref() else { return fail(HavStatus::NullPointer, "simulation is null") };
        if len.is_null() {
            return fail(HavStatus::NullPointer, "len is null");
        }
        let Some(a) = h.sim.agents().get(index) else {
            return fail(HavStatus::InvalidArgument, format!("vehicle index {index} out of range"));
        };
        let n = a.config.trailer_count();
        *len = n;
        if buf.is_null() || cap < n {
            return fail(HavStatus::BufferTooSmall, format!("need {n} entries"));
        }
        for (k, d) in a.state.articulation_angles().enumerate() {
            *buf.add(k) = d;
        }
        HavStatus::Ok
    })
}

/// One explicit Euler step of a truck with `trailer_count` trailers. `pose`
/// and `trailer_headings` are updated in place.
///
/// # Safety
/// `trailer_wheelbases` and `trailer_headings` must each hold `trailer_count`
/// doubles; `pose` must be valid for reads and writes.
#[no_mangle]
pub unsafe extern "C" fn hav_kinematic_step(
    truck_wheelbase: f64,
    trailer_wheelbases: *const f64,
    trailer_count: usize,
    pose: *mut HavPose,
    trailer_headings: *mut f64,
    speed: f64,
    steer: f64,
    dt: f64,
) -> HavStatus {
    guard(|| {
        if pose.is_null() || (trailer_count > 0 && (trailer_wheelbases.is_null() || trailer_headings.is_null())) {
            return fail(HavStatus::NullPointer, "null argument");
        }
        let lengths = if trailer_count == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(trailer_wheelbases, trailer_count).to_vec()
        };
        let config = HavConfig::new(truck_wheelbase, lengths);
        if let Err(e) = config.validate() {
            return from_error(e);
        }
        let headings = std::slice::from_raw_parts_mut(trailer_headings, trailer_count);
        let p = *pose;
        let state = HavState {
            position: Pose::from(p).position(),
            truck_heading: p.heading,
            trailer_headings: headings.to_vec(),
        };
        match state.step(&config, Action::new(speed, steer), dt) {
            Ok(next) => {
                *pose = next.pose().into();
                headings.copy_from_slice(&next.trailer_headings);
                HavStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Length of the shortest path with turning radius `radius`.
///
/// # Safety
/// `length` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hav_dubins_length(start: HavPose, goal: HavPose, radius: f64, length: *mut f64) -> HavStatus {
    guard(|| {
        if length.is_null() {
            return fail(HavStatus::NullPointer, "length is null");
        }
        let finite = [start.x, start.y, start.heading, goal.x, goal.y, goal.heading].iter().all(|v| v.is_finite());
        if !(radius > 0.0 && radius.is_finite()) || !finite {
            return fail(HavStatus::InvalidArgument, "radius must be positive and poses finite");
        }
        *length = DubinsPath::plan(start.into(), goal.into(), radius).length();
        HavStatus::Ok
    })
}
