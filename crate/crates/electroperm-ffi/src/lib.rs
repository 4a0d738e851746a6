//! C ABI for the electroperm simulator.
//!
//! Conventions: every constructor returns a status code and writes an opaque
//! handle through an out-pointer; handles are freed with the matching
//! `*_free` function; array accessors return borrowed pointers valid until
//! the owning handle is freed. On failure [`ep_last_error_message`] retrieves
//! a thread-local description. Status codes mirror the CLI exit codes.

#![allow(clippy::missing_safety_doc)] // the crate doc states the handle and pointer contract

use electroperm::config::{Config, ConfigError};
use electroperm::fem::{assemble, FemError, SaddleSystem};
use electroperm::mesh::{generate_mesh, import_mesh, write_mesh, MeshError, MeshGeometry};
use electroperm::sim::{run_trajectory, SimError, TrajectoryRecord};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Operation status. Values match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpStatus {
    Ok = 0,
    Geometry = 2,
    Solver = 3,
    Numerics = 4,
    Data = 5,
    Usage = 64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = msg.into());
}

fn fail(status: EpStatus, msg: impl Into<String>) -> EpStatus {
    set_error(msg);
    status
}

fn mesh_error(e: MeshError) -> EpStatus {
    fail(EpStatus::Geometry, e.to_string())
}

fn fem_error(e: FemError) -> EpStatus {
    let status = match e {
        FemError::BadParams(_) | FemError::BadGeometry(_) => EpStatus::Usage,
        _ => EpStatus::Solver,
    };
    fail(status, e.to_string())
}

fn sim_error(e: SimError) -> EpStatus {
    let status = match &e {
        SimError::NonFinite { .. } | SimError::PorosityOutOfBox { .. } => EpStatus::Numerics,
        SimError::Fem(f) => match f {
            FemError::BadParams(_) | FemError::BadGeometry(_) => EpStatus::Usage,
            _ => EpStatus::Solver,
        },
        SimError::BadData(_) => EpStatus::Data,
        SimError::Noise(_) | SimError::BadConfig(_) => EpStatus::Usage,
    };
    fail(status, e.to_string())
}

fn config_error(e: ConfigError) -> EpStatus {
    fail(EpStatus::Usage, e.to_string())
}

/// Run configuration handle.
pub struct EpConfig(Config);
/// Mesh handle.
pub struct EpMesh(MeshGeometry);
/// Factorized saddle-point system handle.
pub struct EpSystem(SaddleSystem);
/// Completed-trajectory handle.
pub struct EpTrajectory(TrajectoryRecord);

unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, EpStatus> {
    if ptr.is_null() {
        return Err(fail(EpStatus::Usage, format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(EpStatus::Usage, format!("{what} is not valid UTF-8")))
}

fn guarded(f: impl FnOnce() -> EpStatus) -> EpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(EpStatus::Numerics, "internal panic"),
    }
}

/// Copy the last error message for this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn ep_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Create a configuration with the built-in defaults.
#[no_mangle]
pub unsafe extern "C" fn ep_config_default(out: *mut *mut EpConfig) -> EpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EpStatus::Usage, "out pointer is null");
        }
        unsafe { *out = Box::into_raw(Box::new(EpConfig(Config::default()))) };
        EpStatus::Ok
    })
}

/// Load a configuration file.
#[no_mangle]
pub unsafe extern "C" fn ep_config_load(path: *const c_char, out: *mut *mut EpConfig) -> EpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EpStatus::Usage, "out pointer is null");
        }
        let path = match unsafe { cstr(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match Config::from_file(Path::new(path)) {
            Ok(c) => {
                unsafe { *out = Box::into_raw(Box::new(EpConfig(c))) };
                EpStatus::Ok
            }
            Err(e) => config_error(e),
        }
    })
}

/// Override one `section.key` with a textual value.
#[no_mangle]
pub unsafe extern "C" fn ep_config_set(
    config: *mut EpConfig,
    key: *const c_char,
    value: *const c_char,
) -> EpStatus {
    guarded(|| {
        let Some(config) = (unsafe { config.as_mut() }) else {
            return fail(EpStatus::Usage, "config handle is null");
        };
        let (key, value) = match unsafe { (cstr(key, "key"), cstr(value, "value")) } {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match config.0.set(key, value) {
            Ok(()) => EpStatus::Ok,
            Err(e) => config_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ep_config_free(config: *mut EpConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Generate the boundary-fitted mesh described by the configuration.
#[no_mangle]
pub unsafe extern "C" fn ep_mesh_generate(
    config: *const EpConfig,
    out: *mut *mut EpMesh,
) -> EpStatus {
    guarded(|| {
        let Some(config) = (unsafe { config.as_ref() }) else {
            return fail(EpStatus::Usage, "config handle is null");
        };
        if out.is_null() {
            return fail(EpStatus::Usage, "out pointer is null");
        }
        let spec = match config.0.geometry() {
            Ok(s) => s,
            Err(e) => return config_error(e),
        };
        match generate_mesh(&spec) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(EpMesh(m))) };
                EpStatus::Ok
            }
            Err(e) => mesh_error(e),
        }
    })
}

/// Import and validate a mesh file.
#[no_mangle]
pub unsafe extern "C" fn ep_mesh_import(path: *const c_char, out: *mut *mut EpMesh) -> EpStatus {
    guarded(|| {
        if out.is_null() {
            return fail(EpStatus::Usage, "out pointer is null");
        }
        let path = match unsafe { cstr(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match import_mesh(Path::new(path)) {
            Ok(m) => {
                unsafe { *out = Box::into_raw(Box::new(EpMesh(m))) };
                EpStatus::Ok
            }
            Err(e) => mesh_error(e),
        }
    })
}

/// Write a mesh in the plain-text format.
#[no_mangle]
pub unsafe extern "C" fn ep_mesh_write(mesh: *const EpMesh, path: *const c_char) -> EpStatus {
    guarded(|| {
        let Some(mesh) = (unsafe { mesh.as_ref() }) else {
            return fail(EpStatus::Usage, "mesh handle is null");
        };
        let path = match unsafe { cstr(path, "path") } {
            Ok(p) => p,
            Err(s) => return s,
        };
        match std::fs::write(path, write_mesh(&mesh.0)) {
            Ok(()) => EpStatus::Ok,
            Err(e) => fail(EpStatus::Data, format!("cannot write {path}: {e}")),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ep_mesh_vertex_count(mesh: *const EpMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.vertices.len())
}

#[no_mangle]
pub unsafe extern "C" fn ep_mesh_triangle_count(mesh: *const EpMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.triangles.len())
}

#[no_mangle]
pub unsafe extern "C" fn ep_mesh_interface_node_count(mesh: *const EpMesh) -> usize {
    unsafe { mesh.as_ref() }.map_or(0, |m| m.0.dof_map.n_trace)
}

/// Total length of the interface polygon.
#[no_mangle]
pub unsafe extern "C" fn ep_mesh_interface_measure(mesh: *const EpMesh) -> f64 {
    unsafe { mesh.as_ref() }.map_or(f64::NAN, |m| m.0.interface_measure())
}

#[no_mangle]
pub unsafe extern "C" fn ep_mesh_free(mesh: *mut EpMesh) {
    if !mesh.is_null() {
        drop(unsafe { Box::from_raw(mesh) });
    }
}

/// Assemble and factorize the saddle-point system for the configured physics
/// on the given mesh.
#[no_mangle]
pub unsafe extern "C" fn ep_system_assemble(
    config: *const EpConfig,
    mesh: *const EpMesh,
    out: *mut *mut EpSystem,
) -> EpStatus {
    guarded(|| {
        let (Some(config), Some(mesh)) = (unsafe { config.as_ref() }, unsafe { mesh.as_ref() })
        else {
            return fail(EpStatus::Usage, "config or mesh handle is null");
        };
        if out.is_null() {
            return fail(EpStatus::Usage, "out pointer is null");
        }
        let physics = match config.0.physics() {
            Ok(p) => p,
            Err(e) => return config_error(e),
        };
        match assemble(&mesh.0, &physics) {
            Ok(s) => {
                unsafe { *out = Box::into_raw(Box::new(EpSystem(s))) };
                EpStatus::Ok
            }
            Err(e) => fem_error(e),
        }
    })
}

/// Solve the transmission problem for a prescribed jump (length
/// `ep_mesh_interface_node_count`, trace ordering) and field strength `g`,
/// writing the membrane current into `i_m_out` (same length).
#[no_mangle]
pub unsafe extern "C" fn ep_system_solve_potential(
    system: *const EpSystem,
    v: *const f64,
    len: usize,
    g: f64,
    i_m_out: *mut f64,
) -> EpStatus {
    guarded(|| {
        let Some(system) = (unsafe { system.as_ref() }) else {
            return fail(EpStatus::Usage, "system handle is null");
        };
        if v.is_null() || i_m_out.is_null() {
            return fail(EpStatus::Usage, "array pointer is null");
        }
        if len != system.0.n_trace {
            return fail(
                EpStatus::Usage,
                format!(
                    "jump has {len} entries, trace space has {}",
                    system.0.n_trace
                ),
            );
        }
        let jump = unsafe { std::slice::from_raw_parts(v, len) };
        match system.0.solve_potential(jump, g) {
            Ok(sol) => {
                unsafe {
                    std::ptr::copy_nonoverlapping(sol.i_m.as_ptr(), i_m_out, len);
                }
                EpStatus::Ok
            }
            Err(e) => fem_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn ep_system_free(system: *mut EpSystem) {
    if !system.is_null() {
        drop(unsafe { Box::from_raw(system) });
    }
}

/// Run one trajectory of the configured model. The mesh and system must come
/// from the same configuration.
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_run(
    config: *const EpConfig,
    mesh: *const EpMesh,
    system: *const EpSystem,
    trajectory_id: u32,
    out: *mut *mut EpTrajectory,
) -> EpStatus {
    guarded(|| {
        let (Some(config), Some(mesh), Some(system)) = (
            unsafe { config.as_ref() },
            unsafe { mesh.as_ref() },
            unsafe { system.as_ref() },
        ) else {
            return fail(EpStatus::Usage, "config, mesh or system handle is null");
        };
        if out.is_null() {
            return fail(EpStatus::Usage, "out pointer is null");
        }
        let sim_config = match config.0.sim_config() {
            Ok(c) => c,
            Err(e) => return config_error(e),
        };
        match run_trajectory(&sim_config, &mesh.0, &system.0, trajectory_id as usize) {
            Ok(rec) => {
                unsafe { *out = Box::into_raw(Box::new(EpTrajectory(rec))) };
                EpStatus::Ok
            }
            Err(e) => sim_error(e),
        }
    })
}

/// Number of recorded steps (including the initial state).
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_len(trajectory: *const EpTrajectory) -> usize {
    unsafe { trajectory.as_ref() }.map_or(0, |t| t.0.times.len())
}

#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_times(trajectory: *const EpTrajectory) -> *const f64 {
    unsafe { trajectory.as_ref() }.map_or(std::ptr::null(), |t| t.0.times.as_ptr())
}

/// Squared interface norm of the jump per step.
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_norm_v_sq(trajectory: *const EpTrajectory) -> *const f64 {
    unsafe { trajectory.as_ref() }.map_or(std::ptr::null(), |t| t.0.norm_v_sq.as_ptr())
}

/// Squared interface norm of the porosity per step.
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_norm_w_sq(trajectory: *const EpTrajectory) -> *const f64 {
    unsafe { trajectory.as_ref() }.map_or(std::ptr::null(), |t| t.0.norm_w_sq.as_ptr())
}

/// Number of recorded angles.
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_angle_count(trajectory: *const EpTrajectory) -> usize {
    unsafe { trajectory.as_ref() }.map_or(0, |t| t.0.angles.len())
}

/// Jump series at one recorded angle; `ep_trajectory_len` entries.
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_v_at(
    trajectory: *const EpTrajectory,
    angle_index: usize,
) -> *const f64 {
    unsafe { trajectory.as_ref() }
        .and_then(|t| t.0.v_at.get(angle_index))
        .map_or(std::ptr::null(), |s| s.as_ptr())
}

/// Porosity series at one recorded angle; `ep_trajectory_len` entries.
#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_w_at(
    trajectory: *const EpTrajectory,
    angle_index: usize,
) -> *const f64 {
    unsafe { trajectory.as_ref() }
        .and_then(|t| t.0.w_at.get(angle_index))
        .map_or(std::ptr::null(), |s| s.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn ep_trajectory_free(trajectory: *mut EpTrajectory) {
    if !trajectory.is_null() {
        drop(unsafe { Box::from_raw(trajectory) });
    }
}
