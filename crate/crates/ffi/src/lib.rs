//! C interface to the `tonelli` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_solve`
//! and released by the matching `*_free`. Every fallible call returns a
//! [`TonelliStatus`]; on failure a message is available from
//! [`tonelli_last_error_message`] on the same thread. Arrays are passed as
//! pointer plus length and are never retained.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::Vector3;
use tonelli::config::Config;
use tonelli::integrability::{weak_integrability_verdict, IntegralFamily, VerdictOptions};
use tonelli::lie::{conservation_summary, integrate_rigid_body, InertiaOperator, RigidBodyState};
use tonelli::weakkam::{alpha_table, energy_level_check, solve_weak_kam, DiscreteActionParams, WeakKamResult};
use tonelli::{catalog, flow, CohomologyClass, PhasePoint, TonelliSystem};

/// Result of every fallible call; the numbering matches the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TonelliStatus {
    Ok = 0,
    /// Invalid configuration or arguments.
    Config = 2,
    /// A computation failed (non-convergence, blow-up, leaving the domain).
    Numerical = 3,
    /// A required pointer was NULL or a length did not match.
    InvalidArgument = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Opaque Tonelli Hamiltonian.
pub struct TonelliSystemHandle(TonelliSystem);

/// Opaque weak-KAM solution.
pub struct TonelliWeakKamHandle(WeakKamResult);

/// Discrete action parameters: time step, velocity truncation, nodes per axis.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct TonelliGridParams {
    pub h: f64,
    pub vmax: f64,
    pub n: usize,
}

/// Largest relative drifts of a rigid-body trajectory.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct TonelliConservation {
    pub energy_drift: f64,
    pub casimir_drift: f64,
    pub spatial_momentum_drift: f64,
    pub orthogonality_defect: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Failure {
    Lib(tonelli::Error),
    Argument(String),
}

impl From<tonelli::Error> for Failure {
    fn from(e: tonelli::Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = Result<T, Failure>;

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> TonelliStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TonelliStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            let status = if e.is_config() {
                TonelliStatus::Config
            } else {
                TonelliStatus::Numerical
            };
            set_last_error(e.to_string());
            status
        }
        Ok(Err(Failure::Argument(m))) => {
            set_last_error(m);
            TonelliStatus::InvalidArgument
        }
        Err(_) => {
            set_last_error("internal panic".into());
            TonelliStatus::Panic
        }
    }
}

fn arg(name: &str, msg: &str) -> Failure {
    Failure::Argument(format!("{name}: {msg}"))
}

unsafe fn text<'a>(name: &str, s: *const c_char) -> FfiResult<&'a str> {
    if s.is_null() {
        return Err(arg(name, "NULL string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| arg(name, "not UTF-8"))
}

unsafe fn slice<'a, T>(name: &str, p: *const T, len: usize) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(arg(name, "NULL array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(name: &str, p: *mut T, len: usize) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(arg(name, "NULL array"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(name: &str, p: *const T) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| arg(name, "NULL handle"))
}

unsafe fn out<'a, T>(name: &str, p: *mut T) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| arg(name, "NULL output"))
}

fn params_of(p: &TonelliGridParams) -> FfiResult<DiscreteActionParams> {
    let params = DiscreteActionParams::new(p.h, p.vmax, p.n);
    params.validate()?;
    Ok(params)
}

fn copy_into(name: &str, src: &[f64], dst: &mut [f64]) -> FfiResult<()> {
    if src.len() != dst.len() {
        return Err(arg(name, &format!("expected length {}, got {}", src.len(), dst.len())));
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tonelli_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Catalog system `free` (dim 1 or 2), `pendulum` (dim 1) or `mech2d` (dim 2, coupling `eps`).
///
/// # Safety
/// `id` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tonelli_system_new(
    id: *const c_char,
    dim: usize,
    eps: f64,
    out_system: *mut *mut TonelliSystemHandle,
) -> TonelliStatus {
    guard(|| {
        let slot = out("out_system", out_system)?;
        let sys = catalog::system(text("id", id)?, dim, eps)?;
        *slot = Box::into_raw(Box::new(TonelliSystemHandle(sys)));
        Ok(())
    })
}

/// System described by configuration text (`system = ...`, `dim`, `mass`, `terms`, ...).
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tonelli_system_from_config(
    config: *const c_char,
    out_system: *mut *mut TonelliSystemHandle,
) -> TonelliStatus {
    guard(|| {
        let slot = out("out_system", out_system)?;
        let sys = Config::parse_str(text("config", config)?)?.system()?;
        *slot = Box::into_raw(Box::new(TonelliSystemHandle(sys)));
        Ok(())
    })
}

/// Releases a system; NULL is ignored.
///
/// # Safety
/// `system` must come from `tonelli_system_new`/`_from_config` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tonelli_system_free(system: *mut TonelliSystemHandle) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Torus dimension, or 0 for NULL.
///
/// # Safety
/// `system` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tonelli_system_dim(system: *const TonelliSystemHandle) -> usize {
    system.as_ref().map_or(0, |s| s.0.dim())
}

/// H(x, p); `x` and `p` have `dim` entries.
///
/// # Safety
/// Pointers must be valid for `dim` reads and one write.
#[no_mangle]
pub unsafe extern "C" fn tonelli_energy(
    system: *const TonelliSystemHandle,
    x: *const f64,
    p: *const f64,
    out_value: *mut f64,
) -> TonelliStatus {
    guard(|| {
        let sys = &handle("system", system)?.0;
        let n = sys.dim();
        let v = sys.energy_at(slice("x", x, n)?, slice("p", p, n)?);
        *out("out_value", out_value)? = v;
        Ok(())
    })
}

/// {f, g}(x, p) for catalog observable names (`H`, `p1`, `sin1`, `kinetic`, ...).
///
/// # Safety
/// Strings NUL-terminated; arrays valid for `dim` reads.
#[no_mangle]
pub unsafe extern "C" fn tonelli_poisson_bracket(
    system: *const TonelliSystemHandle,
    f: *const c_char,
    g: *const c_char,
    x: *const f64,
    p: *const f64,
    out_value: *mut f64,
) -> TonelliStatus {
    guard(|| {
        let sys = &handle("system", system)?.0;
        let n = sys.dim();
        let f = catalog::observable(text("f", f)?, sys)?;
        let g = catalog::observable(text("g", g)?, sys)?;
        let z = PhasePoint::new(slice("x", x, n)?.to_vec(), slice("p", p, n)?.to_vec());
        *out("out_value", out_value)? = tonelli::system::poisson_bracket(&f, &g, &z)?;
        Ok(())
    })
}

/// Flows (x, p) in place along the Hamiltonian vector field of observable `f` for time `t`.
///
/// # Safety
/// Strings NUL-terminated; `x` and `p` valid for `dim` reads and writes.
#[no_mangle]
pub unsafe extern "C" fn tonelli_flow(
    system: *const TonelliSystemHandle,
    f: *const c_char,
    x: *mut f64,
    p: *mut f64,
    t: f64,
    dt: f64,
) -> TonelliStatus {
    guard(|| {
        let sys = &handle("system", system)?.0;
        let n = sys.dim();
        let f = catalog::observable(text("f", f)?, sys)?;
        let xs = slice_mut("x", x, n)?;
        let ps = slice_mut("p", p, n)?;
        let end = flow::flow_endpoint(&f, &PhasePoint::new(xs.to_vec(), ps.to_vec()), t, dt)?;
        xs.copy_from_slice(end.x());
        ps.copy_from_slice(end.p());
        Ok(())
    })
}

/// Solves the discrete weak-KAM problem in class `c` (`dim` entries).
///
/// # Safety
/// `c` valid for `dim` reads; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_solve(
    system: *const TonelliSystemHandle,
    c: *const f64,
    params: TonelliGridParams,
    out_result: *mut *mut TonelliWeakKamHandle,
) -> TonelliStatus {
    guard(|| {
        let slot = out("out_result", out_result)?;
        let sys = &handle("system", system)?.0;
        let class = CohomologyClass::new(slice("c", c, sys.dim())?.to_vec())?;
        let wk = solve_weak_kam(sys, &class, &params_of(&params)?, &Default::default())?;
        *slot = Box::into_raw(Box::new(TonelliWeakKamHandle(wk)));
        Ok(())
    })
}

/// Releases a solution; NULL is ignored.
///
/// # Safety
/// `result` must come from `tonelli_weak_kam_solve` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_free(result: *mut TonelliWeakKamHandle) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// α(c), or NaN for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_alpha(result: *const TonelliWeakKamHandle) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.alpha)
}

/// Whether value iteration met its tolerance; false for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_converged(result: *const TonelliWeakKamHandle) -> bool {
    result.as_ref().is_some_and(|r| r.0.converged)
}

/// Number of grid nodes (Nᵈ), or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_node_count(result: *const TonelliWeakKamHandle) -> usize {
    result.as_ref().map_or(0, |r| r.0.u.len())
}

/// Copies the critical subsolution u (row-major over nodes); `len` must equal the node count.
///
/// # Safety
/// `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_values(
    result: *const TonelliWeakKamHandle,
    buf: *mut f64,
    len: usize,
) -> TonelliStatus {
    guard(|| {
        let r = &handle("result", result)?.0;
        copy_into("buf", r.u.values(), slice_mut("buf", buf, len)?)
    })
}

/// Copies the Aubry indicator (zero on the estimated Aubry set); `len` must equal the node count.
///
/// # Safety
/// `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_indicator(
    result: *const TonelliWeakKamHandle,
    buf: *mut f64,
    len: usize,
) -> TonelliStatus {
    guard(|| {
        let r = &handle("result", result)?.0;
        copy_into("buf", r.indicator.values(), slice_mut("buf", buf, len)?)
    })
}

/// Number of nodes in the estimated projected Aubry set, or 0 for NULL.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_aubry_count(result: *const TonelliWeakKamHandle) -> usize {
    result.as_ref().map_or(0, |r| r.0.aubry_nodes.len())
}

/// Copies the Aubry node indices; `len` must equal the Aubry count.
///
/// # Safety
/// `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_aubry_nodes(
    result: *const TonelliWeakKamHandle,
    buf: *mut usize,
    len: usize,
) -> TonelliStatus {
    guard(|| {
        let r = &handle("result", result)?.0;
        let dst = slice_mut("buf", buf, len)?;
        if dst.len() != r.aubry_nodes.len() {
            return Err(arg("buf", &format!("expected length {}", r.aubry_nodes.len())));
        }
        dst.copy_from_slice(&r.aubry_nodes);
        Ok(())
    })
}

/// Copies the rotation vector; `len` must equal the dimension.
///
/// # Safety
/// `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_rotation_vector(
    result: *const TonelliWeakKamHandle,
    buf: *mut f64,
    len: usize,
) -> TonelliStatus {
    guard(|| {
        let r = &handle("result", result)?.0;
        copy_into("buf", &r.rotation_vector, slice_mut("buf", buf, len)?)
    })
}

/// max over Aubry nodes of |H(x, c + du(x)) − α|.
///
/// # Safety
/// Handles live; `out_value` valid.
#[no_mangle]
pub unsafe extern "C" fn tonelli_weak_kam_energy_defect(
    system: *const TonelliSystemHandle,
    result: *const TonelliWeakKamHandle,
    out_value: *mut f64,
) -> TonelliStatus {
    guard(|| {
        let sys = &handle("system", system)?.0;
        let r = &handle("result", result)?.0;
        *out("out_value", out_value)? = energy_level_check(sys, r);
        Ok(())
    })
}

/// α at `count` classes stored consecutively in `classes` (`count·dim` entries).
///
/// # Safety
/// `classes` valid for `count·dim` reads, `out_alpha` for `count` writes.
#[no_mangle]
pub unsafe extern "C" fn tonelli_alpha_table(
    system: *const TonelliSystemHandle,
    classes: *const f64,
    count: usize,
    params: TonelliGridParams,
    out_alpha: *mut f64,
) -> TonelliStatus {
    guard(|| {
        let sys = &handle("system", system)?.0;
        let d = sys.dim();
        let grid = slice("classes", classes, count * d)?
            .chunks(d)
            .map(|c| CohomologyClass::new(c.to_vec()))
            .collect::<tonelli::Result<Vec<_>>>()?;
        let table = alpha_table(sys, &grid, &params_of(&params)?, &Default::default())?;
        let dst = slice_mut("out_alpha", out_alpha, count)?;
        for (o, r) in dst.iter_mut().zip(&table.rows) {
            *o = r.alpha;
        }
        Ok(())
    })
}

/// Weak-integrability verdict for the comma-separated `integrals` over `count` classes.
/// `out_passed` receives the verdict; the status reports only errors.
///
/// # Safety
/// `integrals` NUL-terminated; `classes` valid for `count·dim` reads.
#[no_mangle]
pub unsafe extern "C" fn tonelli_check(
    system: *const TonelliSystemHandle,
    integrals: *const c_char,
    classes: *const f64,
    count: usize,
    params: TonelliGridParams,
    seed: u64,
    out_passed: *mut bool,
) -> TonelliStatus {
    guard(|| {
        let slot = out("out_passed", out_passed)?;
        let sys = &handle("system", system)?.0;
        let d = sys.dim();
        let fam = IntegralFamily::parse(text("integrals", integrals)?, sys)?;
        let grid = slice("classes", classes, count * d)?
            .chunks(d)
            .map(|c| CohomologyClass::new(c.to_vec()))
            .collect::<tonelli::Result<Vec<_>>>()?;
        let opts = VerdictOptions {
            seed,
            ..Default::default()
        };
        let report = weak_integrability_verdict(sys, &fam, &grid, &params_of(&params)?, &opts)?;
        *slot = report.passed();
        Ok(())
    })
}

/// Integrates the free rigid body with principal moments `inertia` from body momentum
/// `p0` and axis-angle attitude `attitude` (three entries each). Writes the conservation
/// summary and, when `final_body_momentum` is not NULL, the final body momentum.
///
/// # Safety
/// Input arrays valid for 3 reads; outputs valid or NULL where allowed.
#[no_mangle]
pub unsafe extern "C" fn tonelli_rigid_body(
    inertia: *const f64,
    p0: *const f64,
    attitude: *const f64,
    t: f64,
    dt: f64,
    out_summary: *mut TonelliConservation,
    final_body_momentum: *mut f64,
) -> TonelliStatus {
    guard(|| {
        let summary_slot = out("out_summary", out_summary)?;
        let i = slice("inertia", inertia, 3)?;
        let a = InertiaOperator::new([i[0], i[1], i[2]])?;
        let p = Vector3::from_column_slice(slice("p0", p0, 3)?);
        let r = Vector3::from_column_slice(slice("attitude", attitude, 3)?);
        let traj = integrate_rigid_body(&a, &RigidBodyState::from_axis_angle(r, p), t, dt)?;
        let s = conservation_summary(&a, &traj);
        *summary_slot = TonelliConservation {
            energy_drift: s.energy_drift,
            casimir_drift: s.casimir_drift,
            spatial_momentum_drift: s.spatial_momentum_drift,
            orthogonality_defect: s.orthogonality_defect,
        };
        if !final_body_momentum.is_null() {
            let last = traj.states.last().expect("trajectory is never empty");
            slice_mut("final_body_momentum", final_body_momentum, 3)?.copy_from_slice(last.body_momentum.as_slice());
        }
        Ok(())
    })
}
