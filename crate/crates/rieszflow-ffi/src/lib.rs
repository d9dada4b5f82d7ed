//! C ABI over `rieszflow`.
//!
//! Objects live behind opaque handles that the caller releases with the
//! matching `rf_*_free`. Every fallible call returns an [`RfStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`rf_last_error`]. Panics are caught at the boundary and reported as
//! `RF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use rieszflow::cache::{obtain_operator, OperatorCache};
use rieszflow::energy;
use rieszflow::evolve::{self, EvolveConfig, RunStatus};
use rieszflow::steady::{self, SolverConfig, Stationarity, SteadyReport};
use rieszflow::{Error, ModelParams, ProfileKind, RadialDensity, RadialGrid, RieszOperator};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parameter = 3,
    Domain = 4,
    Regime = 5,
    Truncation = 6,
    GridMismatch = 7,
    Build = 8,
    Config = 9,
    Stability = 10,
    Numerical = 11,
    Io = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

impl From<&Error> for RfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Parameter { .. } => RfStatus::Parameter,
            Error::Domain(_) => RfStatus::Domain,
            Error::Regime(_) => RfStatus::Regime,
            Error::Truncation(_) => RfStatus::Truncation,
            Error::GridMismatch(_) => RfStatus::GridMismatch,
            Error::Build(_) => RfStatus::Build,
            Error::Config(_) => RfStatus::Config,
            Error::Stability(_) => RfStatus::Stability,
            Error::Numerical(_) => RfStatus::Numerical,
            Error::Io(_) => RfStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfProfile {
    Indicator = 0,
    Gaussian = 1,
    Bump = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStationarity {
    Minimizer = 0,
    SaddleWrtDilations = 1,
    Extremal = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfRunStatus {
    Completed = 0,
    ReachedSteady = 1,
    BlowupSuspected = 2,
    StepLimit = 3,
}

/// Exponents derived from a parameter set.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RfExponents {
    pub p_conj: f64,
    pub p_star: f64,
    pub m_c: f64,
    pub theta0: f64,
}

/// Energy terms of a density. Fields without a value are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RfEnergy {
    pub norm_m_m: f64,
    pub interaction: f64,
    pub free_energy: f64,
    pub hls_quotient: f64,
    pub lambda_star: f64,
    pub lambda_value: f64,
    pub kappa: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfSolverConfig {
    pub tau: f64,
    pub max_iters: usize,
    pub fp_tol: f64,
    pub bisect_tol: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfEvolveConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub steady_tol: f64,
    pub max_steps: usize,
    /// Fixed time step; zero or negative selects the adaptive step.
    pub fixed_dt: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfSteadySummary {
    pub stationarity: RfStationarity,
    pub converged: bool,
    pub edge_supported: bool,
    pub monotone: bool,
    pub iterations: usize,
    pub el_residual: f64,
    pub multiplier: f64,
    pub identity_defect: f64,
    pub support_radius: f64,
    pub mass: f64,
    pub energy: RfEnergy,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfRunSummary {
    pub status: RfRunStatus,
    pub converged: bool,
    pub steps: usize,
    pub t_final: f64,
    pub mass_drift: f64,
    pub energy_violations: usize,
}

pub struct RfParams(ModelParams);
pub struct RfGrid(Arc<RadialGrid>);
pub struct RfOperator(RieszOperator);
pub struct RfDensity(RadialDensity);
pub struct RfSteady(SteadyReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(RfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(RfStatus::from(&e), e.to_string())
    }
}

type Res<T> = Result<T, Fail>;

fn guard<F: FnOnce() -> Res<()>>(f: F) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RfStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(&format!("panic: {msg}"));
            RfStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Res<&'a T> {
    p.as_ref()
        .ok_or_else(|| Fail(RfStatus::NullPointer, format!("{name} is null")))
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Res<()> {
    if out.is_null() {
        return Err(Fail(RfStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn write<T>(out: *mut T, v: T) -> Res<()> {
    if out.is_null() {
        return Err(Fail(RfStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(v);
    Ok(())
}

unsafe fn drop_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

fn energy_of(b: &energy::EnergyBreakdown) -> RfEnergy {
    RfEnergy {
        norm_m_m: b.norm_m_m,
        interaction: b.interaction,
        free_energy: b.free_energy,
        hls_quotient: b.hls_quotient,
        lambda_star: nan_or(b.lambda_star),
        lambda_value: nan_or(b.lambda_value),
        kappa: nan_or(b.kappa),
    }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn rf_solver_config_default() -> RfSolverConfig {
    let c = SolverConfig::default();
    RfSolverConfig {
        tau: c.tau,
        max_iters: c.max_iters,
        fp_tol: c.fp_tol,
        bisect_tol: c.bisect_tol,
    }
}

#[no_mangle]
pub extern "C" fn rf_evolve_config_default() -> RfEvolveConfig {
    let c = EvolveConfig::default();
    RfEvolveConfig {
        cfl: c.cfl,
        t_end: c.t_end,
        record_every: c.record_every,
        steady_tol: c.steady_tol,
        max_steps: c.max_steps,
        fixed_dt: 0.0,
    }
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_params_new(
    n_dim: usize,
    s: f64,
    p: f64,
    m: f64,
    chi: f64,
    mass: f64,
    out: *mut *mut RfParams,
) -> RfStatus {
    guard(|| put(out, RfParams(ModelParams::new(n_dim, s, p, m, chi, mass)?)))
}

/// # Safety
/// `params` must come from `rf_params_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rf_params_free(params: *mut RfParams) {
    drop_handle(params)
}

/// # Safety
/// `params` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_params_exponents(
    params: *const RfParams,
    out: *mut RfExponents,
) -> RfStatus {
    guard(|| {
        let p = &borrow(params, "params")?.0;
        write(
            out,
            RfExponents {
                p_conj: p.p_conj(),
                p_star: p.p_star(),
                m_c: p.m_c(),
                theta0: p.theta0(),
            },
        )
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_grid_new(
    n_dim: usize,
    n: usize,
    r_dom: f64,
    out: *mut *mut RfGrid,
) -> RfStatus {
    guard(|| put(out, RfGrid(RadialGrid::uniform(n_dim, n, r_dom)?)))
}

/// # Safety
/// `grid` must come from `rf_grid_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rf_grid_free(grid: *mut RfGrid) {
    drop_handle(grid)
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rf_grid_len(grid: *const RfGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Builds K_a on `grid`, going through the on-disk cache when `cache_dir`
/// is not null.
///
/// # Safety
/// `grid` must be a live handle, `cache_dir` null or a NUL-terminated
/// string, and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_operator_build(
    grid: *const RfGrid,
    a: f64,
    cache_dir: *const c_char,
    out: *mut *mut RfOperator,
) -> RfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        let cache = if cache_dir.is_null() {
            None
        } else {
            let dir = CStr::from_ptr(cache_dir)
                .to_str()
                .map_err(|_| Fail(RfStatus::InvalidArgument, "cache_dir is not UTF-8".into()))?;
            Some(OperatorCache::new(dir)?)
        };
        let (op, _) = obtain_operator(cache.as_ref(), g, a)?;
        put(out, RfOperator(op))
    })
}

/// # Safety
/// `op` must come from `rf_operator_build` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rf_operator_free(op: *mut RfOperator) {
    drop_handle(op)
}

/// Copies `len` cell values into a new density on `grid`.
///
/// # Safety
/// `grid` must be a live handle, `values` must point to `len` doubles and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_density_new(
    grid: *const RfGrid,
    values: *const f64,
    len: usize,
    out: *mut *mut RfDensity,
) -> RfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        if values.is_null() {
            return Err(Fail(RfStatus::NullPointer, "values is null".into()));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        put(out, RfDensity(RadialDensity::new(g.clone(), v)?))
    })
}

/// Standard profile of the given length scale, normalized to `mass`.
///
/// # Safety
/// `grid` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_density_profile(
    grid: *const RfGrid,
    kind: RfProfile,
    scale: f64,
    mass: f64,
    out: *mut *mut RfDensity,
) -> RfStatus {
    guard(|| {
        let g = &borrow(grid, "grid")?.0;
        let k = match kind {
            RfProfile::Indicator => ProfileKind::Indicator { radius: scale },
            RfProfile::Gaussian => ProfileKind::Gaussian { width: scale },
            RfProfile::Bump => ProfileKind::Bump { radius: scale },
        };
        put(out, RfDensity(RadialDensity::profile(g.clone(), k, mass)?))
    })
}

/// # Safety
/// `density` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rf_density_free(density: *mut RfDensity) {
    drop_handle(density)
}

/// # Safety
/// `density` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_density_mass(density: *const RfDensity, out: *mut f64) -> RfStatus {
    guard(|| write(out, borrow(density, "density")?.0.mass()))
}

/// Copies the cell values into `buf`. `len_out` receives the cell count;
/// when `cap` is smaller nothing is copied and `RF_STATUS_BUFFER_TOO_SMALL`
/// is returned.
///
/// # Safety
/// `density` must be a live handle, `buf` must hold `cap` doubles (or be
/// null with `cap` 0), and `len_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_density_values(
    density: *const RfDensity,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> RfStatus {
    guard(|| {
        let v = borrow(density, "density")?.0.values();
        write(len_out, v.len())?;
        if cap < v.len() {
            return Err(Fail(
                RfStatus::BufferTooSmall,
                format!("buffer holds {cap} values, {} needed", v.len()),
            ));
        }
        if buf.is_null() {
            return Err(Fail(RfStatus::NullPointer, "buf is null".into()));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// All handles must be live and `out` valid for writes; `op` has order s/2.
#[no_mangle]
pub unsafe extern "C" fn rf_free_energy(
    params: *const RfParams,
    op: *const RfOperator,
    density: *const RfDensity,
    out: *mut RfEnergy,
) -> RfStatus {
    guard(|| {
        let b = energy::free_energy(
            &borrow(params, "params")?.0,
            &borrow(op, "op")?.0,
            &borrow(density, "density")?.0,
        )?;
        write(out, energy_of(&b))
    })
}

fn solver_config(c: Option<&RfSolverConfig>) -> Res<SolverConfig> {
    let mut cfg = SolverConfig::default();
    if let Some(c) = c {
        cfg.tau = c.tau;
        cfg.max_iters = c.max_iters;
        cfg.fp_tol = c.fp_tol;
        cfg.bisect_tol = c.bisect_tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Stationary state of mass M. `config` may be null for defaults.
///
/// # Safety
/// Handles must be live, `config` null or valid, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_steady_solve(
    params: *const RfParams,
    op: *const RfOperator,
    config: *const RfSolverConfig,
    out: *mut *mut RfSteady,
) -> RfStatus {
    guard(|| {
        let cfg = solver_config(config.as_ref())?;
        let r = steady::solve_el(&borrow(params, "params")?.0, &cfg, &borrow(op, "op")?.0)?;
        put(out, RfSteady(r))
    })
}

/// Normalized HLS extremal with ‖h‖₁ = ‖h‖_m = 1.
///
/// # Safety
/// Handles must be live, `config` null or valid, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_hls_extremal(
    params: *const RfParams,
    op: *const RfOperator,
    config: *const RfSolverConfig,
    out: *mut *mut RfSteady,
) -> RfStatus {
    guard(|| {
        let cfg = solver_config(config.as_ref())?;
        let r = steady::hls_extremal(&borrow(params, "params")?.0, &cfg, &borrow(op, "op")?.0)?;
        put(out, RfSteady(r))
    })
}

/// Critical mass and the sharp constant at m = m_c.
///
/// # Safety
/// Handles must be live, `config` null or valid, outputs valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_critical_mass(
    params: *const RfParams,
    op: *const RfOperator,
    config: *const RfSolverConfig,
    mc_out: *mut f64,
    hstar_out: *mut f64,
) -> RfStatus {
    guard(|| {
        let cfg = solver_config(config.as_ref())?;
        let (st, _) =
            steady::critical_mass_study(&borrow(params, "params")?.0, &cfg, &borrow(op, "op")?.0)?;
        write(mc_out, st.critical_mass)?;
        write(hstar_out, st.hstar)
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rf_steady_free(report: *mut RfSteady) {
    drop_handle(report)
}

/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_steady_summary(
    report: *const RfSteady,
    out: *mut RfSteadySummary,
) -> RfStatus {
    guard(|| {
        let r = &borrow(report, "report")?.0;
        write(
            out,
            RfSteadySummary {
                stationarity: match r.stationarity {
                    Stationarity::Minimizer => RfStationarity::Minimizer,
                    Stationarity::SaddleWrtDilations => RfStationarity::SaddleWrtDilations,
                    Stationarity::Extremal => RfStationarity::Extremal,
                },
                converged: r.converged,
                edge_supported: r.edge_supported,
                monotone: r.monotone,
                iterations: r.iterations,
                el_residual: r.el_residual,
                multiplier: r.multiplier,
                identity_defect: r.identity_defect,
                support_radius: r.support_radius,
                mass: r.mass,
                energy: energy_of(&r.energy),
            },
        )
    })
}

/// The solved profile as a new density handle. Extremals may live on a
/// dilate of the operator's grid.
///
/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_steady_density(
    report: *const RfSteady,
    out: *mut *mut RfDensity,
) -> RfStatus {
    guard(|| put(out, RfDensity(borrow(report, "report")?.0.rho.clone())))
}

/// Writes the JSON report, NUL-terminated, into `buf`. `len_out` receives
/// the length including the terminator.
///
/// # Safety
/// `report` must be a live handle, `buf` must hold `cap` bytes (or be null
/// with `cap` 0), and `len_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_steady_json(
    report: *const RfSteady,
    buf: *mut c_char,
    cap: usize,
    len_out: *mut usize,
) -> RfStatus {
    guard(|| {
        let r = &borrow(report, "report")?.0;
        let text = serde_json::to_string(r).map_err(|e| Fail(RfStatus::Io, e.to_string()))?;
        let need = text.len() + 1;
        write(len_out, need)?;
        if cap < need {
            return Err(Fail(
                RfStatus::BufferTooSmall,
                format!("{need} bytes needed"),
            ));
        }
        if buf.is_null() {
            return Err(Fail(RfStatus::NullPointer, "buf is null".into()));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast(), text.len());
        *buf.add(text.len()) = 0;
        Ok(())
    })
}

/// Runs the gradient flow from `initial`. `config` may be null for
/// defaults and `reference` null when there is no target state. The final
/// density goes to `final_out` if it is not null.
///
/// # Safety
/// Handles must be live, pointers null or valid as documented.
#[no_mangle]
pub unsafe extern "C" fn rf_evolve(
    params: *const RfParams,
    op: *const RfOperator,
    initial: *const RfDensity,
    config: *const RfEvolveConfig,
    reference: *const RfDensity,
    summary_out: *mut RfRunSummary,
    final_out: *mut *mut RfDensity,
) -> RfStatus {
    guard(|| {
        let mut cfg = EvolveConfig::default();
        if let Some(c) = config.as_ref() {
            cfg.cfl = c.cfl;
            cfg.t_end = c.t_end;
            cfg.record_every = c.record_every;
            cfg.steady_tol = c.steady_tol;
            cfg.max_steps = c.max_steps;
            cfg.fixed_dt = (c.fixed_dt > 0.0).then_some(c.fixed_dt);
        }
        let reference = reference.as_ref().map(|d| &d.0);
        let run = evolve::run(
            &borrow(params, "params")?.0,
            &borrow(op, "op")?.0,
            &borrow(initial, "initial")?.0,
            &cfg,
            reference,
        )?;
        write(
            summary_out,
            RfRunSummary {
                status: match run.status {
                    RunStatus::Completed => RfRunStatus::Completed,
                    RunStatus::ReachedSteady => RfRunStatus::ReachedSteady,
                    RunStatus::BlowupSuspected => RfRunStatus::BlowupSuspected,
                    RunStatus::StepLimit => RfRunStatus::StepLimit,
                },
                converged: run.converged,
                steps: run.steps,
                t_final: run.t_final,
                mass_drift: run.mass_drift,
                energy_violations: run.energy_violations,
            },
        )?;
        if !final_out.is_null() {
            put(final_out, RfDensity(run.final_rho))?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping_covers_library_errors() {
        assert_eq!(RfStatus::from(&Error::Regime("x".into())), RfStatus::Regime);
        assert_eq!(
            RfStatus::from(&Error::Parameter {
                name: "s",
                reason: "bad".into()
            }),
            RfStatus::Parameter
        );
    }

    #[test]
    fn panics_are_contained() {
        let code = guard(|| panic!("boom"));
        assert_eq!(code, RfStatus::Panic);
        let msg = unsafe { CStr::from_ptr(rf_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }

    #[test]
    fn defaults_mirror_the_library() {
        assert_eq!(
            rf_solver_config_default().max_iters,
            SolverConfig::default().max_iters
        );
        assert_eq!(rf_evolve_config_default().fixed_dt, 0.0);
    }
}
