//! Stationary states, HLS extremals and the sharp-constant estimates built on them.
//!
//! Stationary states with m > m_c come from the damped map
//! ρ ← (1−τ)ρ + τ·G(ρ), where G(ρ) = ((m−1)/m·(χ𝒦(ρ) − D)₊)^{1/(m−1)} and the
//! multiplier D is fixed by the mass. Extremals iterate the analogous map with
//! the constants 𝒜_s, 𝒞_s and are renormalized to ‖h‖_1 = ‖h‖_m = 1 after
//! every step. The dilation half of that renormalization moves the grid
//! instead of resampling the profile (see [`RieszOperator::rescaled`]), so it
//! is exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{
    self, check_operator, dilation_profile, extremal_constants, ElConstants, EnergyBreakdown,
    Multiplier,
};
use crate::error::{Error, Result};
use crate::grid::{pow0, GridSpec, ModelParams, ProfileKind, RadialDensity, RadialGrid};
use crate::riesz::{potentials, RieszOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Relaxation τ ∈ (0, 1].
    pub tau: f64,
    pub max_iters: usize,
    /// Target for the sup-norm Euler–Lagrange residual.
    pub fp_tol: f64,
    /// Relative mass tolerance of the multiplier search.
    pub bisect_tol: f64,
    /// Initial profile; the solver default is used when absent.
    pub init: Option<ProfileKind>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.5,
            max_iters: 20_000,
            fp_tol: 1e-8,
            bisect_tol: 1e-12,
            init: None,
        }
    }
}

impl SolverConfig {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            out.push(("tau", "tau must lie in (0, 1]".to_string()));
        }
        if self.max_iters == 0 {
            out.push(("max_iters", "max_iters must be >= 1".to_string()));
        }
        if !(self.fp_tol > 0.0 && self.fp_tol.is_finite()) {
            out.push(("fp_tol", "fp_tol must be > 0".to_string()));
        }
        if !(self.bisect_tol > 0.0 && self.bisect_tol.is_finite()) {
            out.push(("bisect_tol", "bisect_tol must be > 0".to_string()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((name, reason)) => Err(Error::param(name, reason)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stationarity {
    Minimizer,
    SaddleWrtDilations,
    Extremal,
}

/// Shape of λ ↦ ℱ(ρ^λ) around λ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilationShape {
    Minimum,
    Maximum,
    Monotone,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyReport {
    #[serde(skip)]
    pub rho: RadialDensity,
    pub grid: GridSpec,
    pub stationarity: Stationarity,
    pub converged: bool,
    pub el_residual: f64,
    pub multiplier: f64,
    pub iterations: usize,
    pub energy: EnergyBreakdown,
    pub identity_defect: f64,
    pub support_radius: f64,
    pub monotone: bool,
    /// The support fills the grid, so the profile solves the problem restricted to it.
    pub edge_supported: bool,
    pub mass: f64,
    pub sup_norm: f64,
    pub tau: f64,
    pub constants: Option<ElConstants>,
    pub multiplier_forms: Option<Multiplier>,
    pub dilation_shape: Option<DilationShape>,
    pub notes: Vec<String>,
}

/// The operator of `op` carried over to `grid`, which must be a dilate of its grid.
pub fn operator_on(op: &RieszOperator, grid: &RadialGrid) -> Result<RieszOperator> {
    let g = op.grid();
    if g.same_as(grid) {
        return Ok(op.clone());
    }
    if g.n_dim() != grid.n_dim() || g.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "{:?} is not a dilate of {:?}",
            grid.spec(),
            g.spec()
        )));
    }
    let out = op.rescaled(grid.r_dom() / g.r_dom())?;
    if out.grid().same_as(grid) {
        Ok(out)
    } else {
        Err(Error::GridMismatch(
            "rescaled grid does not reproduce the target".into(),
        ))
    }
}

struct ElMap {
    cm: f64,
    expo: f64,
}

impl ElMap {
    fn new(m: f64) -> Self {
        ElMap {
            cm: m / (m - 1.0),
            expo: 1.0 / (m - 1.0),
        }
    }

    fn profile(&self, phi: &[f64], d: f64, scale: f64) -> Vec<f64> {
        phi.iter()
            .map(|&p| pow0((p - d) / scale, self.expo))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multiplier D with mass(G(·; D)) = target, by Illinois regula falsi on [0, max φ].
fn multiplier_for_mass(
    map: &ElMap,
    phi: &[f64],
    vols: &[f64],
    target: f64,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let top = phi.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Numerical("potential vanishes identically".into()));
    }
    let mass_at = |d: f64| dot(&map.profile(phi, d, map.cm), vols);
    let m0 = mass_at(0.0);
    if m0 < target {
        return Err(Error::Config(format!(
            "mass {target} is unreachable: the multiplier-free profile only carries {m0:.6e}; \
             enlarge R_dom or change the initial profile"
        )));
    }
    let (mut a, mut fa, mut b, mut fb) = (0.0, m0 - target, top, -target);
    let mut side = 0;
    let mut d = 0.0;
    for _ in 0..400 {
        d = (a * fb - b * fa) / (fb - fa);
        if !(d > a && d < b) {
            d = 0.5 * (a + b);
        }
        let fd = mass_at(d) - target;
        if fd.abs() <= tol * target {
            break;
        }
        if fd > 0.0 {
            a = d;
            fa = fd;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = d;
            fb = fd;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        if b - a <= 4.0 * f64::EPSILON * b {
            break;
        }
    }
    let mut g = map.profile(phi, d, map.cm);
    let mass = dot(&g, vols);
    if !((mass - target).abs() <= 1e-6 * target) {
        return Err(Error::Numerical(format!(
            "multiplier search stalled at mass {mass:.12e} for target {target}"
        )));
    }
    g.iter_mut().for_each(|v| *v *= target / mass);
    Ok((d, g))
}

struct ElState {
    energy: EnergyBreakdown,
    d: f64,
    g: Vec<f64>,
    residual: f64,
}

fn el_state(
    params: &ModelParams,
    op: &RieszOperator,
    rho: &RadialDensity,
    tol: f64,
) -> Result<ElState> {
    let map = ElMap::new(params.m);
    let pot = potentials(params, op, rho)?;
    let b = op.field_norm_pow(&pot.u, params.p_conj());
    let energy = EnergyBreakdown::from_norms(params, rho.mass(), rho.lp_norm_pow(params.m), b);
    let phi: Vec<f64> = pot.k.iter().map(|k| params.chi * k).collect();
    let (d, g) = multiplier_for_mass(&map, &phi, op.grid().volumes(), params.mass, tol)?;
    let residual = rho
        .values()
        .iter()
        .zip(&phi)
        .map(|(&r, &p)| (map.cm * pow0(r, params.m - 1.0) - (p - d).max(0.0)).abs())
        .fold(0.0, f64::max);
    Ok(ElState {
        energy,
        d,
        g,
        residual,
    })
}

fn touches_edge(rho: &RadialDensity) -> bool {
    rho.values().last().is_some_and(|v| *v > 0.0)
}

fn dilation_shape(params: &ModelParams, b: &EnergyBreakdown) -> DilationShape {
    let h = 1e-3;
    let (lo, mid, hi) = (
        dilation_profile(params, b, 1.0 - h),
        dilation_profile(params, b, 1.0),
        dilation_profile(params, b, 1.0 + h),
    );
    if lo > mid && hi > mid {
        DilationShape::Minimum
    } else if lo < mid && hi < mid {
        DilationShape::Maximum
    } else {
        DilationShape::Monotone
    }
}

fn default_radius(params: &ModelParams, grid: &RadialGrid) -> f64 {
    0.8 * (params.mass / grid.omega()).powf(1.0 / params.dim())
}

/// Initial profile of mass M, dilated by its own λ_* so that the diffusion
/// and interaction terms start balanced.
fn predilated_init(
    params: &ModelParams,
    op: &RieszOperator,
    kind: ProfileKind,
) -> Result<RadialDensity> {
    let grid = op.grid();
    let mut kind = kind;
    for _ in 0..4 {
        if kind.extent() > 0.9 * grid.r_dom() {
            return Err(Error::Truncation(format!(
                "initial profile {kind:?} does not fit in R_dom = {}; enlarge the domain",
                grid.r_dom()
            )));
        }
        if kind.extent() < 8.0 * grid.dr() {
            return Err(Error::Truncation(format!(
                "initial profile {kind:?} spans fewer than 8 cells; shrink R_dom or refine"
            )));
        }
        let rho = RadialDensity::profile(grid.clone(), kind, params.mass)?;
        let b = energy::free_energy(params, op, &rho)?;
        let ls = b
            .lambda_star
            .ok_or_else(|| Error::Regime("no optimal dilation at m = m_c".into()))?;
        if (ls - 1.0).abs() < 1e-3 {
            return Ok(rho);
        }
        kind = kind.scaled(1.0 / ls);
    }
    RadialDensity::profile(grid.clone(), kind, params.mass)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    params: &ModelParams,
    rho: RadialDensity,
    st: &ElState,
    iterations: usize,
    config: &SolverConfig,
    stationarity: Stationarity,
    tau: f64,
    mut notes: Vec<String>,
) -> Result<SteadyReport> {
    let e = st.energy;
    let a = e.norm_m_m;
    let identity_defect = if a > 0.0 {
        (params.chi * e.potential_norm(params) / params.p_star() - a).abs() / a
    } else {
        f64::INFINITY
    };
    let multiplier_forms = energy::multiplier(params, &e).ok();
    if multiplier_forms.is_some_and(|m| m.disagreement) {
        notes.push("closed forms of the multiplier disagree beyond 1e-3".into());
    }
    let edge_supported = touches_edge(&rho);
    if edge_supported {
        if stationarity == Stationarity::Minimizer {
            return Err(Error::Truncation(
                "stationary profile reaches R_dom; enlarge the domain".into(),
            ));
        }
        notes.push("support fills the grid; the state is relative to the truncated domain".into());
    }
    let mass = rho.mass();
    if (mass - params.mass).abs() > config.bisect_tol.max(1e-13) * params.mass {
        notes.push(format!("mass {mass:.15e} misses target {}", params.mass));
    }
    Ok(SteadyReport {
        grid: rho.grid().spec(),
        stationarity,
        converged: st.residual < config.fp_tol,
        el_residual: st.residual,
        multiplier: st.d,
        iterations,
        energy: e,
        identity_defect,
        support_radius: rho.support_radius(),
        monotone: rho.is_nonincreasing(),
        edge_supported,
        mass,
        sup_norm: rho.sup(),
        tau,
        constants: None,
        multiplier_forms,
        dilation_shape: (!params.is_critical()).then(|| dilation_shape(params, &e)),
        notes,
        rho,
    })
}

/// Stationary state of mass M solving (m/(m−1))ρ^{m−1} = (χ𝒦_{s,p}(ρ) − D)₊.
///
/// For m > m_c this is the damped fixed point on the grid of `op_half`. For
/// (p*_s)′ < m < m_c the fixed point is unstable along dilations; the state is
/// then the rescaled HLS extremal, reported as a saddle on a dilated grid.
pub fn solve_el(
    params: &ModelParams,
    config: &SolverConfig,
    op_half: &RieszOperator,
) -> Result<SteadyReport> {
    check_operator(params, op_half)?;
    config.validate()?;
    if !params.above_hls_threshold() {
        return Err(Error::Regime(format!(
            "stationary states need m > (p*_s)' = {}",
            params.p_star_conj()
        )));
    }
    if params.is_critical() {
        return Err(Error::Regime(
            "at m = m_c stationary states exist only for M = M_c; use the extremal".into(),
        ));
    }
    if params.m < params.m_c() {
        return saddle_from_extremal(params, config, op_half);
    }
    let grid = op_half.grid().clone();
    let kind = config.init.unwrap_or(ProfileKind::Indicator {
        radius: default_radius(params, &grid),
    });
    let mut rho = predilated_init(params, op_half, kind)?;
    let tol = config.bisect_tol.min(1e-12);
    let mut st = el_state(params, op_half, &rho, tol)?;
    let (mut tau, mut clean, mut it) = (config.tau, 0, 0);
    let mut notes = Vec::new();
    while st.residual >= config.fp_tol && it < config.max_iters {
        it += 1;
        let vals = rho
            .values()
            .iter()
            .zip(&st.g)
            .map(|(r, g)| (1.0 - tau) * r + tau * g)
            .collect();
        let cand = RadialDensity::from_clamped(grid.clone(), vals);
        let cs = el_state(params, op_half, &cand, tol)?;
        let slack = 1e-12 * (st.energy.free_energy.abs() + st.energy.norm_m_m);
        if cs.energy.free_energy > st.energy.free_energy + slack {
            tau *= 0.5;
            clean = 0;
            if tau < 1e-6 {
                notes.push("relaxation collapsed below 1e-6 after energy regressions".into());
                break;
            }
            continue;
        }
        rho = cand;
        st = cs;
        clean += 1;
        if clean >= 10 {
            tau = (tau * 1.2).min(config.tau);
            clean = 0;
        }
    }
    if st.residual >= config.fp_tol {
        notes.push(format!("not converged after {it} iterations"));
    }
    finish(
        params,
        rho,
        &st,
        it,
        config,
        Stationarity::Minimizer,
        tau,
        notes,
    )
}

fn saddle_from_extremal(
    params: &ModelParams,
    config: &SolverConfig,
    op_half: &RieszOperator,
) -> Result<SteadyReport> {
    let init = extremal_init(config, op_half)?;
    let mut tol = config.fp_tol;
    let mut run = extremal_iteration(params, config, op_half, init, tol)?;
    let (m, cm) = (params.m, params.m / (params.m - 1.0));
    let e = params.p_conj() * params.s / params.dim();
    for _ in 0..3 {
        let c = run.constants;
        let a = (params.chi * c.a_s * params.mass.powf(e) / cm).powf(1.0 / (m - params.m_c()));
        // residuals of ρ are those of h times cm a^{m−1}/𝒜_s
        let gain = cm * a.powf(m - 1.0) / c.a_s;
        if run.residual * gain < config.fp_tol || run.iterations >= config.max_iters || gain <= 1.0
        {
            break;
        }
        tol = 0.5 * config.fp_tol / gain;
        run = extremal_iteration(params, config, op_half, run.h.clone(), tol)?;
    }
    let c = run.constants;
    let a = (params.chi * c.a_s * params.mass.powf(e) / cm).powf(1.0 / (m - params.m_c()));
    let b = (a / params.mass).powf(1.0 / params.dim());
    let op = run.op.rescaled(1.0 / b)?;
    let vals = run.h.values().iter().map(|v| a * v).collect();
    let rho = RadialDensity::from_clamped(op.grid().clone(), vals);
    let st = el_state(params, &op, &rho, config.bisect_tol.min(1e-12))?;
    let mut notes = run.notes;
    let mut report = finish(
        params,
        rho,
        &st,
        run.iterations,
        config,
        Stationarity::SaddleWrtDilations,
        run.tau,
        std::mem::take(&mut notes),
    )?;
    if report.dilation_shape != Some(DilationShape::Maximum) {
        report
            .notes
            .push("dilation profile does not peak at lambda = 1".into());
    }
    Ok(report)
}

struct ExtremalRun {
    h: RadialDensity,
    op: RieszOperator,
    constants: ElConstants,
    residual: f64,
    iterations: usize,
    tau: f64,
    notes: Vec<String>,
}

struct ExtState {
    constants: ElConstants,
    g: Vec<f64>,
    residual: f64,
    quotient: f64,
}

fn quotient(params: &ModelParams, l1: f64, lm: f64, b: f64) -> f64 {
    let (pc, th) = (params.p_conj(), params.theta0());
    b / (l1.powf(pc * th) * lm.powf(pc * (1.0 - th) / params.m))
}

fn ext_state(params: &ModelParams, op: &RieszOperator, h: &RadialDensity) -> Result<ExtState> {
    let pot = potentials(params, op, h)?;
    let b = op.field_norm_pow(&pot.u, params.p_conj());
    let (l1, lm) = (h.mass(), h.lp_norm_pow(params.m));
    let c = extremal_constants(params, l1, lm, b);
    let map = ElMap::new(params.m);
    let g = map.profile(&pot.k, c.c_s, c.a_s);
    let residual = h
        .values()
        .iter()
        .zip(&pot.k)
        .map(|(&v, &k)| (c.a_s * pow0(v, params.m - 1.0) - (k - c.c_s).max(0.0)).abs())
        .fold(0.0, f64::max);
    Ok(ExtState {
        constants: c,
        g,
        residual,
        quotient: quotient(params, l1, lm, b),
    })
}

/// Rescales to ‖h‖_1 = ‖h‖_m = 1: amplitude on the values, dilation on the grid.
fn normalize(
    params: &ModelParams,
    base: &RieszOperator,
    h: &RadialDensity,
) -> Result<(RadialDensity, RieszOperator)> {
    let (l1, lm) = (h.mass(), h.lp_norm_pow(params.m));
    if !(l1 > 0.0 && lm > 0.0) {
        return Err(Error::Numerical("extremal iterate vanished".into()));
    }
    let nd = params.dim();
    let lambda = (l1.powf(params.m) / lm).powf(1.0 / (nd * (params.m - 1.0)));
    let mu = lambda.powf(nd) / l1;
    let scale = h.grid().r_dom() / base.grid().r_dom() / lambda;
    let op = base.rescaled(scale)?;
    let vals = h.values().iter().map(|v| v * mu).collect();
    Ok((RadialDensity::from_clamped(op.grid().clone(), vals), op))
}

fn extremal_init(config: &SolverConfig, op: &RieszOperator) -> Result<RadialDensity> {
    let kind = config.init.unwrap_or(ProfileKind::Indicator {
        radius: 0.5 * op.grid().r_dom(),
    });
    RadialDensity::profile(op.grid().clone(), kind, 1.0)
}

fn extremal_iteration(
    params: &ModelParams,
    config: &SolverConfig,
    base: &RieszOperator,
    init: RadialDensity,
    tol: f64,
) -> Result<ExtremalRun> {
    let (mut h, mut op) = normalize(params, base, &init.rearrange())?;
    let mut st = ext_state(params, &op, &h)?;
    let (mut tau, mut clean, mut it) = (config.tau, 0, 0);
    let mut notes = Vec::new();
    while st.residual >= tol && it < config.max_iters {
        it += 1;
        let vals = h
            .values()
            .iter()
            .zip(&st.g)
            .map(|(v, g)| (1.0 - tau) * v + tau * g)
            .collect();
        let mut cand = RadialDensity::from_clamped(op.grid().clone(), vals);
        if !cand.is_nonincreasing() {
            let sorted = cand.rearrange();
            let before = ext_state(params, &op, &cand)?.quotient;
            let after = ext_state(params, &op, &sorted)?.quotient;
            if after < before * (1.0 - 1e-10) {
                return Err(Error::Numerical(format!(
                    "rearrangement lowered the HLS quotient from {before:.15e} to {after:.15e} \
                     at iteration {it}"
                )));
            }
            cand = sorted;
        }
        let (cn, on) = normalize(params, base, &cand)?;
        let cs = ext_state(params, &on, &cn)?;
        if cs.quotient < st.quotient * (1.0 - 1e-10) {
            tau *= 0.5;
            clean = 0;
            if tau < 1e-6 {
                return Err(Error::Numerical(format!(
                    "HLS quotient keeps decreasing ({:.15e} -> {:.15e}) at iteration {it} \
                     with tau {tau:.1e}",
                    st.quotient, cs.quotient
                )));
            }
            continue;
        }
        h = cn;
        op = on;
        st = cs;
        clean += 1;
        if clean >= 10 {
            tau = (tau * 1.2).min(config.tau);
            clean = 0;
        }
    }
    if st.residual >= tol {
        notes.push(format!(
            "extremal search not converged after {it} iterations"
        ));
    }
    Ok(ExtremalRun {
        h,
        op,
        constants: st.constants,
        residual: st.residual,
        iterations: it,
        tau,
        notes,
    })
}

fn extremal_report(
    params: &ModelParams,
    config: &SolverConfig,
    run: ExtremalRun,
) -> Result<SteadyReport> {
    let h = run.h;
    let mut notes = run.notes;
    if touches_edge(&h) {
        notes.push("support fills the grid; extremal of the quotient restricted to it".into());
    }
    let b = run
        .op
        .field_norm_pow(&run.op.potential(&h)?, params.p_conj());
    let energy = EnergyBreakdown::from_norms(params, h.mass(), h.lp_norm_pow(params.m), b);
    let a = energy.norm_m_m;
    let identity_defect = (params.m_conj() / params.p_star() * b - run.constants.a_s * a).abs()
        / (run.constants.a_s * a);
    Ok(SteadyReport {
        grid: h.grid().spec(),
        stationarity: Stationarity::Extremal,
        converged: run.residual < config.fp_tol,
        el_residual: run.residual,
        multiplier: run.constants.c_s,
        iterations: run.iterations,
        energy,
        identity_defect,
        support_radius: h.support_radius(),
        monotone: h.is_nonincreasing(),
        edge_supported: touches_edge(&h),
        mass: h.mass(),
        sup_norm: h.sup(),
        tau: run.tau,
        constants: Some(run.constants),
        multiplier_forms: None,
        dilation_shape: None,
        notes,
        rho: h,
    })
}

/// Normalized HLS extremal h with ‖h‖_1 = ‖h‖_m = 1.
///
/// The profile lives on a dilate of the grid of `op_half`; use
/// [`operator_on`] to evaluate functionals on it.
pub fn hls_extremal(
    params: &ModelParams,
    config: &SolverConfig,
    op_half: &RieszOperator,
) -> Result<SteadyReport> {
    check_operator(params, op_half)?;
    config.validate()?;
    require_hls(params)?;
    let init = extremal_init(config, op_half)?;
    hls_extremal_from(params, config, op_half, init)
}

/// [`hls_extremal`] from a given initial density on the grid of `op_half`.
pub fn hls_extremal_from(
    params: &ModelParams,
    config: &SolverConfig,
    op_half: &RieszOperator,
    init: RadialDensity,
) -> Result<SteadyReport> {
    check_operator(params, op_half)?;
    require_hls(params)?;
    let run = extremal_iteration(params, config, op_half, init, config.fp_tol)?;
    extremal_report(params, config, run)
}

fn require_hls(params: &ModelParams) -> Result<()> {
    if params.above_hls_threshold() {
        Ok(())
    } else {
        Err(Error::Regime(format!(
            "extremals need m > (p*_s)' = {}",
            params.p_star_conj()
        )))
    }
}

/// Random nonincreasing profile of unit mass on the first third to half of the grid.
pub fn random_monotone_profile<R: Rng>(
    grid: &std::sync::Arc<RadialGrid>,
    rng: &mut R,
) -> RadialDensity {
    let n = grid.len();
    let cut = rng.gen_range(n / 3..=n / 2);
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            if i < cut {
                rng.gen_range(0.05..1.0)
            } else {
                0.0
            }
        })
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let mass = dot(&v, grid.volumes());
    v.iter_mut().for_each(|x| *x /= mass);
    RadialDensity::from_clamped(grid.clone(), v)
}

#[derive(Debug, Clone, Serialize)]
pub struct HstarEstimate {
    pub value: f64,
    pub runs: Vec<f64>,
    pub relative_spread: f64,
    pub agree: bool,
    pub upper_bound: f64,
    pub below_bound: bool,
}

/// H*_{m,s} from extremal searches started at the configured profile and
/// at `extra_runs` random monotone profiles. Disagreement is reported.
pub fn estimate_hstar<R: Rng>(
    params: &ModelParams,
    config: &SolverConfig,
    op_half: &RieszOperator,
    extra_runs: usize,
    rng: &mut R,
) -> Result<(HstarEstimate, SteadyReport)> {
    let first = hls_extremal(params, config, op_half)?;
    let mut runs = vec![first.energy.hls_quotient];
    for _ in 0..extra_runs {
        let init = random_monotone_profile(op_half.grid(), rng);
        runs.push(
            hls_extremal_from(params, config, op_half, init)?
                .energy
                .hls_quotient,
        );
    }
    let hi = runs.iter().copied().fold(f64::MIN, f64::max);
    let lo = runs.iter().copied().fold(f64::MAX, f64::min);
    let relative_spread = (hi - lo) / hi;
    let upper_bound = energy::hls_upper_bound(params)?.powf(params.p_conj());
    Ok((
        HstarEstimate {
            value: first.energy.hls_quotient,
            runs,
            relative_spread,
            agree: relative_spread <= 1e-3,
            upper_bound,
            below_bound: hi <= upper_bound * (1.0 + 1e-2),
        },
        first,
    ))
}

/// M_c = (p*_s/(χH*))^{N/(sp′)} at m = m_c.
pub fn estimate_mc(params: &ModelParams, hstar: f64) -> Result<f64> {
    if !params.is_critical() {
        return Err(Error::Regime(format!(
            "critical mass needs m = m_c = {}",
            params.m_c()
        )));
    }
    energy::critical_mass(params, hstar)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalMassReport {
    pub hstar: f64,
    pub critical_mass: f64,
    /// ℱ(M_c·h) for the unit-mass extremal h.
    pub energy_at_mc: f64,
    /// (χ/p′)‖K_{s/2}∗(M_c·h)‖_{p′}^{p′}.
    pub interaction_at_mc: f64,
    pub vanishes: bool,
    /// (λ, ℱ((1.5·M_c·h)^λ)) over a log grid of dilations.
    pub supercritical: Vec<(f64, f64)>,
    pub blow_down: bool,
}

/// Extremal, M_c, and the energy checks at and above the critical mass.
pub fn critical_mass_study(
    params: &ModelParams,
    config: &SolverConfig,
    op_half: &RieszOperator,
) -> Result<(CriticalMassReport, SteadyReport)> {
    if !params.is_critical() {
        return Err(Error::Regime(format!(
            "critical mass needs m = m_c = {}",
            params.m_c()
        )));
    }
    let ext = hls_extremal(params, config, op_half)?;
    let hstar = ext.energy.hls_quotient;
    let mc = estimate_mc(params, hstar)?;
    let op = operator_on(op_half, ext.rho.grid())?;
    let at = params.with_mass(mc)?;
    let b = energy::free_energy(&at, &op, &ext.rho.scaled(mc)?)?;
    let interaction = params.chi * b.interaction;
    let heavy = params.with_mass(1.5 * mc)?;
    let rho = ext.rho.scaled(1.5 * mc)?;
    let nd = params.dim();
    let mut supercritical = Vec::new();
    for k in 0..=20 {
        let lambda = 2f64.powf(-2.0 + 0.25 * k as f64);
        let opl = op.rescaled(1.0 / lambda)?;
        let vals = rho.values().iter().map(|v| v * lambda.powf(nd)).collect();
        let dil = RadialDensity::from_clamped(opl.grid().clone(), vals);
        supercritical.push((lambda, energy::free_energy(&heavy, &opl, &dil)?.free_energy));
    }
    Ok((
        CriticalMassReport {
            hstar,
            critical_mass: mc,
            energy_at_mc: b.free_energy,
            interaction_at_mc: interaction,
            vanishes: b.free_energy.abs() < 1e-3 * interaction,
            blow_down: supercritical.iter().any(|(_, f)| *f < 0.0),
            supercritical,
        },
        ext,
    ))
}
