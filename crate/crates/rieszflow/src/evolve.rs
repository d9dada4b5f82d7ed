//! Explicit upwind finite volumes for ∂tρ = ∇·(ρ∇ξ), ξ = (m/(m−1))ρ^{m−1} − χ𝒦_{s,p}(ρ).
//!
//! Fluxes live on cell faces and telescope, so mass is conserved up to
//! roundoff. The time step is capped so that no cell can lose more than it
//! holds, which keeps the scheme positive.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyBreakdown;
use crate::error::{Error, Result};
use crate::grid::{pow0, ModelParams, RadialDensity};
use crate::riesz::{potentials, RieszOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// L¹ distance to the reference below which the run counts as settled.
    pub steady_tol: f64,
    pub max_steps: usize,
    /// Fixed step instead of the adaptive one; refused when above the bound.
    pub fixed_dt: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            cfl: 0.4,
            t_end: 1.0,
            record_every: 100,
            steady_tol: 1e-3,
            max_steps: 10_000_000,
            fixed_dt: None,
        }
    }
}

impl EvolveConfig {
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            out.push(("cfl", "cfl must lie in (0, 1)".to_string()));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            out.push(("t_end", "t_end must be finite and > 0".to_string()));
        }
        if self.record_every == 0 {
            out.push(("record_every", "record_every must be >= 1".to_string()));
        }
        if !(self.steady_tol > 0.0) {
            out.push(("steady_tol", "steady_tol must be > 0".to_string()));
        }
        if self.max_steps == 0 {
            out.push(("max_steps", "max_steps must be >= 1".to_string()));
        }
        if self
            .fixed_dt
            .is_some_and(|dt| !(dt > 0.0 && dt.is_finite()))
        {
            out.push(("fixed_dt", "fixed_dt must be finite and > 0".to_string()));
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

/// Face velocities u_{i+1/2} = −(ξ_{i+1} − ξ_i)/Δr for the n−1 interior faces.
pub fn velocity(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho: &RadialDensity,
) -> Result<Vec<f64>> {
    Ok(flow(params, op_half, rho)?.u)
}

struct Flow {
    u: Vec<f64>,
    energy: f64,
}

fn flow(params: &ModelParams, op_half: &RieszOperator, rho: &RadialDensity) -> Result<Flow> {
    rho.check_grid(op_half.grid())?;
    let pot = potentials(params, op_half, rho)?;
    let cm = params.m / (params.m - 1.0);
    let xi: Vec<f64> = rho
        .values()
        .iter()
        .zip(&pot.k)
        .map(|(&v, &k)| cm * pow0(v, params.m - 1.0) - params.chi * k)
        .collect();
    let dr = rho.grid().dr();
    let u = xi.windows(2).map(|w| -(w[1] - w[0]) / dr).collect();
    let b = op_half.field_norm_pow(&pot.u, params.p_conj());
    let a = rho.lp_norm_pow(params.m);
    let energy = EnergyBreakdown::from_norms(params, rho.mass(), a, b).free_energy;
    Ok(Flow { u, energy })
}

fn dt_bound(params: &ModelParams, rho: &RadialDensity, u: &[f64]) -> f64 {
    let grid = rho.grid();
    let (v, dr, nd) = (rho.values(), grid.dr(), params.dim());
    let diff = v
        .iter()
        .map(|&x| params.m * pow0(x, params.m - 1.0))
        .fold(0.0, f64::max);
    let umax = u.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
    let mut dt = dr * dr / (2.0 * nd * diff + f64::EPSILON);
    if umax > 0.0 {
        dt = dt.min(dr / umax);
    }
    // outflow of every cell must stay below its content
    for (i, &vol) in grid.volumes().iter().enumerate() {
        let mut out = 0.0;
        if i + 1 < v.len() && u[i] > 0.0 {
            out += u[i] * grid.face_area(i + 1);
        }
        if i > 0 && u[i - 1] < 0.0 {
            out -= u[i - 1] * grid.face_area(i);
        }
        if out > 0.0 {
            dt = dt.min(vol / out);
        }
    }
    dt
}

/// Largest step accepted by [`step`] at this state.
pub fn max_stable_dt(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho: &RadialDensity,
) -> Result<f64> {
    let f = flow(params, op_half, rho)?;
    Ok(dt_bound(params, rho, &f.u))
}

fn advance(rho: &RadialDensity, u: &[f64], dt: f64) -> Result<RadialDensity> {
    let grid = rho.grid();
    let v = rho.values();
    let n = v.len();
    let flux: Vec<f64> = (0..n - 1)
        .map(|i| {
            let up = if u[i] > 0.0 { v[i] } else { v[i + 1] };
            u[i] * up * grid.face_area(i + 1)
        })
        .collect();
    let mut next = Vec::with_capacity(n);
    for i in 0..n {
        let fin = if i > 0 { flux[i - 1] } else { 0.0 };
        let fout = if i + 1 < n { flux[i] } else { 0.0 };
        let x = v[i] - dt * (fout - fin) / grid.volumes()[i];
        if x < 0.0 {
            if x < -1e-12 * v[i].max(f64::MIN_POSITIVE) && x < -1e-300 {
                return Err(Error::Stability(format!(
                    "cell {i} went negative ({x:.3e}); the step {dt:.3e} is too large"
                )));
            }
            next.push(0.0);
        } else {
            next.push(x);
        }
    }
    RadialDensity::new(grid.clone(), next)
}

/// One explicit step of length `dt`.
pub fn step(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho: &RadialDensity,
    dt: f64,
) -> Result<RadialDensity> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", "time step must be finite and > 0"));
    }
    let f = flow(params, op_half, rho)?;
    let bound = dt_bound(params, rho, &f.u);
    if dt > bound {
        return Err(Error::Stability(format!(
            "dt = {dt:.3e} exceeds the stability bound {bound:.3e}"
        )));
    }
    advance(rho, &f.u, dt)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    pub energies: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub dist_ref: Vec<Option<f64>>,
}

impl TrajectoryRecord {
    fn push(&mut self, t: f64, rho: &RadialDensity, energy: f64, dist: Option<f64>) {
        self.times.push(t);
        self.masses.push(rho.mass());
        self.energies.push(energy);
        self.sup_norms.push(rho.sup());
        self.dist_ref.push(dist);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mass,energy,sup_norm,dist_ref\n");
        for i in 0..self.len() {
            let d = self.dist_ref[i].map_or(String::new(), |d| format!("{d:.17e}"));
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{d}\n",
                self.times[i], self.masses[i], self.energies[i], self.sup_norms[i]
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    ReachedSteady,
    BlowupSuspected,
    StepLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub converged: bool,
    pub steps: usize,
    pub t_final: f64,
    pub record: TrajectoryRecord,
    /// max_k (mass_k − mass_0)/mass_0 in absolute value.
    pub mass_drift: f64,
    /// Steps where ℱ rose by more than 1e−10·|ℱ|.
    pub energy_violations: usize,
    /// Largest per-step relative rise of ℱ.
    pub max_energy_rise: f64,
    /// Support entered the outer 5% of the domain.
    pub wall_contact: bool,
    #[serde(skip)]
    pub final_rho: RadialDensity,
    #[serde(skip)]
    pub snapshots: Vec<(f64, RadialDensity)>,
}

/// Cells whose combined mass signals concentration at the origin.
const CORE_CELLS: usize = 10;

fn core_fraction(rho: &RadialDensity, mass0: f64) -> f64 {
    let core: f64 = rho
        .values()
        .iter()
        .zip(rho.grid().volumes())
        .take(CORE_CELLS)
        .map(|(v, w)| v * w)
        .sum();
    core / mass0
}

/// Sup norm grew a millionfold, or the innermost cells gathered most of the
/// mass they did not hold initially.
fn blowup(rho: &RadialDensity, sup0: f64, mass0: f64, core0: f64) -> bool {
    if rho.sup() > 1e6 * sup0 {
        return true;
    }
    let core = core_fraction(rho, mass0);
    rho.values().len() > 4 * CORE_CELLS && core > 0.5 && core > 0.5 * (1.0 + core0)
}

/// Integrates to `t_end`, recording every `record_every` steps.
///
/// With a reference, the run stops once the L¹ distance drops below `steady_tol`.
/// Suspected blow-up ends the run with that status instead of an error.
pub fn run(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho0: &RadialDensity,
    config: &EvolveConfig,
    reference: Option<&RadialDensity>,
) -> Result<RunReport> {
    config.validate()?;
    rho0.check_grid(op_half.grid())?;
    if let Some(r) = reference {
        r.check_grid(op_half.grid())?;
    }
    let grid = op_half.grid().clone();
    let wall = grid.r_dom() * 0.95;
    let dist = |rho: &RadialDensity| -> Result<Option<f64>> {
        reference.map(|r| rho.l1_distance(r)).transpose()
    };
    let (mass0, sup0) = (rho0.mass(), rho0.sup());
    let core0 = core_fraction(rho0, mass0);
    let mut rho = rho0.clone();
    let mut f = flow(params, op_half, &rho)?;
    let mut record = TrajectoryRecord::default();
    let d0 = dist(&rho)?;
    record.push(0.0, &rho, f.energy, d0);
    let mut snapshots = vec![(0.0, rho.clone())];
    let (mut t, mut steps) = (0.0, 0);
    let (mut violations, mut max_rise, mut drift) = (0, f64::NEG_INFINITY, 0.0f64);
    let mut wall_contact = rho.support_radius() > wall;
    let mut status = RunStatus::Completed;
    let mut converged = d0.is_some_and(|d| d < config.steady_tol);
    while t < config.t_end && !converged {
        if steps == config.max_steps {
            status = RunStatus::StepLimit;
            break;
        }
        let bound = dt_bound(params, &rho, &f.u);
        let dt = match config.fixed_dt {
            Some(dt) if dt > bound => {
                return Err(Error::Stability(format!(
                    "fixed dt = {dt:.3e} exceeds the stability bound {bound:.3e} at t = {t}"
                )))
            }
            Some(dt) => dt,
            None => config.cfl * bound,
        }
        .min(config.t_end - t);
        if !(dt > 0.0) {
            return Err(Error::Stability(format!("time step collapsed at t = {t}")));
        }
        let next = advance(&rho, &f.u, dt)?;
        let nf = flow(params, op_half, &next)?;
        let rise = (nf.energy - f.energy) / f.energy.abs().max(f64::MIN_POSITIVE);
        max_rise = max_rise.max(rise);
        if nf.energy - f.energy > 1e-10 * f.energy.abs() {
            violations += 1;
        }
        rho = next;
        f = nf;
        t += dt;
        steps += 1;
        drift = drift.max((rho.mass() - mass0).abs() / mass0);
        wall_contact |= rho.support_radius() > wall;
        let boom = blowup(&rho, sup0, mass0, core0);
        let last = t >= config.t_end || boom;
        let d = if steps % config.record_every == 0 || last || reference.is_some() {
            dist(&rho)?
        } else {
            None
        };
        converged = d.is_some_and(|d| d < config.steady_tol);
        if steps % config.record_every == 0 || last || converged {
            record.push(t, &rho, f.energy, d);
            snapshots.push((t, rho.clone()));
        }
        if boom {
            status = RunStatus::BlowupSuspected;
            break;
        }
    }
    if converged {
        status = RunStatus::ReachedSteady;
    }
    Ok(RunReport {
        status,
        converged,
        steps,
        t_final: t,
        record,
        mass_drift: drift,
        energy_violations: violations,
        max_energy_rise: if steps == 0 { 0.0 } else { max_rise },
        wall_contact,
        final_rho: rho,
        snapshots,
    })
}
