//! Behaviour of minimizers and energies as s → 0.
//!
//! For m > p′ the minimizers approach the indicator ρ₀ of height (χ/p)^{1/(m−p′)}
//! and mass M, which minimizes the local functional
//! ℱ₀(ρ) = ‖ρ‖_m^m/(m−1) − (χ/p′)‖ρ‖_{p′}^{p′}. At m = p′ the outcome depends
//! on the sign of χ − p.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::cache::{obtain_operator, OperatorCache};
use crate::energy::{self, free_energy, free_energy_limit};
use crate::error::{Error, Result};
use crate::grid::{ModelParams, ProfileKind, RadialDensity, RadialGrid};
use crate::riesz::RieszOperator;
use crate::steady::{solve_el, SolverConfig, Stationarity, SteadyReport};

#[derive(Debug, Clone, Serialize)]
pub struct LimitProfile {
    pub height: f64,
    pub radius: f64,
    pub energy: f64,
    #[serde(skip)]
    pub density: RadialDensity,
}

fn is_fair_exponent(params: &ModelParams) -> bool {
    (params.m - params.p_conj()).abs() <= 1e-12 * params.p_conj()
}

/// ρ₀ on `grid`. The cell containing R₀ holds the volume-weighted fraction
/// of the height, so the mass is exact.
pub fn limit_profile(params: &ModelParams, grid: &Arc<RadialGrid>) -> Result<LimitProfile> {
    let pc = params.p_conj();
    if params.m <= pc || is_fair_exponent(params) {
        return Err(Error::Regime(format!(
            "the limit profile needs m > p' = {pc}"
        )));
    }
    if grid.n_dim() != params.n_dim {
        return Err(Error::GridMismatch("grid dimension differs from N".into()));
    }
    let e = 1.0 / (params.m - pc);
    let height = (params.chi / params.p).powf(e);
    let radius =
        (params.mass / grid.omega() * (params.p / params.chi).powf(e)).powf(1.0 / params.dim());
    if radius >= grid.r_dom() {
        return Err(Error::Truncation(format!(
            "limit radius {radius} does not fit in R_dom = {}",
            grid.r_dom()
        )));
    }
    let nd = params.n_dim as i32;
    let edges = grid.edges();
    let values = grid
        .volumes()
        .iter()
        .enumerate()
        .map(|(i, vol)| {
            let (lo, hi) = (edges[i], edges[i + 1]);
            if hi <= radius {
                height
            } else if lo >= radius {
                0.0
            } else {
                height * grid.omega() * (radius.powi(nd) - lo.powi(nd)) / vol
            }
        })
        .collect();
    let density = RadialDensity::new(grid.clone(), values)?;
    Ok(LimitProfile {
        height,
        radius,
        energy: free_energy_limit(params, &density),
        density,
    })
}

/// Adjacent-pair trend test allowing one violation.
#[derive(Debug, Clone, Serialize)]
pub struct Trend {
    pub holds: bool,
    pub violations: usize,
    /// Largest relative step against the trend.
    pub worst: f64,
}

/// `decreasing` trend along `xs`; at most one adjacent pair may go the wrong
/// way by less than `slack` relative, and the last value must beat the first.
pub fn trend(xs: &[f64], decreasing: bool, slack: f64) -> Trend {
    let sign = if decreasing { 1.0 } else { -1.0 };
    let mut violations = 0;
    let mut worst = 0.0f64;
    for w in xs.windows(2) {
        let rise = sign * (w[1] - w[0]);
        if rise > 0.0 {
            violations += 1;
            worst = worst.max(rise / w[0].abs().max(f64::MIN_POSITIVE));
        }
    }
    let overall = xs.len() < 2 || sign * (xs[xs.len() - 1] - xs[0]) < 0.0;
    Trend {
        holds: overall && violations <= 1 && worst < slack,
        violations,
        worst,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Converged,
    NotConverged,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub s: f64,
    pub status: RowStatus,
    pub stationarity: Option<Stationarity>,
    pub l1_err: Option<f64>,
    pub l2_err: Option<f64>,
    pub energy: Option<f64>,
    pub d_s: Option<f64>,
    pub sup_norm: Option<f64>,
    pub support_radius: Option<f64>,
    pub el_residual: Option<f64>,
    pub r_dom: f64,
    pub operator_sha256: Option<String>,
    pub error: Option<String>,
    #[serde(skip)]
    pub profile: Option<RadialDensity>,
}

impl SweepRow {
    fn failed(s: f64, r_dom: f64, sha: Option<String>, e: Error) -> Self {
        SweepRow {
            s,
            status: RowStatus::Failed,
            stationarity: None,
            l1_err: None,
            l2_err: None,
            energy: None,
            d_s: None,
            sup_norm: None,
            support_radius: None,
            el_residual: None,
            r_dom,
            operator_sha256: sha,
            error: Some(e.to_string()),
            profile: None,
        }
    }

    fn from_report(
        s: f64,
        r: SteadyReport,
        limit: Option<&LimitProfile>,
        sha: String,
    ) -> Result<Self> {
        let (l1, l2) = match limit {
            Some(l) => (
                Some(r.rho.l1_distance(&l.density)?),
                Some(r.rho.lq_distance(&l.density, 2.0)?),
            ),
            None => (None, None),
        };
        Ok(SweepRow {
            s,
            status: if r.converged {
                RowStatus::Converged
            } else {
                RowStatus::NotConverged
            },
            stationarity: Some(r.stationarity),
            l1_err: l1,
            l2_err: l2,
            energy: Some(r.energy.free_energy),
            d_s: Some(r.multiplier),
            sup_norm: Some(r.sup_norm),
            support_radius: Some(r.support_radius),
            el_residual: Some(r.el_residual),
            r_dom: r.grid.r_dom,
            operator_sha256: Some(sha),
            error: None,
            profile: Some(r.rho),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub params: ModelParams,
    pub s_values: Vec<f64>,
    pub limit: Option<LimitProfile>,
    pub rows: Vec<SweepRow>,
    pub checks: Vec<Check>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
        let mut out = String::from("s,L1_err,L2_err,energy,D_s,sup_norm,support_radius,status\n");
        for r in &self.rows {
            let status = match (r.status, r.stationarity) {
                (RowStatus::Failed, _) => "failed",
                (RowStatus::NotConverged, _) => "not_converged",
                (_, Some(Stationarity::SaddleWrtDilations)) => "saddle_wrt_dilations",
                _ => "converged",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.s,
                f(r.l1_err),
                f(r.l2_err),
                f(r.energy),
                f(r.d_s),
                f(r.sup_norm),
                f(r.support_radius),
                status
            ));
        }
        out
    }

    pub fn all_rows_ok(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Converged)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn column(&self, f: impl Fn(&SweepRow) -> Option<f64>) -> Option<Vec<f64>> {
        self.rows.iter().map(f).collect()
    }
}

fn check_s_list(params: &ModelParams, s_list: &[f64]) -> Result<()> {
    if s_list.is_empty() {
        return Err(Error::param("s_list", "s_list must not be empty"));
    }
    if s_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("s_list", "s_list must be strictly decreasing"));
    }
    for &s in s_list {
        params.with_s(s)?;
    }
    Ok(())
}

/// Runs `solve` for every s in parallel, each with its own operator on `grid`.
fn per_s<F>(
    params: &ModelParams,
    s_list: &[f64],
    grid: &Arc<RadialGrid>,
    cache: Option<&OperatorCache>,
    solve: F,
) -> Vec<SweepRow>
where
    F: Fn(&ModelParams, &RieszOperator, String) -> Result<SweepRow> + Sync,
{
    s_list
        .par_iter()
        .map(|&s| {
            let ps = match params.with_s(s) {
                Ok(p) => p,
                Err(e) => return SweepRow::failed(s, grid.r_dom(), None, e),
            };
            match obtain_operator(cache, grid, ps.half_order()) {
                Ok((op, src)) => solve(&ps, &op, src.sha256.clone())
                    .unwrap_or_else(|e| SweepRow::failed(s, grid.r_dom(), Some(src.sha256), e)),
                Err(e) => SweepRow::failed(s, grid.r_dom(), None, e),
            }
        })
        .collect()
}

/// Minimizers over decreasing s on one fixed grid, compared with ρ₀.
pub fn sweep_s(
    params: &ModelParams,
    s_list: &[f64],
    config: &SolverConfig,
    grid: &Arc<RadialGrid>,
    cache: Option<&OperatorCache>,
) -> Result<SweepReport> {
    check_s_list(params, s_list)?;
    config.validate()?;
    if params.m < params.p_conj() && !is_fair_exponent(params) {
        return Err(Error::Regime(format!(
            "the sweep needs m >= p' = {}",
            params.p_conj()
        )));
    }
    let limit = if is_fair_exponent(params) {
        None
    } else {
        Some(limit_profile(params, grid)?)
    };
    let rows = per_s(params, s_list, grid, cache, |ps, op, sha| {
        SweepRow::from_report(ps.s, solve_el(ps, config, op)?, limit.as_ref(), sha)
    });
    let mut report = SweepReport {
        params: *params,
        s_values: s_list.to_vec(),
        limit,
        rows,
        checks: Vec::new(),
    };
    if let Some(l) = &report.limit {
        report.checks = limit_checks(&report, l);
    }
    Ok(report)
}

fn limit_checks(report: &SweepReport, limit: &LimitProfile) -> Vec<Check> {
    let mut checks = Vec::new();
    let mass = report.params.mass;
    let solved = report.all_rows_ok();
    checks.push(Check::new(
        "all_rows_converged",
        solved,
        format!("{} rows", report.rows.len()),
    ));
    if !solved {
        return checks;
    }
    let l1 = report.column(|r| r.l1_err).unwrap_or_default();
    let t = trend(&l1, true, 0.1);
    checks.push(Check::new(
        "l1_error_trend",
        t.holds,
        format!("errors {l1:?}, {} violations", t.violations),
    ));
    let last = l1.last().copied().unwrap_or(f64::INFINITY);
    checks.push(Check::new(
        "final_l1_error",
        last < 0.05 * mass,
        format!("{last:.6e} against {:.6e}", 0.05 * mass),
    ));
    let sups = report.column(|r| r.sup_norm).unwrap_or_default();
    let top = sups.iter().copied().fold(0.0, f64::max);
    checks.push(Check::new(
        "sup_norm_bounded",
        top <= 2.0 * limit.height,
        format!("max {top:.6e}, limit height {:.6e}", limit.height),
    ));
    let radii = report.column(|r| r.support_radius).unwrap_or_default();
    let wide = radii.iter().copied().fold(0.0, f64::max);
    let r_dom = report.rows[0].r_dom;
    checks.push(Check::new(
        "support_bounded",
        wide < 0.95 * r_dom,
        format!("max radius {wide:.6e}, R_dom {r_dom}"),
    ));
    let energies = report.column(|r| r.energy).unwrap_or_default();
    let fe = energies.last().copied().unwrap_or(f64::NAN);
    let rel = (fe - limit.energy).abs() / limit.energy.abs();
    checks.push(Check::new(
        "energy_to_limit",
        rel < 0.05,
        format!(
            "F_s = {fe:.6e}, F_0 = {:.6e}, relative gap {rel:.3e}",
            limit.energy
        ),
    ));
    if let Some(Some(rho)) = report.rows.last().map(|r| r.profile.as_ref()) {
        let f0 = free_energy_limit(&report.params, rho);
        checks.push(Check::new(
            "liminf_sampled",
            fe >= f0 - 0.01 * f0.abs(),
            format!("F_s at smallest s = {fe:.6e}, F_0(last profile) = {f0:.6e}"),
        ));
    }
    checks
}

/// The m = p′ sweep. Each s is solved on the base grid dilated by the
/// predicted scale 1/λ_* of the default start, so spreading and
/// concentrating branches stay resolved.
pub fn fair_limit_study(
    params: &ModelParams,
    s_list: &[f64],
    config: &SolverConfig,
    grid: &Arc<RadialGrid>,
    cache: Option<&OperatorCache>,
) -> Result<SweepReport> {
    check_s_list(params, s_list)?;
    config.validate()?;
    if !is_fair_exponent(params) {
        return Err(Error::Regime(format!(
            "the study needs m = p' = {}",
            params.p_conj()
        )));
    }
    let radius = 0.8 * (params.mass / grid.omega()).powf(1.0 / params.dim());
    let rows = per_s(params, s_list, grid, cache, |ps, op, sha| {
        let start =
            RadialDensity::profile(grid.clone(), ProfileKind::Indicator { radius }, ps.mass)?;
        let b = free_energy(ps, op, &start)?;
        let ls = energy::optimal_dilation(ps, &b)?;
        let op = op.rescaled(1.0 / ls)?;
        let cfg = SolverConfig {
            init: Some(ProfileKind::Indicator {
                radius: radius / ls,
            }),
            ..*config
        };
        SweepRow::from_report(ps.s, solve_el(ps, &cfg, &op)?, None, sha)
    });
    let mut report = SweepReport {
        params: *params,
        s_values: s_list.to_vec(),
        limit: None,
        rows,
        checks: Vec::new(),
    };
    report.checks = fair_checks(&report);
    Ok(report)
}

fn fair_checks(report: &SweepReport) -> Vec<Check> {
    let solved = report.all_rows_ok();
    let mut checks = vec![Check::new(
        "all_rows_converged",
        solved,
        format!("{} rows", report.rows.len()),
    )];
    if !solved {
        return checks;
    }
    let col = |f: fn(&SweepRow) -> Option<f64>| report.column(f).unwrap_or_default();
    let sups = col(|r| r.sup_norm);
    let radii = col(|r| r.support_radius);
    let p = &report.params;
    let mut push = |name: &str, xs: &[f64], decreasing: bool| {
        let t = trend(xs, decreasing, f64::INFINITY);
        checks.push(Check::new(
            name,
            t.holds,
            format!("{xs:?}, {} violations", t.violations),
        ));
    };
    if p.chi < p.p {
        push("sup_norm_decreasing", &sups, true);
    } else if p.chi > p.p {
        push("support_radius_decreasing", &radii, true);
        push("sup_norm_increasing", &sups, false);
        if let Some(rho) = report.rows.last().and_then(|r| r.profile.as_ref()) {
            let cells = rho.support_len();
            checks.push(Check::new(
                "final_support_resolved",
                cells >= 10,
                format!("{cells} occupied cells"),
            ));
        }
    } else {
        let fabs: Vec<f64> = col(|r| r.energy).iter().map(|e| e.abs()).collect();
        push("energy_magnitude_decreasing", &fabs, true);
        push("multiplier_decreasing", &col(|r| r.d_s), true);
    }
    checks
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub s: f64,
    pub energy: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaTable {
    pub limit_energy: f64,
    pub rows: Vec<GammaRow>,
    pub gap_trend: Trend,
    pub final_below_one_percent: bool,
}

/// ℱ_{s,p}(ρ) along s for a fixed ρ, against ℱ₀(ρ).
pub fn gamma_probe(
    params: &ModelParams,
    rho: &RadialDensity,
    s_list: &[f64],
    cache: Option<&OperatorCache>,
) -> Result<GammaTable> {
    check_s_list(params, s_list)?;
    if params.m <= params.p_conj() {
        return Err(Error::Regime(format!(
            "the probe needs m > p' = {}",
            params.p_conj()
        )));
    }
    let f0 = free_energy_limit(params, rho);
    let rows: Vec<GammaRow> = s_list
        .par_iter()
        .map(|&s| {
            let ps = params.with_s(s)?;
            let (op, _) = obtain_operator(cache, rho.grid(), ps.half_order())?;
            let e = free_energy(&ps, &op, rho)?.free_energy;
            let gap = (e - f0).abs();
            Ok(GammaRow {
                s,
                energy: e,
                gap,
                relative_gap: if f0 == 0.0 { gap } else { gap / f0.abs() },
            })
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let gap_trend = if gaps.iter().all(|g| *g == 0.0) {
        Trend {
            holds: true,
            violations: 0,
            worst: 0.0,
        }
    } else {
        trend(&gaps, true, f64::INFINITY)
    };
    let final_below_one_percent = rows.last().is_some_and(|r| r.relative_gap < 1e-2);
    Ok(GammaTable {
        limit_energy: f0,
        rows,
        gap_trend,
        final_below_one_percent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HstarRow {
    pub s: f64,
    pub hstar: f64,
    pub root: f64,
}

/// H*_{m,s} and H*^{1/s} along the sweep.
pub fn hstar_sweep(
    params: &ModelParams,
    s_list: &[f64],
    config: &SolverConfig,
    grid: &Arc<RadialGrid>,
    cache: Option<&OperatorCache>,
) -> Result<Vec<HstarRow>> {
    check_s_list(params, s_list)?;
    s_list
        .par_iter()
        .map(|&s| {
            let ps = params.with_s(s)?;
            let (op, _) = obtain_operator(cache, grid, ps.half_order())?;
            let h = crate::steady::hls_extremal(&ps, config, &op)?
                .energy
                .hls_quotient;
            Ok(HstarRow {
                s,
                hstar: h,
                root: h.powf(1.0 / s),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limit_profile_fixture() {
        let p = ModelParams::new(1, 0.4, 2.0, 3.0, 2.0, 2.0).unwrap();
        let grid = RadialGrid::uniform(1, 100, 2.0).unwrap();
        let l = limit_profile(&p, &grid).unwrap();
        assert!((l.height - 1.0).abs() < 1e-15);
        assert!((l.radius - 1.0).abs() < 1e-15);
        assert!((l.energy + 1.0).abs() < 1e-12);
        assert!((l.density.mass() - 2.0).abs() < 1e-12);
        assert!((energy::lambda_limit(&p, &l.density) - 2.0).abs() < 1e-8);
        assert!((energy::optimal_dilation_limit(&p, &l.density).unwrap() - 1.0).abs() < 1e-12);
        // an edge cell cut by R₀ keeps the mass exact
        let g = RadialGrid::uniform(3, 77, 1.7).unwrap();
        let q = ModelParams::new(3, 0.4, 2.0, 2.5, 1.3, 2.0).unwrap();
        let l = limit_profile(&q, &g).unwrap();
        assert!((l.density.mass() - 2.0).abs() < 1e-12);
        assert!(l.energy < 0.0);
        assert!(limit_profile(&p.with_m(2.0).unwrap(), &grid).is_err());
        assert!(limit_profile(&p, &g).is_err());
    }

    #[test]
    fn height_is_one_at_chi_equal_p() {
        for m in [2.5, 3.0, 4.0] {
            let p = ModelParams::new(2, 0.3, 2.0, m, 2.0, 1.0).unwrap();
            let l = limit_profile(&p, &RadialGrid::uniform(2, 50, 2.0).unwrap()).unwrap();
            assert!((l.height - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn non_indicators_sit_below_the_mass() {
        let p = ModelParams::new(1, 0.4, 2.0, 3.0, 2.0, 2.0).unwrap();
        let grid = RadialGrid::uniform(1, 200, 3.0).unwrap();
        for kind in [
            ProfileKind::Gaussian { width: 0.4 },
            ProfileKind::Bump { radius: 1.5 },
        ] {
            let rho = RadialDensity::profile(grid.clone(), kind, 2.0).unwrap();
            assert!(energy::lambda_limit(&p, &rho) < 2.0 - 1e-6);
        }
    }

    #[test]
    fn trend_allowance() {
        assert!(trend(&[4.0, 3.0, 2.0, 1.0], true, 0.1).holds);
        assert!(trend(&[4.0, 3.0, 3.1, 1.0], true, 0.1).holds);
        assert!(!trend(&[4.0, 3.0, 3.5, 1.0], true, 0.1).holds);
        assert!(!trend(&[4.0, 4.1, 3.0, 3.1], true, 0.1).holds);
        assert!(trend(&[1.0, 2.0], false, 0.1).holds);
    }

    #[test]
    fn gamma_probe_on_zero_and_gaussian() {
        let p = ModelParams::new(1, 0.4, 2.0, 3.0, 2.0, 2.0).unwrap();
        let grid = RadialGrid::uniform(1, 64, 3.0).unwrap();
        let z = RadialDensity::zeros(grid.clone());
        let t = gamma_probe(&p, &z, &[0.4, 0.1], None).unwrap();
        assert!(t.rows.iter().all(|r| r.energy == 0.0 && r.gap == 0.0));
        let grid = RadialGrid::uniform(1, 128, 8.0).unwrap();
        let g = RadialDensity::profile(grid, ProfileKind::Gaussian { width: 1.0 }, 2.0).unwrap();
        let t = gamma_probe(&p, &g, &[0.4, 0.2, 0.1, 0.05, 0.01, 0.001], None).unwrap();
        assert!(t.gap_trend.holds && t.gap_trend.violations == 0);
        assert!(t.final_below_one_percent);
    }

    #[test]
    fn bad_s_lists_are_rejected() {
        let p = ModelParams::new(1, 0.4, 2.0, 3.0, 2.0, 2.0).unwrap();
        let grid = RadialGrid::uniform(1, 32, 2.0).unwrap();
        let cfg = SolverConfig::default();
        assert!(sweep_s(&p, &[0.1, 0.2], &cfg, &grid, None).is_err());
        assert!(sweep_s(&p, &[], &cfg, &grid, None).is_err());
        assert!(sweep_s(&p, &[0.6], &cfg, &grid, None).is_err());
        assert!(fair_limit_study(&p, &[0.2], &cfg, &grid, None).is_err());
    }

    #[test]
    fn short_sweep_rows_and_csv() {
        let p = ModelParams::new(1, 0.4, 2.0, 3.0, 2.0, 2.0).unwrap();
        let grid = RadialGrid::uniform(1, 128, 2.0).unwrap();
        let r = sweep_s(&p, &[0.4, 0.2], &SolverConfig::default(), &grid, None).unwrap();
        assert!(r.all_rows_ok(), "{:?}", r.rows);
        let l1: Vec<f64> = r.rows.iter().map(|x| x.l1_err.unwrap()).collect();
        assert!(l1[1] < l1[0]);
        let csv = r.to_csv();
        assert!(csv.starts_with("s,L1_err,L2_err,energy,D_s,sup_norm,support_radius,status\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
