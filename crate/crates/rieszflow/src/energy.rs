//! Free energy, dilation scaling, HLS constants and regime classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ModelParams, RadialDensity};
use crate::riesz::{riesz_constant, RieszOperator};
use crate::special::unit_ball_volume;

/// Every functional value of one density.
///
/// `lambda_star` is absent in the critical case m = m_c, and `lambda_value`
/// and `kappa` are absent there as well since their exponents degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub norm_m_m: f64,
    pub interaction: f64,
    pub free_energy: f64,
    pub hls_quotient: f64,
    pub lambda_value: Option<f64>,
    pub lambda_star: Option<f64>,
    pub kappa: Option<f64>,
}

impl EnergyBreakdown {
    /// Assembles the breakdown from mass, ‖ρ‖_m^m and ‖K_{s/2}∗ρ‖_{p′}^{p′}.
    pub fn from_norms(params: &ModelParams, mass: f64, norm_m_m: f64, potential_norm: f64) -> Self {
        let (m, pc) = (params.m, params.p_conj());
        let interaction = potential_norm / pc;
        let free_energy = norm_m_m / (m - 1.0) - params.chi * interaction;
        let th = params.theta0();
        let hls_quotient = if potential_norm == 0.0 {
            0.0
        } else {
            potential_norm / (mass.powf(pc * th) * norm_m_m.powf(pc * (1.0 - th) / m))
        };
        let critical = params.is_critical();
        let lambda_star = (!critical && norm_m_m > 0.0 && potential_norm > 0.0)
            .then(|| dilation_factor(params, norm_m_m, potential_norm));
        let lambda_value = (!critical).then(|| lambda_functional(params, norm_m_m, potential_norm));
        EnergyBreakdown {
            norm_m_m,
            interaction,
            free_energy,
            hls_quotient,
            lambda_value,
            lambda_star,
            kappa: kappa(params),
        }
    }

    /// ‖K_{s/2}∗ρ‖_{p′}^{p′}.
    pub fn potential_norm(&self, params: &ModelParams) -> f64 {
        self.interaction * params.p_conj()
    }
}

fn dilation_factor(params: &ModelParams, norm_m_m: f64, potential_norm: f64) -> f64 {
    let ratio = params.chi / params.p_star() * potential_norm / norm_m_m;
    ratio.powf(1.0 / (params.dim() * (params.m - params.m_c())))
}

fn lambda_functional(params: &ModelParams, norm_m_m: f64, potential_norm: f64) -> f64 {
    let (m, mc) = (params.m, params.m_c());
    if potential_norm == 0.0 {
        return 0.0;
    }
    let e = 1.0 / (m - mc);
    (potential_norm.powf(m - 1.0) / norm_m_m.powf(mc - 1.0)).powf(e)
}

/// The constant κ with ℱ(ρ^{λ_*}) = κ·Λ(ρ); absent at m = m_c.
pub fn kappa(params: &ModelParams) -> Option<f64> {
    if params.is_critical() {
        return None;
    }
    let (m, mc, pc, ps) = (params.m, params.m_c(), params.p_conj(), params.p_star());
    let d = m - mc;
    Some(
        (params.chi / pc).powf((m - 1.0) / d) * (pc / ps).powf((mc - 1.0) / d) * (mc - m)
            / (m - 1.0),
    )
}

/// ‖ρ‖_m^m, ‖K_{s/2}∗ρ‖_{p′}^{p′} and the breakdown of ℱ_{s,p}(ρ).
pub fn free_energy(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho: &RadialDensity,
) -> Result<EnergyBreakdown> {
    check_operator(params, op_half)?;
    let u = op_half.potential(rho)?;
    let b = op_half.field_norm_pow(&u, params.p_conj());
    Ok(EnergyBreakdown::from_norms(
        params,
        rho.mass(),
        rho.lp_norm_pow(params.m),
        b,
    ))
}

pub(crate) fn check_operator(params: &ModelParams, op_half: &RieszOperator) -> Result<()> {
    params.validate()?;
    let a = params.half_order();
    if (op_half.order() - a).abs() > 1e-14 * a || op_half.grid().n_dim() != params.n_dim {
        return Err(Error::Domain(format!(
            "operator of order {} in dimension {} does not realize K_{{s/2}} for s = {}, N = {}",
            op_half.order(),
            op_half.grid().n_dim(),
            params.s,
            params.n_dim
        )));
    }
    Ok(())
}

/// ℱ₀(ρ) = ‖ρ‖_m^m/(m−1) − (χ/p′)‖ρ‖_{p′}^{p′}.
pub fn free_energy_limit(params: &ModelParams, rho: &RadialDensity) -> f64 {
    let pc = params.p_conj();
    rho.lp_norm_pow(params.m) / (params.m - 1.0) - params.chi / pc * rho.lp_norm_pow(pc)
}

/// λ_* minimizing λ ↦ ℱ(ρ^λ), from a breakdown.
pub fn optimal_dilation(params: &ModelParams, b: &EnergyBreakdown) -> Result<f64> {
    if params.is_critical() {
        return Err(Error::Regime(
            "optimal dilation is undefined at m = m_c".into(),
        ));
    }
    let pn = b.potential_norm(params);
    if !(b.norm_m_m > 0.0 && pn > 0.0) {
        return Err(Error::Domain("optimal dilation of the zero density".into()));
    }
    Ok(dilation_factor(params, b.norm_m_m, pn))
}

/// λ_* for the limit functional ℱ₀.
pub fn optimal_dilation_limit(params: &ModelParams, rho: &RadialDensity) -> Result<f64> {
    let (m, pc) = (params.m, params.p_conj());
    if (m - pc).abs() <= 1e-12 * pc {
        return Err(Error::Regime(
            "optimal dilation is undefined at m = p'".into(),
        ));
    }
    let (a, b) = (rho.lp_norm_pow(m), rho.lp_norm_pow(pc));
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain("optimal dilation of the zero density".into()));
    }
    Ok((params.chi / params.p * b / a).powf(1.0 / (params.dim() * (m - pc))))
}

/// Λ₀(ρ) = ‖ρ‖_{p′}^{p′(m−1)/(m−p′)} / ‖ρ‖_m^{m(p′−1)/(m−p′)}.
pub fn lambda_limit(params: &ModelParams, rho: &RadialDensity) -> f64 {
    let (m, pc) = (params.m, params.p_conj());
    let (a, b) = (rho.lp_norm_pow(m), rho.lp_norm_pow(pc));
    if b == 0.0 {
        return 0.0;
    }
    (b.powf(m - 1.0) / a.powf(pc - 1.0)).powf(1.0 / (m - pc))
}

/// κ₀ with ℱ₀(ρ^{λ_*}) = κ₀·Λ₀(ρ).
pub fn kappa_limit(params: &ModelParams) -> f64 {
    let (m, p, pc) = (params.m, params.p, params.p_conj());
    (params.chi / p).powf((m - 1.0) / (m - pc)) * (p - 1.0) * (pc - m) / (m - 1.0)
}

/// f_ρ(λ) = ℱ(ρ^λ) from the exact scaling of both terms.
pub fn dilation_profile(params: &ModelParams, b: &EnergyBreakdown, lambda: f64) -> f64 {
    let nd = params.dim();
    lambda.powf(nd * (params.m - 1.0)) * b.norm_m_m / (params.m - 1.0)
        - lambda.powf(nd * (params.m_c() - 1.0)) * params.chi * b.interaction
}

/// Explicit upper bound H_s for the sharp constant of
/// ‖K_{s/2}∗h‖_{p′} ≤ H_s‖h‖_{(p*_s)′}.
pub fn hls_upper_bound(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let (nd, s, p) = (params.dim(), params.s, params.p);
    let c = riesz_constant(params.n_dim, s / 2.0)?;
    let omega = unit_ball_volume(params.n_dim);
    let q = params.p_star_conj();
    let e = (nd - s) / nd;
    let bracket = (e / (1.0 - 1.0 / p)).powf(e) + (e / (1.0 - 1.0 / q)).powf(e);
    Ok(c * nd / s * omega.powf(e) / (p * q) * bracket)
}

/// (α_s, β_s) in ‖K_{s/2}∗h‖_∞ ≤ α_s‖h‖_q + β_s‖h‖_r.
pub fn linf_bound_constants(params: &ModelParams, q: f64, r: f64) -> Result<(f64, f64)> {
    let (nd, s) = (params.dim(), params.s);
    if !(q >= 1.0 && q < r) {
        return Err(Error::Domain(format!(
            "need 1 <= q < r, got q = {q}, r = {r}"
        )));
    }
    if !(s * q < nd && s * r > nd) {
        return Err(Error::Domain(format!(
            "need s*q < N < s*r, got s*q = {}, s*r = {}",
            s * q,
            s * r
        )));
    }
    let c = riesz_constant(params.n_dim, s / 2.0)?;
    let area = nd * unit_ball_volume(params.n_dim);
    let alpha = if q == 1.0 {
        c
    } else {
        let qc = q / (q - 1.0);
        c * (area / ((nd - s) * qc - nd)).powf(1.0 / qc)
    };
    let beta = if r.is_infinite() {
        c * area / s
    } else {
        let rc = r / (r - 1.0);
        c * (area / (nd - (nd - s) * rc)).powf(1.0 / rc)
    };
    Ok((alpha, beta))
}

/// Euler–Lagrange constants of an HLS extremal and of a minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElConstants {
    #[serde(rename = "A_s")]
    pub a_s: f64,
    #[serde(rename = "C_s")]
    pub c_s: f64,
    #[serde(rename = "D_s")]
    pub d_s: Option<f64>,
}

/// 𝒜_s and 𝒞_s of the extremal equation 𝒜_s h^{m−1} = (𝒦_{s,p}(h) − 𝒞_s)₊.
pub fn el_constants_extremal(
    params: &ModelParams,
    h: &RadialDensity,
    op_half: &RieszOperator,
) -> Result<ElConstants> {
    check_operator(params, op_half)?;
    if !params.above_hls_threshold() {
        return Err(Error::Regime(format!(
            "extremal constants need m > (p*_s)' = {}",
            params.p_star_conj()
        )));
    }
    let (l1, lm) = (h.mass(), h.lp_norm_pow(params.m));
    if !(l1 > 0.0) {
        return Err(Error::Domain(
            "extremal constants of the zero density".into(),
        ));
    }
    let b = op_half.field_norm_pow(&op_half.potential(h)?, params.p_conj());
    Ok(extremal_constants(params, l1, lm, b))
}

pub(crate) fn extremal_constants(params: &ModelParams, l1: f64, lm: f64, b: f64) -> ElConstants {
    let ratio = params.m_conj() / params.p_star();
    ElConstants {
        a_s: ratio * b / lm,
        c_s: (1.0 - ratio) * b / l1,
        d_s: None,
    }
}

/// 𝒟_s from both closed forms, plus the energy form when m > m_c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    pub value: f64,
    pub from_potential: f64,
    pub from_energy: Option<f64>,
    pub disagreement: bool,
}

/// 𝒟_s = ((p*_s − m′)/M)‖ρ‖_m^m, cross-checked against the other two forms.
pub fn el_constant_minimizer(
    params: &ModelParams,
    rho: &RadialDensity,
    op_half: &RieszOperator,
) -> Result<Multiplier> {
    let b = free_energy(params, op_half, rho)?;
    multiplier(params, &b)
}

pub(crate) fn multiplier(params: &ModelParams, b: &EnergyBreakdown) -> Result<Multiplier> {
    if !(params.mass > 0.0) {
        return Err(Error::param("M", "mass must be > 0"));
    }
    if params.m < params.m_c() && !params.is_critical() {
        return Err(Error::Regime("minimizer multiplier needs m >= m_c".into()));
    }
    let (m, mc, ps) = (params.m, params.m_c(), params.p_star());
    let coef = (ps - params.m_conj()) / params.mass;
    let value = coef * b.norm_m_m;
    let from_potential = coef * params.chi / ps * b.potential_norm(params);
    let from_energy =
        (!params.is_critical()).then(|| coef * (mc - 1.0) * (m - 1.0) / (mc - m) * b.free_energy);
    let rel = |x: f64| (x - value).abs() > 1e-3 * value.abs();
    let disagreement = rel(from_potential) || from_energy.is_some_and(rel);
    Ok(Multiplier {
        value,
        from_potential,
        from_energy,
        disagreement,
    })
}

/// The sharp-constant threshold M_c = (p*_s/(χH*))^{N/(sp′)}.
pub fn critical_mass(params: &ModelParams, hstar: f64) -> Result<f64> {
    if !(hstar.is_finite() && hstar > 0.0) {
        return Err(Error::param("Hstar", "sharp constant must be > 0"));
    }
    Ok((params.p_star() / (params.chi * hstar)).powf(params.dim() / (params.s * params.p_conj())))
}

/// Two-sided bound on ℱ at m = m_c.
pub fn fair_competition_bounds(
    params: &ModelParams,
    rho: &RadialDensity,
    op_half: &RieszOperator,
    hstar: f64,
) -> Result<(f64, f64)> {
    check_operator(params, op_half)?;
    if !params.is_critical() {
        return Err(Error::Regime(format!(
            "two-sided bound needs m = m_c = {}",
            params.m_c()
        )));
    }
    let mc_mass = critical_mass(params, hstar)?;
    let e = params.p_conj() * params.s / params.dim();
    let coef = params.chi / params.p_conj() * hstar;
    let a = rho.lp_norm_pow(params.m);
    let (x, y) = (mc_mass.powf(e), rho.mass().powf(e));
    Ok((coef * (x - y) * a, coef * (x + y) * a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Aggregation,
    Fair,
    Diffusion,
}

/// Infimum of ℱ over densities of mass M. `NegInfinity` is the explicit
/// sentinel for an unbounded functional; `FiniteNegative` records the sign
/// contract when the value itself is left to the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infimum {
    NegInfinity,
    FiniteNegative,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub infimum: Infimum,
    pub critical_mass: Option<f64>,
}

pub fn classify_regime(params: &ModelParams, hstar: Option<f64>) -> Result<RegimeReport> {
    params.validate()?;
    if params.is_critical() {
        let h = hstar.ok_or_else(|| Error::param("Hstar", "required when m = m_c"))?;
        let mc = critical_mass(params, h)?;
        let infimum = if params.mass <= mc {
            Infimum::Value(0.0)
        } else {
            Infimum::NegInfinity
        };
        return Ok(RegimeReport {
            regime: Regime::Fair,
            infimum,
            critical_mass: Some(mc),
        });
    }
    Ok(if params.m < params.m_c() {
        RegimeReport {
            regime: Regime::Aggregation,
            infimum: Infimum::NegInfinity,
            critical_mass: None,
        }
    } else {
        RegimeReport {
            regime: Regime::Diffusion,
            infimum: Infimum::FiniteNegative,
            critical_mass: None,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{ProfileKind, RadialGrid};
    use crate::special::gamma;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn params(n: usize, s: f64, p: f64, m: f64, chi: f64, mass: f64) -> ModelParams {
        ModelParams::new(n, s, p, m, chi, mass).unwrap()
    }

    fn setup(pr: &ModelParams, n: usize, r: f64) -> (Arc<RadialGrid>, RieszOperator) {
        let g = RadialGrid::uniform(pr.n_dim, n, r).unwrap();
        let op = RieszOperator::build(g.clone(), pr.half_order()).unwrap();
        (g, op)
    }

    #[test]
    fn zero_density_has_zero_energy() {
        let pr = params(1, 0.4, 2.0, 3.0, 1.0, 1.0);
        let (g, op) = setup(&pr, 64, 2.0);
        let b = free_energy(&pr, &op, &RadialDensity::zeros(g.clone())).unwrap();
        assert_eq!(
            (
                b.norm_m_m,
                b.interaction,
                b.free_energy,
                b.hls_quotient,
                b.lambda_value
            ),
            (0.0, 0.0, 0.0, 0.0, Some(0.0))
        );
        assert!(b.lambda_star.is_none());
        assert!(optimal_dilation(&pr, &b).is_err());
        assert_eq!(free_energy_limit(&pr, &RadialDensity::zeros(g)), 0.0);
    }

    #[test]
    fn reconstruction_identity_is_exact() {
        let pr = params(1, 0.4, 2.0, 3.0, 1.3, 1.0);
        let (g, op) = setup(&pr, 256, 2.0);
        let rho = RadialDensity::profile(g, ProfileKind::Bump { radius: 1.0 }, 1.0).unwrap();
        let b = free_energy(&pr, &op, &rho).unwrap();
        assert_eq!(
            b.free_energy,
            b.norm_m_m / (pr.m - 1.0) - pr.chi * b.interaction
        );
        assert!(b.kappa.unwrap() < 0.0);
    }

    #[test]
    fn limit_functional_on_the_unit_indicator() {
        let pr = params(1, 0.4, 2.0, 3.0, 2.0, 2.0);
        let g = RadialGrid::uniform(1, 100, 2.0).unwrap();
        let rho =
            RadialDensity::profile(g.clone(), ProfileKind::Indicator { radius: 1.0 }, 2.0).unwrap();
        assert!((free_energy_limit(&pr, &rho) + 1.0).abs() < 1e-13);
        // m = p′ and χ = p = 2: the two coefficients cancel
        let flat = params(1, 0.4, 2.0, 2.0, 2.0, 1.0);
        let bump = RadialDensity::profile(g, ProfileKind::Bump { radius: 1.3 }, 1.0).unwrap();
        assert!(free_energy_limit(&flat, &bump).abs() < 1e-15);
    }

    #[test]
    fn dilation_factor_and_kappa() {
        let pr = params(1, 0.4, 2.0, 3.0, 1.0, 1.0);
        // ratio argument 2 gives 2^{1/1.8}
        let b = EnergyBreakdown::from_norms(&pr, 1.0, 1.0, 2.0 * pr.p_star() / pr.chi);
        assert!((b.lambda_star.unwrap() - 1.469_734_492_275_599).abs() < 1e-14);
        let b = EnergyBreakdown::from_norms(&pr, 1.0, 0.7, 0.7 * pr.p_star() / pr.chi);
        assert!((b.lambda_star.unwrap() - 1.0).abs() < 1e-15);

        let (g, op) = setup(&pr, 512, 3.0);
        for kind in [
            ProfileKind::Bump { radius: 1.0 },
            ProfileKind::Gaussian { width: 0.5 },
        ] {
            let rho = RadialDensity::profile(g.clone(), kind, 1.0).unwrap();
            let b = free_energy(&pr, &op, &rho).unwrap();
            let ls = optimal_dilation(&pr, &b).unwrap();
            let f = dilation_profile(&pr, &b, ls);
            assert!((f / (b.kappa.unwrap() * b.lambda_value.unwrap()) - 1.0).abs() < 1e-12);
            let h = 1e-5 * ls;
            let d =
                (dilation_profile(&pr, &b, ls + h) - dilation_profile(&pr, &b, ls - h)) / (2.0 * h);
            assert!((d * ls / f).abs() < 1e-8);
            // Λ relation
            let lhs = b
                .lambda_value
                .unwrap()
                .powf((pr.m - pr.m_c()) / (pr.m - 1.0))
                * b.norm_m_m.powf(pr.p_conj() * (1.0 - pr.theta0()) / pr.m);
            assert!((lhs / b.potential_norm(&pr) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_dilation_and_kappa() {
        let pr = params(1, 0.4, 2.0, 3.0, 2.0, 2.0);
        let g = RadialGrid::uniform(1, 400, 4.0).unwrap();
        let rho = RadialDensity::profile(g, ProfileKind::Gaussian { width: 0.6 }, 2.0).unwrap();
        let ls = optimal_dilation_limit(&pr, &rho).unwrap();
        let (m, pc, nd) = (pr.m, pr.p_conj(), pr.dim());
        let f = |l: f64| {
            l.powf(nd * (m - 1.0)) * rho.lp_norm_pow(m) / (m - 1.0)
                - l.powf(nd * (pc - 1.0)) * pr.chi / pc * rho.lp_norm_pow(pc)
        };
        assert!((f(ls) / (kappa_limit(&pr) * lambda_limit(&pr, &rho)) - 1.0).abs() < 1e-12);
        assert!(f(ls * 1.01) > f(ls) && f(ls / 1.01) > f(ls));
        assert!(lambda_limit(&pr, &rho) < pr.mass);
    }

    #[test]
    fn hls_bound_values() {
        // frozen: N = 1, p = 2
        for (s, v) in [
            (0.4, 1.92216),
            (0.2, 1.27292),
            (0.1, 1.12364),
            (0.05, 1.06025),
            (0.001, 1.00119),
        ] {
            let h = hls_upper_bound(&params(1, s, 2.0, 3.0, 1.0, 1.0)).unwrap();
            assert!((h / v - 1.0).abs() < 1e-5, "s = {s}: {h}");
        }
        let seq: Vec<f64> = [0.2, 0.1, 0.05, 0.01]
            .iter()
            .map(|&s| hls_upper_bound(&params(1, s, 2.0, 3.0, 1.0, 1.0)).unwrap())
            .collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
        for s in [0.1, 0.05, 0.01] {
            let h = hls_upper_bound(&params(1, s, 2.0, 3.0, 1.0, 1.0)).unwrap();
            assert!(h.powf(1.0 / s) < 4.0);
        }
        let a = hls_upper_bound(&params(1, 0.4, 2.0, 3.0, 1.0, 1.0)).unwrap();
        assert_eq!(
            a,
            hls_upper_bound(&params(1, 0.4, 2.0, 3.0, 1.0, 1.0)).unwrap()
        );
    }

    #[test]
    fn linf_constants_limits() {
        let pr = params(1, 0.01, 2.0, 3.0, 1.0, 1.0);
        let (alpha, beta) = linf_bound_constants(&pr, 1.0, f64::INFINITY).unwrap();
        assert!((beta - 1.0).abs() < 1e-2);
        // α_s = c_{N,s/2}, so α_s/s tends to half of π^{−N/2}Γ(N/2)
        assert!((alpha / pr.s - 0.5).abs() < 1e-2);
        let lim = 0.5 * PI.powf(-0.5) * gamma(0.5);
        assert!((alpha / pr.s / lim - 1.0).abs() < 1e-2);
        assert!(linf_bound_constants(&params(1, 0.4, 2.0, 3.0, 1.0, 1.0), 1.0, 2.0).is_err());
        assert!(linf_bound_constants(&pr, 2.0, 1.5).is_err());
        let (a2, b2) = linf_bound_constants(&params(1, 0.4, 2.0, 3.0, 1.0, 1.0), 2.0, 4.0).unwrap();
        assert!(a2 > 0.0 && b2 > 0.0);
    }

    #[test]
    fn extremal_constants_split() {
        let pr = params(3, 1.0, 2.0, 2.0, 1.0, 1.0);
        assert!((pr.m_conj() / pr.p_star() - 1.0 / 3.0).abs() < 1e-15);
        assert!((pr.theta0() - 2.0 / 3.0).abs() < 1e-15);
        let th = 1.0 / pr.p_star_conj() * (pr.m - pr.p_star_conj()) / (pr.m - 1.0);
        assert!((th - pr.theta0()).abs() < 1e-15);
        let c = extremal_constants(&pr, 1.0, 1.0, 0.9);
        assert!((c.a_s + c.c_s - 0.9).abs() < 1e-15);
        assert!((c.c_s / c.a_s - 2.0).abs() < 1e-14);

        let pr = params(1, 0.4, 2.0, 3.0, 1.0, 1.0);
        let (g, op) = setup(&pr, 256, 2.0);
        let h = RadialDensity::profile(g, ProfileKind::Bump { radius: 1.0 }, 1.0).unwrap();
        let c1 = el_constants_extremal(&pr, &h, &op).unwrap();
        let c2 = el_constants_extremal(&pr, &h.scaled(2.0).unwrap(), &op).unwrap();
        let pc = pr.p_conj();
        assert!((c2.a_s / c1.a_s / 2f64.powf(pc - pr.m) - 1.0).abs() < 1e-12);
        assert!((c2.c_s / c1.c_s / 2f64.powf(pc - 1.0) - 1.0).abs() < 1e-12);
        let low = params(1, 0.4, 2.0, 1.1, 1.0, 1.0);
        assert!(matches!(
            el_constants_extremal(&low, &h, &op),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn multiplier_forms_agree_on_identity() {
        let pr = params(1, 0.4, 2.0, 3.0, 1.0, 1.0);
        let a = 0.8;
        let b = EnergyBreakdown::from_norms(&pr, 1.0, a, a * pr.p_star() / pr.chi);
        let d = multiplier(&pr, &b).unwrap();
        assert!(!d.disagreement);
        assert!((d.from_potential / d.value - 1.0).abs() < 1e-14);
        assert!((d.from_energy.unwrap() / d.value - 1.0).abs() < 1e-13);
        // minimizer relation
        let rel = pr.p_star() / pr.p_conj() * (pr.m_c() - pr.m) / (pr.m - 1.0) * a;
        assert!((b.free_energy / rel - 1.0).abs() < 1e-13);
        let off = EnergyBreakdown::from_norms(&pr, 1.0, a, 2.0 * a * pr.p_star() / pr.chi);
        assert!(multiplier(&pr, &off).unwrap().disagreement);
    }

    #[test]
    fn regimes() {
        let agg = params(1, 0.4, 2.0, 1.1, 1.0, 1.0);
        assert_eq!(
            classify_regime(&agg, None).unwrap().infimum,
            Infimum::NegInfinity
        );
        let dif = params(1, 0.4, 2.0, 3.0, 1.0, 1.0);
        let r = classify_regime(&dif, None).unwrap();
        assert_eq!(
            (r.regime, r.infimum),
            (Regime::Diffusion, Infimum::FiniteNegative)
        );
        let base = params(1, 0.4, 2.0, 1.2, 1.0, 1.0);
        assert!(base.is_critical());
        assert!(classify_regime(&base, None).is_err());
        let hstar = 0.9;
        let chi = base.p_star() / hstar;
        let fair = base.with_chi(chi).unwrap();
        let r = classify_regime(&fair, Some(hstar)).unwrap();
        assert!((r.critical_mass.unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(r.infimum, Infimum::Value(0.0));
        let heavy = fair.with_mass(2.0).unwrap();
        assert_eq!(
            classify_regime(&heavy, Some(hstar)).unwrap().infimum,
            Infimum::NegInfinity
        );
        let json = serde_json::to_string(&classify_regime(&agg, None).unwrap()).unwrap();
        assert!(json.contains("\"neg_infinity\""));
    }

    #[test]
    fn fair_bounds_signs() {
        let pr = params(1, 0.4, 2.0, 1.2, 1.0, 1.0);
        let (g, op) = setup(&pr, 128, 2.0);
        let rho = RadialDensity::profile(g, ProfileKind::Bump { radius: 1.0 }, 1.0).unwrap();
        let hstar = 1.0;
        let mc = critical_mass(&pr, hstar).unwrap();
        let at = fair_competition_bounds(&pr, &rho.scaled(mc).unwrap(), &op, hstar).unwrap();
        assert!(at.0.abs() < 1e-12 * at.1);
        let below =
            fair_competition_bounds(&pr, &rho.scaled(0.5 * mc).unwrap(), &op, hstar).unwrap();
        assert!(below.0 > 0.0);
        let off = params(1, 0.4, 2.0, 3.0, 1.0, 1.0);
        assert!(fair_competition_bounds(&off, &rho, &op, hstar).is_err());
    }

    #[test]
    fn m_c_tends_to_p_conj() {
        for s in [1e-3, 1e-6, 1e-9] {
            let pr = params(2, s, 3.0, 2.0, 1.0, 1.0);
            assert!((pr.m_c() - pr.p_conj()).abs() < pr.p_conj() * s / 2.0 + 1e-12);
            let slope = (pr.m_c() - pr.p_conj()) / s;
            assert!((slope + pr.p_conj() / 2.0).abs() < 1e-6);
        }
    }
}
