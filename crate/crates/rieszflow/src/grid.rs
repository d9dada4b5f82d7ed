//! Radial grids, densities and the model parameters they are tied to.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::unit_ball_volume;

/// Values below this are treated as exact zeros when detecting supports.
pub const CLAMP: f64 = 1e-14;

/// Physical and analytic parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n_dim: usize,
    pub s: f64,
    pub p: f64,
    pub m: f64,
    pub chi: f64,
    #[serde(rename = "M")]
    pub mass: f64,
}

impl ModelParams {
    pub fn new(n_dim: usize, s: f64, p: f64, m: f64, chi: f64, mass: f64) -> Result<Self> {
        let params = ModelParams {
            n_dim,
            s,
            p,
            m,
            chi,
            mass,
        };
        params.validate()?;
        Ok(params)
    }

    /// Every violated constraint, as `(name, message)` pairs.
    pub fn violations(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let n = self.n_dim as f64;
        if self.n_dim == 0 {
            out.push(("N", "N must be >= 1".to_string()));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            out.push(("p", "p must satisfy 1 < p < inf".to_string()));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            out.push(("s", "s must be > 0".to_string()));
        } else if self.p.is_finite() && self.s * self.p >= n {
            out.push(("s", "s*p must be < N".to_string()));
        }
        if !(self.m.is_finite() && self.m > 1.0) {
            out.push(("m", "m must be > 1".to_string()));
        }
        if !(self.chi.is_finite() && self.chi > 0.0) {
            out.push(("chi", "chi must be > 0".to_string()));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            out.push(("M", "M must be > 0".to_string()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        match v.first() {
            None => Ok(()),
            Some((name, _)) => {
                let msgs: Vec<&str> = v.iter().map(|(_, m)| m.as_str()).collect();
                Err(Error::param(name, msgs.join("; ")))
            }
        }
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::new(self.n_dim, s, self.p, self.m, self.chi, self.mass)
    }

    pub fn with_m(&self, m: f64) -> Result<Self> {
        Self::new(self.n_dim, self.s, self.p, m, self.chi, self.mass)
    }

    pub fn with_chi(&self, chi: f64) -> Result<Self> {
        Self::new(self.n_dim, self.s, self.p, self.m, chi, self.mass)
    }

    pub fn with_mass(&self, mass: f64) -> Result<Self> {
        Self::new(self.n_dim, self.s, self.p, self.m, self.chi, mass)
    }

    pub fn dim(&self) -> f64 {
        self.n_dim as f64
    }

    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn p_star(&self) -> f64 {
        let n = self.dim();
        n * self.p / (n - self.s * self.p)
    }

    pub fn p_star_conj(&self) -> f64 {
        let ps = self.p_star();
        ps / (ps - 1.0)
    }

    pub fn m_c(&self) -> f64 {
        self.p_conj() * (1.0 - self.s / self.dim())
    }

    /// m' = m/(m-1).
    pub fn m_conj(&self) -> f64 {
        self.m / (self.m - 1.0)
    }

    pub fn theta0(&self) -> f64 {
        1.0 - self.m_conj() / self.p_star()
    }

    /// Kernel order of the half operator, a = s/2.
    pub fn half_order(&self) -> f64 {
        0.5 * self.s
    }

    /// Whether m lies strictly above (p*)′, where extremals have compact support.
    pub fn above_hls_threshold(&self) -> bool {
        self.m > self.p_star_conj()
    }

    /// Whether m equals m_c up to rounding.
    pub fn is_critical(&self) -> bool {
        (self.m - self.m_c()).abs() <= 1e-12 * self.m_c()
    }
}

/// Uniform radial grid of cells on [0, R_dom].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    n_dim: usize,
    r_dom: f64,
    dr: f64,
    omega: f64,
    nodes: Vec<f64>,
    edges: Vec<f64>,
    volumes: Vec<f64>,
}

/// JSON descriptor of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub n_dim: usize,
    pub n: usize,
    #[serde(rename = "R_dom")]
    pub r_dom: f64,
}

impl RadialGrid {
    pub fn uniform(n_dim: usize, n: usize, r_dom: f64) -> Result<Arc<Self>> {
        if n_dim == 0 {
            return Err(Error::param("N", "N must be >= 1"));
        }
        if n < 2 {
            return Err(Error::param("n", "grid needs at least 2 cells"));
        }
        if !(r_dom.is_finite() && r_dom > 0.0) {
            return Err(Error::param("R_dom", "R_dom must be > 0"));
        }
        let dr = r_dom / n as f64;
        let omega = unit_ball_volume(n_dim);
        let edges: Vec<f64> = (0..=n).map(|i| i as f64 * dr).collect();
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dr).collect();
        let nd = n_dim as i32;
        let volumes = edges
            .windows(2)
            .map(|e| omega * (e[1].powi(nd) - e[0].powi(nd)))
            .collect();
        Ok(Arc::new(RadialGrid {
            n_dim,
            r_dom,
            dr,
            omega,
            nodes,
            edges,
            volumes,
        }))
    }

    pub fn from_spec(spec: GridSpec) -> Result<Arc<Self>> {
        Self::uniform(spec.n_dim, spec.n, spec.r_dom)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n_dim: self.n_dim,
            n: self.len(),
            r_dom: self.r_dom,
        }
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn r_dom(&self) -> f64 {
        self.r_dom
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    /// Unit-ball volume ω_N.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Surface area of the unit sphere, N·ω_N.
    pub fn sphere_area(&self) -> f64 {
        self.n_dim as f64 * self.omega
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Area of the sphere through edge `i` (edge 0 is the origin).
    pub fn face_area(&self, i: usize) -> f64 {
        self.sphere_area() * self.edges[i].powi(self.n_dim as i32 - 1)
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.n_dim == other.n_dim && self.len() == other.len() && self.r_dom == other.r_dom
    }
}

/// Analytic fixtures for [`RadialDensity::profile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileKind {
    Indicator { radius: f64 },
    Gaussian { width: f64 },
    Bump { radius: f64 },
}

impl ProfileKind {
    /// The same shape with its length scale multiplied by `f`.
    pub fn scaled(self, f: f64) -> Self {
        match self {
            ProfileKind::Indicator { radius } => ProfileKind::Indicator { radius: radius * f },
            ProfileKind::Gaussian { width } => ProfileKind::Gaussian { width: width * f },
            ProfileKind::Bump { radius } => ProfileKind::Bump { radius: radius * f },
        }
    }

    /// Radius beyond which the shape is negligible.
    pub fn extent(self) -> f64 {
        match self {
            ProfileKind::Indicator { radius } | ProfileKind::Bump { radius } => radius,
            ProfileKind::Gaussian { width } => 6.0 * width,
        }
    }
}

/// Nonnegative radial profile sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

/// Result of a mass-invariant dilation.
#[derive(Debug, Clone)]
pub struct Dilation {
    pub density: RadialDensity,
    /// mass(dilated) − mass(original).
    pub mass_defect: f64,
}

impl RadialDensity {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain(format!(
                "density value {} at cell {i} is not a finite nonnegative number",
                values[i]
            )));
        }
        Ok(RadialDensity { grid, values })
    }

    /// Builds from values without validation; negatives and tiny values are clamped to 0.
    pub(crate) fn from_clamped(grid: Arc<RadialGrid>, mut values: Vec<f64>) -> Self {
        for v in &mut values {
            if !(*v >= CLAMP) {
                *v = 0.0;
            }
        }
        RadialDensity { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        RadialDensity {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Named analytic profile normalized to `mass` by quadrature.
    pub fn profile(grid: Arc<RadialGrid>, kind: ProfileKind, mass: f64) -> Result<Self> {
        if !(mass.is_finite() && mass >= 0.0) {
            return Err(Error::param("M", "mass must be finite and >= 0"));
        }
        let r_dom = grid.r_dom();
        let shape: Box<dyn Fn(f64) -> f64> = match kind {
            ProfileKind::Indicator { radius } => {
                check_scale("radius", radius)?;
                if radius > r_dom {
                    return Err(Error::Truncation(format!(
                        "indicator radius {radius} exceeds R_dom {r_dom}"
                    )));
                }
                Box::new(move |r| if r < radius { 1.0 } else { 0.0 })
            }
            ProfileKind::Bump { radius } => {
                check_scale("radius", radius)?;
                if radius > r_dom {
                    return Err(Error::Truncation(format!(
                        "bump radius {radius} exceeds R_dom {r_dom}"
                    )));
                }
                Box::new(move |r| {
                    let x = r / radius;
                    if x < 1.0 {
                        (1.0 - 1.0 / (1.0 - x * x)).exp()
                    } else {
                        0.0
                    }
                })
            }
            ProfileKind::Gaussian { width } => {
                check_scale("width", width)?;
                let x = r_dom / width;
                // Mass fraction beyond R_dom decays like exp(-x²); require it below 1e-10.
                if x * x < 25.0 + 2.0 * grid.n_dim() as f64 * x.max(1.0).ln() {
                    return Err(Error::Truncation(format!(
                        "gaussian width {width} is not resolved inside R_dom {r_dom}"
                    )));
                }
                Box::new(move |r| (-(r / width).powi(2)).exp())
            }
        };
        let raw: Vec<f64> = grid.nodes().iter().map(|&r| shape(r)).collect();
        let m: f64 = raw.iter().zip(grid.volumes()).map(|(v, w)| v * w).sum();
        if m <= 0.0 {
            return Err(Error::Truncation(
                "profile support is not resolved by the grid".into(),
            ));
        }
        let scale = mass / m;
        Ok(RadialDensity {
            grid,
            values: raw.into_iter().map(|v| v * scale).collect(),
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.volumes())
            .map(|(v, w)| v * w)
            .sum()
    }

    /// ‖ρ‖_q^q for finite q.
    pub fn lp_norm_pow(&self, q: f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.volumes())
            .map(|(v, w)| pow0(*v, q) * w)
            .sum()
    }

    /// ‖ρ‖_q for q ≥ 1 or q = ∞.
    pub fn lp_norm(&self, q: f64) -> Result<f64> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::param("q", format!("norm exponent {q} must be >= 1")));
        }
        if q.is_infinite() {
            return Ok(self.sup());
        }
        Ok(self.lp_norm_pow(q).powf(1.0 / q))
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::param("alpha", "scale factor must be >= 0"));
        }
        Ok(RadialDensity {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * alpha).collect(),
        })
    }

    /// Index one past the last cell with a nonzero value.
    pub fn support_len(&self) -> usize {
        self.values
            .iter()
            .rposition(|&v| v > 0.0)
            .map_or(0, |i| i + 1)
    }

    /// Outer edge of the last occupied cell.
    pub fn support_radius(&self) -> f64 {
        self.grid.edges()[self.support_len()]
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// Mass of the piecewise-constant profile inside radius `r`.
    fn cumulative_mass(&self, prefix: &[f64], r: f64) -> f64 {
        let g = &self.grid;
        if r <= 0.0 {
            return 0.0;
        }
        let k = ((r / g.dr()).floor() as usize).min(g.len());
        if k >= g.len() {
            return prefix[g.len()];
        }
        let nd = g.n_dim() as i32;
        prefix[k] + self.values[k] * g.omega() * (r.powi(nd) - g.edges()[k].powi(nd))
    }

    /// Mass-invariant dilation ρ^λ(r) = λ^N ρ(λr) on the same grid.
    ///
    /// The profile is read as piecewise constant on cells and each new cell
    /// receives the exact mass of its preimage shell, so mass is conserved
    /// up to roundoff whenever the image stays inside the domain. Fails when
    /// more than 1e-6·mass would leave the domain.
    pub fn dilate(&self, lambda: f64) -> Result<Self> {
        self.dilate_with_report(lambda).map(|d| d.density)
    }

    pub fn dilate_with_report(&self, lambda: f64) -> Result<Dilation> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", "dilation factor must be > 0"));
        }
        if lambda == 1.0 {
            return Ok(Dilation {
                density: self.clone(),
                mass_defect: 0.0,
            });
        }
        let g = &self.grid;
        let mut prefix = Vec::with_capacity(g.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(g.volumes()) {
            acc += v * w;
            prefix.push(acc);
        }
        let mass = acc;
        let lost = mass - self.cumulative_mass(&prefix, lambda * g.r_dom());
        if lost > 1e-6 * mass {
            return Err(Error::Truncation(format!(
                "dilation by {lambda} pushes mass {lost:.3e} beyond R_dom"
            )));
        }
        let cm: Vec<f64> = g
            .edges()
            .iter()
            .map(|&e| self.cumulative_mass(&prefix, lambda * e))
            .collect();
        let values: Vec<f64> = cm
            .windows(2)
            .zip(g.volumes())
            .map(|(c, w)| (c[1] - c[0]).max(0.0) / w)
            .collect();
        let density = RadialDensity::from_clamped(g.clone(), values);
        let mass_defect = density.mass() - mass;
        Ok(Dilation {
            density,
            mass_defect,
        })
    }

    /// Radially symmetric nonincreasing rearrangement.
    pub fn rearrange(&self) -> Self {
        if self.is_nonincreasing() {
            return self.clone();
        }
        let g = &self.grid;
        let mut pairs: Vec<(f64, f64)> = self
            .values
            .iter()
            .copied()
            .zip(g.volumes().iter().copied())
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        if g.n_dim() == 1 {
            let values = pairs.into_iter().map(|p| p.0).collect();
            return RadialDensity {
                grid: g.clone(),
                values,
            };
        }
        // Unequal volumes: average the sorted level sets over each target shell.
        let mut values = Vec::with_capacity(g.len());
        let mut k = 0;
        let mut left = pairs[0].1;
        for &vol in g.volumes() {
            let mut need = vol;
            let mut acc = 0.0;
            while need > 0.0 && k < pairs.len() {
                let take = need.min(left);
                acc += pairs[k].0 * take;
                need -= take;
                left -= take;
                if left <= 1e-300 * vol {
                    k += 1;
                    if k < pairs.len() {
                        left = pairs[k].1;
                    }
                }
            }
            values.push(acc / vol);
        }
        for i in 1..values.len() {
            if values[i] > values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        RadialDensity {
            grid: g.clone(),
            values,
        }
    }

    /// Volume-weighted L¹ distance between two densities on the same grid.
    pub fn l1_distance(&self, other: &RadialDensity) -> Result<f64> {
        self.check_grid(other.grid())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.volumes())
            .map(|((a, b), w)| (a - b).abs() * w)
            .sum())
    }

    /// Volume-weighted Lq distance.
    pub fn lq_distance(&self, other: &RadialDensity, q: f64) -> Result<f64> {
        self.check_grid(other.grid())?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.volumes())
            .map(|((a, b), w)| (a - b).abs().powf(q) * w)
            .sum::<f64>()
            .powf(1.0 / q))
    }

    pub(crate) fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "density on {:?}, operator on {:?}",
                self.grid.spec(),
                grid.spec()
            )))
        }
    }

    /// CSV with header `r,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,value\n");
        for (r, v) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(out, "{r:.17e},{v:.17e}");
        }
        out
    }
}

fn check_scale(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, "scale parameter must be > 0"))
    }
}

/// x^q with 0^q = 0 for q > 0.
#[inline]
pub fn pow0(x: f64, q: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if q == 1.0 {
        x
    } else if q == 2.0 {
        x * x
    } else {
        x.powf(q)
    }
}
