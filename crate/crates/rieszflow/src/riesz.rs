//! Riesz kernel constants and the radial convolution operator.
//!
//! The operator acts on densities read as piecewise constant on grid cells
//! and returns cell averages of the potential (a Galerkin discretization),
//! which makes the volume-weighted bilinear form exactly symmetric.
//! Potentials are not compactly supported, so the operator also carries a
//! far-field representation: Gauss–Legendre nodes on geometric panels beyond
//! R_dom plus a monopole tail beyond the last panel. Norms of potentials and
//! nested convolutions integrate over all of ℝ^N.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pow0, ModelParams, RadialDensity, RadialGrid};
use crate::quadrature::{gl_rule, integrate, integrate_split};
use crate::special::{gamma, unit_ball_volume, Hyp2F1};

/// Ratio of the outermost far-field radius to R_dom.
const FAR_RATIO: f64 = 1e4;
const PANEL_ORDER: usize = 10;
/// Geometric levels in the first far-field panel.
const EDGE_LEVELS: usize = 12;
const QUAD_TOL: f64 = 1e-11;

/// c_{N,a} = π^{-N/2} 2^{-2a} Γ(N/2 − a)/Γ(a).
pub fn riesz_constant(n_dim: usize, a: f64) -> Result<f64> {
    let half = n_dim as f64 / 2.0;
    if n_dim == 0 || !(a > 0.0 && a < half) {
        return Err(Error::Domain(format!(
            "kernel order a = {a} must lie in (0, N/2) for N = {n_dim}"
        )));
    }
    Ok(PI.powf(-half) * 2f64.powf(-2.0 * a) * gamma(half - a) / gamma(a))
}

/// c_{N,a} together with its small-order slope 2/(N ω_N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    pub c_ns: f64,
    pub slope_limit: f64,
}

pub fn kernel_constants(n_dim: usize, a: f64) -> Result<KernelConstants> {
    Ok(KernelConstants {
        c_ns: riesz_constant(n_dim, a)?,
        slope_limit: 2.0 / (n_dim as f64 * unit_ball_volume(n_dim)),
    })
}

/// Angular kernel Φ_a(r, t) = c ∫_{S^{N−1}} |r e₁ − t ω|^{2a−N} dσ(ω).
#[derive(Debug, Clone, Copy)]
struct Angular {
    n_dim: usize,
    a: f64,
    c: f64,
    area: f64,
    hyp: Hyp2F1,
}

impl Angular {
    fn new(n_dim: usize, a: f64) -> Result<Self> {
        let nd = n_dim as f64;
        Ok(Angular {
            n_dim,
            a,
            c: riesz_constant(n_dim, a)?,
            area: nd * unit_ball_volume(n_dim),
            hyp: Hyp2F1::new(nd / 2.0 - a, 1.0 - a, nd / 2.0),
        })
    }

    fn phi(&self, r: f64, t: f64) -> f64 {
        self.phi_gap(r, t, (r - t).abs())
    }

    /// Φ(r, r + x), with the offset kept exact near the singularity.
    fn phi_offset(&self, r: f64, x: f64) -> f64 {
        self.phi_gap(r, r + x, x.abs())
    }

    fn phi_gap(&self, r: f64, t: f64, gap: f64) -> f64 {
        let nd = self.n_dim as f64;
        let e = 2.0 * self.a - nd;
        match self.n_dim {
            1 => self.c * (gap.powf(e) + (r + t).powf(e)),
            3 => {
                if r == 0.0 || t == 0.0 {
                    return self.c * self.area * (r + t).powf(e);
                }
                let b = 2.0 * self.a - 1.0;
                let lin = if b.abs() < 1e-9 {
                    ((r + t) / gap).ln()
                } else {
                    ((r + t).powf(b) - gap.powf(b)) / b
                };
                self.c * 2.0 * PI * lin / (r * t)
            }
            _ => {
                let (big, small) = if r >= t { (r, t) } else { (t, r) };
                if small == 0.0 {
                    return self.c * self.area * big.powf(e);
                }
                let z = (small / big).powi(2);
                let w = gap * (r + t) / (big * big);
                let f = self
                    .hyp
                    .eval(z, w)
                    .unwrap_or_else(|| self.angular_quadrature(small / big, gap / big));
                self.c * self.area * big.powf(e) * f
            }
        }
    }

    /// 2F1 factor by direct quadrature in the polar angle, q = small/big
    /// and `gap` = 1 − q.
    fn angular_quadrature(&self, q: f64, gap: f64) -> f64 {
        let nd = self.n_dim as f64;
        let e = 2.0 * self.a - nd;
        let f = |th: f64| {
            let half = (0.5 * th).sin();
            (gap * gap + 4.0 * q * half * half).powf(e / 2.0) * th.sin().powf(nd - 2.0)
        };
        let g = gap.max(1e-300);
        let breaks = [g, 10.0 * g, 100.0 * g];
        let v = match integrate_split(f, 0.0, PI, &breaks, 1e-12) {
            Ok(v) | Err((v, _)) => v,
        };
        // normalize by ∫ sin^{N−2}
        let norm = PI.sqrt() * gamma((nd - 1.0) / 2.0) / gamma(nd / 2.0);
        v / norm
    }
}

/// A radial field known on the grid cells, on the far-field nodes, and as a
/// power-law tail A·t^{−γ} beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub inner: Vec<f64>,
    pub outer: Vec<f64>,
    pub tail_coeff: f64,
    pub tail_decay: f64,
}

impl Field {
    /// Pointwise power with 0^q = 0.
    pub fn powf(&self, q: f64) -> Field {
        Field {
            inner: self.inner.iter().map(|v| pow0(*v, q)).collect(),
            outer: self.outer.iter().map(|v| pow0(*v, q)).collect(),
            tail_coeff: pow0(self.tail_coeff, q),
            tail_decay: self.tail_decay * q,
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.inner.iter_mut().for_each(|v| *v *= alpha);
        self.outer.iter_mut().for_each(|v| *v *= alpha);
        self.tail_coeff *= alpha;
    }

    pub fn sup(&self) -> f64 {
        self.inner
            .iter()
            .chain(&self.outer)
            .copied()
            .fold(0.0, f64::max)
    }
}

/// Dense Galerkin realization of K_a∗ on a radial grid.
#[derive(Debug, Clone)]
pub struct RieszOperator {
    grid: Arc<RadialGrid>,
    order: f64,
    c: f64,
    weights: Arc<Vec<f64>>,
    far_nodes: Vec<f64>,
    far_volumes: Vec<f64>,
    far_eval: Arc<Vec<f64>>,
    r_far: f64,
    gain: f64,
}

/// Raw arrays of an operator, used by the on-disk cache.
#[derive(Debug, Clone)]
pub(crate) struct OperatorParts {
    pub order: f64,
    pub c: f64,
    pub weights: Vec<f64>,
    pub far_nodes: Vec<f64>,
    pub far_volumes: Vec<f64>,
    pub far_eval: Vec<f64>,
    pub r_far: f64,
}

fn gl_order(ratio: f64) -> usize {
    if ratio >= 64.0 {
        3
    } else if ratio >= 16.0 {
        4
    } else if ratio >= 6.0 {
        6
    } else {
        10
    }
}

/// ∫_A^B ∫_C^D |x − y|^β dy dx for ordered intervals.
fn box_abs_power(beta: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let f2 = |x: f64| x.abs().powf(beta + 2.0) / ((beta + 1.0) * (beta + 2.0));
    f2(b - c) - f2(a - c) - f2(b - d) + f2(a - d)
}

/// ∫_A^B ∫_C^D (x + y)^β dy dx.
fn box_sum_power(beta: f64, a: f64, b: f64, c: f64, d: f64) -> f64 {
    let f2 = |x: f64| x.abs().powf(beta + 2.0) / ((beta + 1.0) * (beta + 2.0));
    f2(b + d) - f2(b + c) - f2(a + d) + f2(a + c)
}

/// ∫_I ∫_J (rt)^{N−1} Φ(r, t) dt dr for touching or identical cells.
///
/// Integrates in the offset x = t − r, which carries the whole singularity
/// at x = 0: geometric panels toward 0 in x, a smooth rule in r, and the
/// leading power law for the innermost sliver.
fn diagonal_block(ang: &Angular, nd: i32, ci: (f64, f64), cj: (f64, f64)) -> f64 {
    let ri = gl_rule(12);
    let f = |x: f64| -> f64 {
        let lo = ci.0.max(cj.0 - x);
        let hi = ci.1.min(cj.1 - x);
        if hi <= lo {
            return 0.0;
        }
        let panel = |lo: f64, hi: f64| -> f64 {
            let (h, m) = (0.5 * (hi - lo), 0.5 * (hi + lo));
            let mut acc = 0.0;
            for (u, w) in ri.0.iter().zip(&ri.1) {
                let r = m + h * u;
                acc += w * ang.phi_offset(r, x) * (r * (r + x)).powi(nd - 1);
            }
            acc * h
        };
        // near the origin the angular average changes character at r ~ |x|
        let floor = lo.max(0.25 * x.abs());
        let mut acc = 0.0;
        let mut top = hi;
        while top > 4.0 * floor && lo < x.abs() {
            acc += panel(0.25 * top, top);
            top *= 0.25;
        }
        acc + panel(lo, top)
    };
    let expo = 2.0 * ang.a - 1.0;
    let toward_zero = |len: f64, sign: f64| -> f64 {
        let mut acc = 0.0;
        let mut hi = len;
        for _ in 0..24 {
            let lo = 0.25 * hi;
            acc += gl_line(|x| f(sign * x), lo, hi, 10);
            hi = lo;
        }
        acc + f(sign * hi) * hi / (expo + 1.0)
    };
    let width = ci.1 - ci.0;
    if ci == cj {
        2.0 * toward_zero(width, 1.0)
    } else {
        // touching cells with cj above ci: x ∈ (0, 2h) with a kink at x = h
        toward_zero(width, 1.0) + gl_line(f, width, cj.1 - ci.0, 16)
    }
}

/// Product Gauss–Legendre rule for ∫_{I}∫_{J} f over two intervals.
fn gl_box<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, c: f64, d: f64, order: usize) -> f64 {
    let (x, w) = gl_rule(order);
    let (hr, mr) = (0.5 * (b - a), 0.5 * (a + b));
    let (ht, mt) = (0.5 * (d - c), 0.5 * (c + d));
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let r = mr + hr * xi;
        let mut inner = 0.0;
        for (xj, wj) in x.iter().zip(w) {
            inner += wj * f(r, mt + ht * xj);
        }
        acc += wi * inner;
    }
    acc * hr * ht
}

fn gl_line<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, order: usize) -> f64 {
    let (x, w) = gl_rule(order);
    let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
    x.iter().zip(w).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

impl RieszOperator {
    /// Builds the operator of order `a` on `grid`.
    pub fn build(grid: Arc<RadialGrid>, a: f64) -> Result<Self> {
        let ang = Angular::new(grid.n_dim(), a)?;
        let n = grid.len();
        let h = grid.dr();
        let r_dom = grid.r_dom();

        let g = if grid.n_dim() == 1 {
            Self::pair_integrals_1d(&ang, n, h)
        } else {
            Self::pair_integrals_nd(&ang, &grid)?
        };
        let vols = grid.volumes();
        let mut weights = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let gij = if i <= j { g[i * n + j] } else { g[j * n + i] };
                weights[i * n + j] = gij / vols[i];
            }
        }

        // Far-field panels: [R, R + h] graded geometrically toward R, where
        // the last cell's weights behave like (t − R)^{2a}, then
        // [R + (2^k − 1)h, R + (2^{k+1} − 1)h].
        let (px, pw) = gl_rule(PANEL_ORDER);
        let target = FAR_RATIO * r_dom;
        let mut far_nodes = Vec::new();
        let mut far_w = Vec::new();
        let mut push_panel = |lo: f64, hi: f64| {
            for (x, w) in px.iter().zip(pw) {
                far_nodes.push(0.5 * (lo + hi) + 0.5 * (hi - lo) * x);
                far_w.push(0.5 * (hi - lo) * w);
            }
        };
        let mut cut = h;
        for _ in 0..EDGE_LEVELS {
            push_panel(r_dom + 0.25 * cut, r_dom + cut);
            cut *= 0.25;
        }
        push_panel(r_dom, r_dom + cut);
        let mut lo = r_dom + h;
        let mut width = 2.0 * h;
        while lo < target {
            push_panel(lo, lo + width);
            lo += width;
            width *= 2.0;
        }
        let r_far = lo;
        let nd = grid.n_dim() as i32;
        let far_volumes: Vec<f64> = far_nodes
            .iter()
            .zip(&far_w)
            .map(|(t, w)| grid.sphere_area() * w * t.powi(nd - 1))
            .collect();
        let rows: Vec<Result<Vec<f64>>> = far_nodes
            .par_iter()
            .map(|&t| {
                (0..n)
                    .map(|j| Self::point_cell(&ang, t, grid.edges()[j], grid.edges()[j + 1], h))
                    .collect()
            })
            .collect();
        let mut far_eval = Vec::with_capacity(far_nodes.len() * n);
        for row in rows {
            far_eval.extend(row?);
        }
        let op = RieszOperator {
            grid,
            order: a,
            c: ang.c,
            weights: Arc::new(weights),
            far_nodes,
            far_volumes,
            far_eval: Arc::new(far_eval),
            r_far,
            gain: 1.0,
        };
        if op
            .weights
            .iter()
            .chain(op.far_eval.iter())
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::Build(format!(
                "operator of order {a} produced negative or non-finite weights"
            )));
        }
        Ok(op)
    }

    /// Cell-pair integrals G_ij for i ≤ j in N = 1 (Toeplitz plus Hankel).
    fn pair_integrals_1d(ang: &Angular, n: usize, h: f64) -> Vec<f64> {
        let beta = 2.0 * ang.a - 1.0;
        let pw = |x: f64| x.abs().powf(beta);
        let toeplitz: Vec<f64> = (0..n)
            .map(|d| {
                let (c, dd) = (d as f64 * h, (d + 1) as f64 * h);
                if d <= 3 {
                    box_abs_power(beta, 0.0, h, c, dd)
                } else {
                    gl_box(|r, t| pw(r - t), 0.0, h, c, dd, gl_order(d as f64))
                }
            })
            .collect();
        let hankel: Vec<f64> = (0..2 * n - 1)
            .map(|k| {
                let (c, dd) = (k as f64 * h, (k + 1) as f64 * h);
                if k <= 2 {
                    box_sum_power(beta, 0.0, h, c, dd)
                } else {
                    gl_box(|r, t| pw(r + t), 0.0, h, c, dd, gl_order((k + 1) as f64))
                }
            })
            .collect();
        let area = 2.0;
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                g[i * n + j] = area * ang.c * (toeplitz[j - i] + hankel[i + j]);
            }
        }
        g
    }

    /// Cell-pair integrals for N ≥ 2: nested adaptive quadrature next to
    /// the diagonal, product Gauss–Legendre elsewhere.
    fn pair_integrals_nd(ang: &Angular, grid: &RadialGrid) -> Result<Vec<f64>> {
        let n = grid.len();
        let e = grid.edges();
        let nd = grid.n_dim() as i32;
        let area = grid.sphere_area();
        let rows: Vec<Result<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![0.0; n - i];
                for j in i..n {
                    let d = j - i;
                    let v = if d <= 1 {
                        diagonal_block(ang, nd, (e[i], e[i + 1]), (e[j], e[j + 1]))
                    } else if d == 2 {
                        gl_box(
                            |r, t| ang.phi(r, t) * (r * t).powi(nd - 1),
                            e[i],
                            e[i + 1],
                            e[j],
                            e[j + 1],
                            16,
                        )
                    } else {
                        gl_box(
                            |r, t| ang.phi(r, t) * (r * t).powi(nd - 1),
                            e[i],
                            e[i + 1],
                            e[j],
                            e[j + 1],
                            gl_order(d as f64),
                        )
                    };
                    row[d] = area * v;
                }
                Ok(row)
            })
            .collect();
        let mut g = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (d, v) in row?.into_iter().enumerate() {
                g[i * n + i + d] = v;
            }
        }
        Ok(g)
    }

    /// ∫_{lo}^{hi} Φ(t, r) r^{N−1} dr for a point t outside the cell.
    fn point_cell(ang: &Angular, t: f64, lo: f64, hi: f64, h: f64) -> Result<f64> {
        let nd = ang.n_dim as i32;
        let ratio = (t - 0.5 * (lo + hi)) / (0.5 * h);
        if ang.n_dim == 1 {
            let e = 2.0 * ang.a - 1.0;
            let near = if ratio < 6.0 {
                ((t - lo).powf(e + 1.0) - (t - hi).abs().powf(e + 1.0)) / (e + 1.0)
            } else {
                gl_line(|r| (t - r).powf(e), lo, hi, gl_order(ratio))
            };
            let far = gl_line(|r| (t + r).powf(e), lo, hi, gl_order((t + lo) / (0.5 * h)));
            return Ok(ang.c * (near + far));
        }
        let f = |r: f64| ang.phi(t, r) * r.powi(nd - 1);
        if ratio < 3.0 {
            integrate(f, lo, hi, QUAD_TOL).map_err(|(v, err)| {
                Error::Build(format!(
                    "far-field quadrature at t={t} stalled at {v:.6e} ± {err:.1e}"
                ))
            })
        } else {
            Ok(gl_line(f, lo, hi, gl_order(ratio)))
        }
    }

    pub(crate) fn from_parts(grid: Arc<RadialGrid>, parts: OperatorParts) -> Result<Self> {
        let n = grid.len();
        if parts.weights.len() != n * n
            || parts.far_eval.len() != parts.far_nodes.len() * n
            || parts.far_volumes.len() != parts.far_nodes.len()
        {
            return Err(Error::Build(
                "cached operator has inconsistent sizes".into(),
            ));
        }
        Ok(RieszOperator {
            grid,
            order: parts.order,
            c: parts.c,
            weights: Arc::new(parts.weights),
            far_nodes: parts.far_nodes,
            far_volumes: parts.far_volumes,
            far_eval: Arc::new(parts.far_eval),
            r_far: parts.r_far,
            gain: 1.0,
        })
    }

    /// Raw arrays; only defined for operators that were built, not rescaled.
    pub(crate) fn parts(&self) -> Option<OperatorParts> {
        (self.gain == 1.0).then(|| OperatorParts {
            order: self.order,
            c: self.c,
            weights: self.weights.to_vec(),
            far_nodes: self.far_nodes.clone(),
            far_volumes: self.far_volumes.clone(),
            far_eval: self.far_eval.to_vec(),
            r_far: self.r_far,
        })
    }

    /// The same operator on the grid dilated by `c` (radius R_dom·c).
    ///
    /// Homogeneity of the kernel makes this exact: every weight picks up the
    /// factor c^{2a} and the arrays are shared, not copied.
    pub fn rescaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::param("scale", "grid scale must be finite and > 0"));
        }
        let g = &self.grid;
        let grid = RadialGrid::uniform(g.n_dim(), g.len(), g.r_dom() * c)?;
        let nd = g.n_dim() as i32;
        Ok(RieszOperator {
            grid,
            order: self.order,
            c: self.c,
            weights: self.weights.clone(),
            far_nodes: self.far_nodes.iter().map(|t| t * c).collect(),
            far_volumes: self.far_volumes.iter().map(|v| v * c.powi(nd)).collect(),
            far_eval: self.far_eval.clone(),
            r_far: self.r_far * c,
            gain: self.gain * c.powf(2.0 * self.order),
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    /// Kernel index a.
    pub fn order(&self) -> f64 {
        self.order
    }

    /// c_{N,a}.
    pub fn constant(&self) -> f64 {
        self.c
    }

    /// Row-major n×n weights W, with (K∗ρ)_i ≈ gain·Σ_j W_ij v_j.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// 1 for a built operator, c^{2a} after `rescaled(c)`.
    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.gain * self.weights[i * self.grid.len() + j]
    }

    pub fn far_nodes(&self) -> &[f64] {
        &self.far_nodes
    }

    pub fn far_radius(&self) -> f64 {
        self.r_far
    }

    fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let support = v.iter().rposition(|x| *x != 0.0).map_or(0, |k| k + 1);
        self.weights
            .par_chunks(n)
            .map(|row| {
                self.gain
                    * row[..support]
                        .iter()
                        .zip(&v[..support])
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Cell averages of K_a∗ρ on the grid.
    pub fn apply(&self, rho: &RadialDensity) -> Result<RadialDensity> {
        rho.check_grid(&self.grid)?;
        Ok(RadialDensity::from_clamped(
            self.grid.clone(),
            self.matvec(rho.values()),
        ))
    }

    /// K_a∗ρ on the grid, on the far-field nodes, and as a monopole tail.
    pub fn potential(&self, rho: &RadialDensity) -> Result<Field> {
        rho.check_grid(&self.grid)?;
        let v = rho.values();
        let n = self.grid.len();
        let inner = self.matvec(v);
        let outer = self
            .far_eval
            .par_chunks(n)
            .map(|row| self.gain * row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        Ok(Field {
            inner,
            outer,
            tail_coeff: self.c * rho.mass(),
            tail_decay: self.grid.n_dim() as f64 - 2.0 * self.order,
        })
    }

    /// Cell averages of K_a∗f for a field defined on all of ℝ^N.
    pub fn convolve_field(&self, f: &Field) -> Result<Vec<f64>> {
        let n = self.grid.len();
        if f.inner.len() != n || f.outer.len() != self.far_nodes.len() {
            return Err(Error::GridMismatch("field does not match operator".into()));
        }
        let mut out = self.matvec(&f.inner);
        let vols = self.grid.volumes();
        for (k, (&fk, &vk)) in f.outer.iter().zip(&self.far_volumes).enumerate() {
            if fk == 0.0 {
                continue;
            }
            let row = &self.far_eval[k * n..(k + 1) * n];
            let s = self.gain * fk * vk;
            for ((o, e), vol) in out.iter_mut().zip(row).zip(vols) {
                *o += s * e / vol;
            }
        }
        let two_a = 2.0 * self.order;
        if f.tail_coeff > 0.0 {
            if f.tail_decay <= two_a {
                return Err(Error::Domain(format!(
                    "field decaying like t^-{} has no convergent K_{}-potential",
                    f.tail_decay, self.order
                )));
            }
            let tail = self.c
                * self.grid.sphere_area()
                * f.tail_coeff
                * self.r_far.powf(two_a - f.tail_decay)
                / (f.tail_decay - two_a);
            out.iter_mut().for_each(|o| *o += tail);
        }
        Ok(out)
    }

    /// ∫_{ℝ^N} |f|^q dx.
    pub fn field_norm_pow(&self, f: &Field, q: f64) -> f64 {
        let inner: f64 = f
            .inner
            .iter()
            .zip(self.grid.volumes())
            .map(|(v, w)| pow0(v.abs(), q) * w)
            .sum();
        let outer: f64 = f
            .outer
            .iter()
            .zip(&self.far_volumes)
            .map(|(v, w)| pow0(v.abs(), q) * w)
            .sum();
        let nd = self.grid.n_dim() as f64;
        let tail = if f.tail_coeff == 0.0 {
            0.0
        } else if f.tail_decay * q <= nd {
            f64::INFINITY
        } else {
            let ex = f.tail_decay * q - nd;
            self.grid.sphere_area() * pow0(f.tail_coeff, q) * self.r_far.powf(-ex) / ex
        };
        inner + outer + tail
    }
}

/// Both stages of the nonlinear potential: u = K_{s/2}∗ρ and 𝒦 = K_{s/2}∗u^{p′−1}.
#[derive(Debug, Clone)]
pub struct Potentials {
    pub u: Field,
    pub k: Vec<f64>,
}

fn check_half(params: &ModelParams, op_half: &RieszOperator) -> Result<()> {
    if (op_half.order() - params.half_order()).abs() > 1e-14 * params.half_order() {
        return Err(Error::Domain(format!(
            "operator order {} does not match s/2 = {}",
            op_half.order(),
            params.half_order()
        )));
    }
    if op_half.grid().n_dim() != params.n_dim {
        return Err(Error::GridMismatch(
            "operator dimension differs from N".into(),
        ));
    }
    Ok(())
}

pub fn potentials(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho: &RadialDensity,
) -> Result<Potentials> {
    check_half(params, op_half)?;
    let u = op_half.potential(rho)?;
    let e = params.p_conj() - 1.0;
    let k = if e == 1.0 {
        op_half.convolve_field(&u)?
    } else {
        op_half.convolve_field(&u.powf(e))?
    };
    Ok(Potentials { u, k })
}

/// 𝒦_{s,p}(ρ) = K_{s/2}∗(K_{s/2}∗ρ)^{p′−1} on the grid.
pub fn nonlinear_potential(
    params: &ModelParams,
    op_half: &RieszOperator,
    rho: &RadialDensity,
) -> Result<RadialDensity> {
    let pot = potentials(params, op_half, rho)?;
    Ok(RadialDensity::from_clamped(rho.grid().clone(), pot.k))
}

/// ‖K_{s/2}∗h − h‖_q over ℝ^N, with `op_half` of order s/2.
pub fn kurokawa_error(h: &RadialDensity, op_half: &RieszOperator, q: f64) -> Result<f64> {
    if q.is_nan() || q <= 1.0 {
        return Err(Error::param("q", "exponent must be > 1"));
    }
    let mut u = op_half.potential(h)?;
    for (x, v) in u.inner.iter_mut().zip(h.values()) {
        *x -= v;
    }
    Ok(op_half.field_norm_pow(&u, q).powf(1.0 / q))
}
