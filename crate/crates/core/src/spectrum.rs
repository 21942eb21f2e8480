//! Sector-wise spectrum of the linearized p-Laplacian around a bubble and
//! the weighted inequalities built on it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{sobolev_constant, unit_normalized, Bubble, Dimension};
use crate::context::Context;
use crate::corpus::normalize_gradient;
use crate::error::{invalid, LabError, Result};
use crate::kernels::vector::relative_weight;
use crate::linalg::EdgePencil;
use crate::quadrature::{scale, BubbleField, FieldRef, GridSpec, GriddedField, Quadrature, RadialGrid, Zero};
use crate::special::zonal;
use crate::tangent::orthogonalize;

/// Largest accepted share of the test-profile energy in the first radial decade.
pub const ORIGIN_SHARE: f64 = 1e-6;

/// Largest accepted residual `||K f - mu M f|| / ||M f||`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Discretized quadratic forms of one zonal sector.
#[derive(Clone, Debug)]
pub struct SectorProblem {
    pub ell: usize,
    pub dim: Dimension,
    pub grid: RadialGrid,
    /// The unit-norm bubble the operator is linearized at.
    pub bubble: Bubble,
    /// Index of the first unknown on the grid (0 or 1).
    pub first: usize,
    pub pencil: EdgePencil,
}

/// Lowest eigenpairs of one sector.
#[derive(Clone, Debug, Serialize)]
pub struct SectorEigenResult {
    pub ell: usize,
    pub eigenvalues: Vec<f64>,
    /// Grid values of each eigenfunction, unit in the mass norm, zero at
    /// boundary nodes.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

/// Radial grid used for sector problems: `s = ln r` from -10 to the point
/// where the weighted mass density `r^{-n/(p-1)}` of every eigenfunction
/// has dropped by `e^{-30}`.
pub fn spectral_grid(dim: &Dimension, radial_nodes: usize) -> Result<RadialGrid> {
    let s_max = (30.0 * (dim.p() - 1.0) / dim.nf()).max(6.0);
    RadialGrid::new(dim.n(), SPECTRAL_S_MIN, s_max, radial_nodes)
}

const SPECTRAL_S_MIN: f64 = -10.0;

/// `c = S^p ||v||^{p-p*}` for a unit-norm bubble, i.e. `S^p`.
pub fn eigen_scale(dim: &Dimension) -> Result<f64> {
    let reference = RadialGrid::from_spec(dim.n(), &GridSpec::default_for(dim))?;
    Ok(sobolev_constant(dim, &reference)?.powf(dim.p()))
}

fn unit_bubble(dim: &Dimension) -> Result<Bubble> {
    let reference = RadialGrid::from_spec(dim.n(), &GridSpec::default_for(dim))?;
    unit_normalized(&Bubble::unit(), dim, &reference)
}

/// Assembles the stiffness and mass forms of sector `ell` on `grid`.
pub fn assemble_sector(ell: usize, dim: &Dimension, grid: &RadialGrid) -> Result<SectorProblem> {
    if grid.dimension() != dim.n() {
        return Err(LabError::GridMismatch(format!("grid for n={} used with n={}", grid.dimension(), dim.n())));
    }
    let bubble = unit_bubble(dim)?;
    let p = dim.p();
    let ps = dim.p_star();
    let nf = dim.nf();
    let h = grid.step();
    let s = grid.log_nodes();
    let r = grid.nodes();
    let w = grid.weights();
    let count = grid.len();
    let angular = (ell * (ell + dim.n() - 2)) as f64;
    let slope_weight = |rr: f64| bubble.radial(dim, rr).slope.abs().powf(p - 2.0);
    let edge: Vec<f64> = (0..count - 1)
        .map(|k| {
            let rm = (s[k] + 0.5 * h).exp();
            (p - 1.0) * slope_weight(rm) * rm.powf(nf - 2.0) / h
        })
        .collect();
    let first = if ell == 0 { 0 } else { 1 };
    let last = count - 2;
    let mut potential: Vec<f64> = (first..=last).map(|k| angular * w[k] * slope_weight(r[k]) / (r[k] * r[k])).collect();
    let mass: Vec<f64> = (first..=last).map(|k| w[k] * bubble.value_at_distance(dim, r[k]).powf(ps - 2.0)).collect();
    if first == 1 {
        potential[0] += edge[0];
    }
    *potential.last_mut().unwrap() += edge[last];
    let edges = edge[first..last].to_vec();
    let pencil = EdgePencil::new(edges, potential, mass)?;
    let prob = SectorProblem { ell, dim: *dim, grid: grid.clone(), bubble, first, pencil };
    check_origin(&prob)?;
    Ok(prob)
}

fn check_origin(prob: &SectorProblem) -> Result<()> {
    let r = prob.grid.nodes();
    let profile: Vec<f64> = (prob.first..prob.first + prob.pencil.len())
        .map(|k| {
            let jet = prob.bubble.radial(&prob.dim, r[k]);
            if prob.ell == 0 {
                jet.value
            } else {
                jet.slope.abs()
            }
        })
        .collect();
    let total = prob.pencil.energy(&profile);
    let cutoff = prob.grid.log_nodes()[0] + std::f64::consts::LN_10;
    let s = &prob.grid.log_nodes()[prob.first..];
    let mut head: Vec<f64> = profile.clone();
    for (k, v) in head.iter_mut().enumerate() {
        if s[k] > cutoff {
            *v = 0.0;
        }
    }
    let first = partial_energy(&prob.pencil, &profile, &head);
    if !(total.is_finite() && first <= ORIGIN_SHARE * total) {
        return Err(LabError::SingularityUnresolved(first / total));
    }
    Ok(())
}

fn partial_energy(pencil: &EdgePencil, f: &[f64], mask: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (i, e) in pencil.edges.iter().enumerate() {
        if mask[i] != 0.0 || mask[i + 1] != 0.0 {
            sum += e * (f[i + 1] - f[i]).powi(2);
        }
    }
    for (i, g) in pencil.potential.iter().enumerate() {
        if mask[i] != 0.0 {
            sum += g * f[i] * f[i];
        }
    }
    sum
}

/// The `k` lowest eigenpairs with residuals.
pub fn solve_sector(prob: &SectorProblem, k: usize) -> Result<SectorEigenResult> {
    let pencil = &prob.pencil;
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for j in 0..k {
        let mu = pencil.eigenvalue(j)?;
        let f = pencil.eigenvector(mu, &eigenvectors);
        let res = relative_residual(pencil, &f, mu);
        if !(res < RESIDUAL_TOL) {
            return Err(LabError::Eigen(format!("sector {} eigenpair {j}: residual {res:.3e}", prob.ell)));
        }
        eigenvalues.push(mu);
        residuals.push(res);
        eigenvectors.push(f);
    }
    Ok(SectorEigenResult { ell: prob.ell, eigenvalues, eigenvectors, residuals })
}

/// `||K f - mu M f|| / ||M f||`.
pub fn relative_residual(pencil: &EdgePencil, f: &[f64], mu: f64) -> f64 {
    let kf = pencil.apply_stiffness(f);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..f.len() {
        let mf = pencil.mass[i] * f[i];
        num += (kf[i] - mu * mf).powi(2);
        den += mf * mf;
    }
    (num / den).sqrt()
}

/// Spectral gap with the eigenvalues it was read from.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralGap {
    pub lambda: f64,
    /// Lowest eigenvalue on the complement of the tangent space.
    pub mu_perp: f64,
    /// `(p*-1) S^p`, the tangent eigenvalue of the unit bubble.
    pub tangent_eigenvalue: f64,
    pub eigen_scale: f64,
    pub sectors: Vec<SectorEigenResult>,
}

/// `lambda = (mu_perp - (p*-1) S^p) / 2` for the unit-norm bubble, with
/// `mu_perp` the least of the third `ell = 0`, second `ell = 1` and first
/// `ell = 2` eigenvalues.
pub fn spectral_gap(dim: &Dimension, grid: &RadialGrid) -> Result<SpectralGap> {
    let sectors: Vec<SectorEigenResult> = (0..=3usize)
        .into_par_iter()
        .map(|ell| {
            let k = if ell == 0 {
                3
            } else if ell == 1 {
                2
            } else {
                1
            };
            solve_sector(&assemble_sector(ell, dim, grid)?, k)
        })
        .collect::<Result<_>>()?;
    let (l2, l3) = (sectors[2].eigenvalues[0], sectors[3].eigenvalues[0]);
    if l3 < l2 {
        return Err(LabError::SectorOrderingUnexpected { lower: 2, upper: 3, lower_value: l2, upper_value: l3 });
    }
    let c = eigen_scale(dim)?;
    let mu_perp = sectors[0].eigenvalues[2].min(sectors[1].eigenvalues[1]).min(l2);
    let tangent = (dim.p_star() - 1.0) * c;
    let lambda = 0.5 * (mu_perp - tangent);
    if !(lambda > 0.0) {
        return Err(LabError::NegativeGap(lambda));
    }
    Ok(SpectralGap { lambda, mu_perp, tangent_eigenvalue: tangent, eigen_scale: c, sectors })
}

/// Which form of the perturbed gap inequality applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapCase {
    /// `p <= 2n/(n+2)`: Orlicz-type right side and a min-term on the left.
    Orlicz,
    /// `2n/(n+2) < p < 2`: weighted right side and a min-term on the left.
    Subquadratic,
    /// `p >= 2`: weighted right side, no min-term.
    Superquadratic,
}

impl GapCase {
    pub fn for_dimension(dim: &Dimension) -> Self {
        let p = dim.p();
        if p <= 2.0 * dim.nf() / (dim.nf() + 2.0) {
            Self::Orlicz
        } else if p < 2.0 {
            Self::Subquadratic
        } else {
            Self::Superquadratic
        }
    }
}

/// Constants of the perturbed gap inequality.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapParams {
    pub gamma0: f64,
    pub c1: f64,
    pub lambda: f64,
    /// `||D phi||_{L^p}` after orthogonalization.
    pub gradient_norm: f64,
}

/// Both sides of the perturbed and the linearized gap inequalities for one
/// orthogonalized perturbation of the unit-norm bubble.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapInequalitySample {
    pub case: GapCase,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub linear_lhs: f64,
    pub linear_rhs: f64,
    pub linear_holds: bool,
    pub relative_defect: f64,
}

/// Orthogonalizes `phi` against the tangent space of the unit-norm bubble,
/// rescales it to the requested gradient norm and evaluates both gap
/// inequalities.
pub fn check_gap_inequality(phi: &FieldRef, case: GapCase, params: &GapParams, ctx: &Context) -> Result<GapInequalitySample> {
    let dim = ctx.dim;
    if case != GapCase::for_dimension(&dim) {
        return invalid(format!("case {case:?} does not apply to n={} p={}", dim.n(), dim.p()));
    }
    if !(params.gradient_norm >= 0.0 && params.gamma0 >= 0.0 && params.c1 >= 0.0) {
        return invalid("gap check needs a nonnegative gradient norm and constants");
    }
    let v = unit_normalized(&Bubble::unit(), &dim, ctx.quad.radial())?;
    let orth = orthogonalize(phi, &v, ctx)?;
    let phi = if params.gradient_norm == 0.0 { Arc::new(Zero) as FieldRef } else { scale(params.gradient_norm, &normalize_gradient(&orth.field, ctx)?.0) };
    let vf = BubbleField::shared(v, dim);
    let p = dim.p();
    let ps = dim.p_star();
    let (gamma0, c1) = (params.gamma0, params.c1);
    let out = ctx.quad.integrate_many(&[&vf, &phi], 5, |_, j, out| {
        let (jv, jp) = (j[0], j[1]);
        let nv = jv.grad_norm();
        let nphi = jp.grad_norm();
        let dot = jv.grad_dot(&jp);
        let vv = jv.value.abs();
        let f = jp.value;
        out.iter_mut().for_each(|o| *o = 0.0);
        if nphi > 0.0 && nv > 0.0 {
            let base = nv.powf(p - 2.0);
            let quad = base * nphi * nphi;
            let nu = (nv * nv + 2.0 * dot + nphi * nphi).max(0.0).sqrt();
            let diff = (2.0 * dot + nphi * nphi) / (nu + nv);
            let weight = (p - 2.0) * base * relative_weight(nu / nv, p) * diff * diff;
            let min_term = if case == GapCase::Superquadratic { 0.0 } else { gamma0 * nphi.powf(p).min(quad) };
            out[0] = quad + weight + min_term;
            out[2] = quad + (p - 2.0) * base * (dot / nv).powi(2);
        }
        if f != 0.0 {
            let value_weighted = vv.powf(ps - 2.0) * f * f;
            out[1] = match case {
                GapCase::Orlicz => (vv + c1 * f.abs()).powf(ps) / (vv * vv + f * f) * f * f,
                _ => value_weighted,
            };
            out[3] = value_weighted;
        }
    })?;
    let sp = ctx.sobolev.powf(p);
    let lhs = out[0].value;
    let rhs = ((ps - 1.0) * sp + params.lambda) * out[1].value;
    let linear_lhs = out[2].value;
    let linear_rhs = ((ps - 1.0) * sp + 2.0 * params.lambda) * out[3].value;
    Ok(GapInequalitySample { case, lhs, rhs, holds: lhs >= rhs, linear_lhs, linear_rhs, linear_holds: linear_lhs >= linear_rhs, relative_defect: orth.relative_defect })
}

/// Ratios of the weighted embedding, its small-ball and its large-ball forms.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EmbeddingRatios {
    /// `int v^{p*-2} phi^2 / int |Dv|^{p-2} |D phi|^2`.
    pub whole: f64,
    /// The same with the numerator restricted to `|x| < rho`.
    pub small_ball: f64,
    /// The numerator restricted to `|x| > 1/rho`, times `log^2 rho`.
    pub large_ball: f64,
}

/// Embedding ratios of `phi` against the unit bubble for radius `rho` in (0, 1).
pub fn embedding_ratios(phi: &FieldRef, rho: f64, ctx: &Context) -> Result<EmbeddingRatios> {
    if !(rho > 0.0 && rho < 1.0) {
        return invalid(format!("radius parameter must lie in (0,1), got {rho}"));
    }
    let dim = ctx.dim;
    let vf = BubbleField::shared(Bubble::unit(), dim);
    let (p, ps) = (dim.p(), dim.p_star());
    let outer = 1.0 / rho;
    let out = ctx.quad.integrate_many(&[&vf, phi], 4, |node, j, out| {
        let nv = j[0].grad_norm();
        let nphi = j[1].grad_norm();
        out[0] = if nphi > 0.0 { nv.powf(p - 2.0) * nphi * nphi } else { 0.0 };
        let f = j[1].value;
        let num = if f != 0.0 { j[0].value.abs().powf(ps - 2.0) * f * f } else { 0.0 };
        out[1] = num;
        out[2] = if node.r < rho { num } else { 0.0 };
        out[3] = if node.r > outer { num } else { 0.0 };
    })?;
    let den = out[0].value;
    if !(den > 0.0 && den.is_finite()) {
        return invalid("perturbation has no weighted gradient energy");
    }
    Ok(EmbeddingRatios { whole: out[1].value / den, small_ball: out[2].value / den, large_ball: out[3].value * rho.ln().powi(2) / den })
}

/// Least-squares exponent and constant of `ratio ~ C rho^theta`, with `C`
/// the smallest constant bounding every sample.
pub fn fit_power_law(rhos: &[f64], ratios: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rhos.iter().zip(ratios).filter(|(_, r)| **r > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return invalid("need at least two positive samples to fit an exponent");
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let theta = sxy / sxx;
    let c = pts.iter().map(|(x, y)| (y - theta * x).exp()).fold(0.0, f64::max);
    Ok((theta, c))
}

/// `int (v + eps|phi|)^{p*-2} phi^2 / int (|Dv| + eps|D phi|)^{p-2} |D phi|^2`
/// for `|phi|` rescaled so that the denominator is at most one.
pub fn orlicz_poincare_ratio(phi: &FieldRef, eps: f64, ctx: &Context) -> Result<f64> {
    let dim = ctx.dim;
    let (p, ps) = (dim.p(), dim.p_star());
    if p > 2.0 * dim.nf() / (dim.nf() + 2.0) {
        return invalid(format!("requires p <= 2n/(n+2), got n={} p={p}", dim.n()));
    }
    if !(eps > 0.0) {
        return invalid(format!("eps must be positive, got {eps}"));
    }
    let vf = BubbleField::shared(Bubble::unit(), dim);
    let sides = |t: f64| -> Result<(f64, f64)> {
        let out = ctx.quad.integrate_many(&[&vf, phi], 2, |_, j, out| {
            let nv = j[0].grad_norm();
            let nphi = t * j[1].grad_norm();
            let f = t * j[1].value.abs();
            out[0] = if f > 0.0 { (j[0].value.abs() + eps * f).powf(ps - 2.0) * f * f } else { 0.0 };
            out[1] = if nphi > 0.0 { (nv + eps * nphi).powf(p - 2.0) * nphi * nphi } else { 0.0 };
        })?;
        Ok((out[0].value, out[1].value))
    };
    let (mut num, mut den) = sides(1.0)?;
    if den > 1.0 {
        (num, den) = sides(den.powf(-1.0 / p))?;
    }
    if !(den > 0.0 && den.is_finite()) {
        return invalid("perturbation has no weighted gradient energy");
    }
    Ok(num / den)
}

/// `int_{r>R} |u|^p r^{n-1-alpha} dr / int_{r>R} |u'|^p r^{n-1+p-alpha} dr`
/// for a radial profile returning `(u, u')`.
pub fn hardy_poincare_ratio<F>(profile: F, alpha: f64, radius: f64, dim: &Dimension, radial_nodes: usize) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    if !(alpha < dim.nf()) {
        return invalid(format!("alpha must be below n, got {alpha}"));
    }
    if !(radius >= 1.0) {
        return invalid(format!("radius must be at least 1, got {radius}"));
    }
    let p = dim.p();
    let sides = |span: f64, nodes: usize| -> Result<(f64, f64)> {
        let grid = RadialGrid::new(dim.n(), radius.ln(), radius.ln() + span, nodes)?;
        let num = grid.integrate(|r| profile(r).0.abs().powf(p) * r.powf(-alpha)).value;
        let den = grid.integrate(|r| profile(r).1.abs().powf(p) * r.powf(p - alpha)).value;
        Ok((num, den))
    };
    let (num, den) = sides(HARDY_SPAN, radial_nodes)?;
    let (num2, den2) = sides(2.0 * HARDY_SPAN, 2 * radial_nodes - 1)?;
    for (a, b) in [(num, num2), (den, den2)] {
        if !((a - b).abs() <= 1e-6 * b.abs()) {
            return Err(LabError::TailTooLarge { tail: (a - b).abs(), value: b });
        }
    }
    if !(den > 0.0) {
        return invalid("profile is constant beyond the radius");
    }
    Ok(num / den)
}

const HARDY_SPAN: f64 = 30.0;

/// Eigenvector `f(r) P_ell(mu)` sampled on the base grid of `quad`, with
/// `f` interpolated linearly in `ln r` and zero outside the sector grid.
pub fn eigenvector_field(prob: &SectorProblem, f: &[f64], quad: &Quadrature) -> Result<GriddedField> {
    if f.len() != prob.pencil.len() {
        return Err(LabError::GridMismatch(format!("eigenvector has {} entries, sector has {}", f.len(), prob.pencil.len())));
    }
    if quad.dim().n() != prob.dim.n() {
        return Err(LabError::GridMismatch(format!("sector is for n={}, grid for n={}", prob.dim.n(), quad.dim().n())));
    }
    let s = prob.grid.log_nodes();
    let mut full = vec![0.0; s.len()];
    full[prob.first..prob.first + f.len()].copy_from_slice(f);
    let h = prob.grid.step();
    let radial: Vec<f64> = quad
        .radial()
        .log_nodes()
        .iter()
        .map(|&x| {
            let t = (x - s[0]) / h;
            if t < 0.0 || t > (s.len() - 1) as f64 {
                return 0.0;
            }
            let k = (t.floor() as usize).min(s.len() - 2);
            let w = t - k as f64;
            (1.0 - w) * full[k] + w * full[k + 1]
        })
        .collect();
    let angular: Vec<f64> = quad.angular().nodes().iter().map(|&mu| zonal(prob.ell, prob.dim.n(), mu).0).collect();
    let values = radial.iter().flat_map(|a| angular.iter().map(move |b| a * b)).collect();
    Ok(GriddedField::from_values(quad, 0.0, values)?.with_description(format!("sector {} eigenvector", prob.ell)))
}

/// Validates a sector list for reporting.
pub fn check_sectors(sectors: &[usize]) -> Result<()> {
    if let Some(bad) = sectors.iter().find(|l| **l > 3) {
        return invalid(format!("sectors above 3 are not supported, got {bad}"));
    }
    Ok(())
}
