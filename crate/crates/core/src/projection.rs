//! Selection of the bubble attached to a field: by the orthogonality-producing
//! functional and by direct gradient-distance minimization.

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::Bubble;
use crate::context::Context;
use crate::error::{invalid, LabError, Result};
use crate::linalg::solve_dense;
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::quadrature::{BubbleField, FieldRef, GridSpec, Node, Point, Quadrature, TangentDirection, TangentField};

/// Largest relative gradient distance at which a starting bubble is accepted.
pub const NEARBY_LIMIT: f64 = 0.5;

/// Optimizer settings shared by both projectors.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectionOptions {
    /// Simplex restarts from perturbed starting points; 0 skips the simplex
    /// stage and only polishes from the starting bubble.
    pub restarts: usize,
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    /// Polishing iterations on the full grid.
    pub polish_iterations: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { restarts: 5, max_evals: 10_000, f_tol: 1e-10, x_tol: 1e-8, polish_iterations: 40 }
    }
}

impl ProjectionOptions {
    /// Polish only, for fields built as a known bubble plus a small perturbation.
    pub fn polish_only() -> Self {
        Self { restarts: 0, ..Self::default() }
    }
}

/// The bubble selected for a field and how well it satisfies the first-order conditions.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectionResult {
    pub method: String,
    pub bubble: Bubble,
    pub objective: f64,
    /// `int v^{p*-2} xi (u - v)` for `xi = v, dv/db, dv/dx_1, ..., dv/dx_n`;
    /// the transverse translations vanish by symmetry.
    pub orthogonality_defect: Vec<f64>,
    /// `||D(u - v)||_p / ||Du||_p`.
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final simplex diameter in scaled parameters (0 when only polished).
    pub simplex_diameter: f64,
}

/// A rule for choosing a bubble near `u`.
pub trait Projector: Send + Sync {
    fn name(&self) -> &'static str;

    /// Objective minimized over bubbles.
    fn objective(&self, u: &FieldRef, bub: &Bubble, quad: &Quadrature, ctx: &Context) -> Result<f64>;

    /// One Newton-type update of the bubble on the given grid, with the
    /// number of objective evaluations used.
    fn polish_step(&self, u: &FieldRef, bub: &Bubble, ctx: &Context) -> Result<(Bubble, usize, bool)>;

    fn project(&self, u: &FieldRef, ctx: &Context, init: Option<Bubble>, opts: &ProjectionOptions) -> Result<ProjectionResult> {
        run_projection(self, u, ctx, init, opts)
    }
}

/// Minimizes `F_u[v] = (1/p*) int |v|^{p*} - (1/(p*-1)) int |v|^{p*-2} v u`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FunctionalProjector;

/// Minimizes `||D(u - v)||_p`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GradientDistanceProjector;

/// Names accepted by [`projector`].
pub const PROJECTORS: [&str; 2] = ["fu", "gradient-distance"];

pub fn projector(name: &str) -> Result<Box<dyn Projector>> {
    match name {
        "fu" => Ok(Box::new(FunctionalProjector)),
        "gradient-distance" => Ok(Box::new(GradientDistanceProjector)),
        other => invalid(format!("unknown projector '{other}', expected one of {}", PROJECTORS.join(", "))),
    }
}

/// `F_u[v]` on the context grid.
pub fn functional_fu(u: &FieldRef, bub: &Bubble, ctx: &Context) -> Result<f64> {
    fu_on(u, bub, &ctx.quad, ctx)
}

fn fu_on(u: &FieldRef, bub: &Bubble, quad: &Quadrature, ctx: &Context) -> Result<f64> {
    let ps = ctx.dim.p_star();
    let vf = BubbleField::shared(*bub, ctx.dim);
    let out = quad.integrate_many(&[u, &vf], 2, |_, j, out| {
        let v = j[1].value;
        let va = v.abs();
        out[0] = va.powf(ps);
        out[1] = va.powf(ps - 2.0) * v * j[0].value;
    })?;
    Ok(out[0].value / ps - out[1].value / (ps - 1.0))
}

fn grad_distance_p(u: &FieldRef, bub: &Bubble, quad: &Quadrature, ctx: &Context) -> Result<f64> {
    let p = ctx.dim.p();
    let vf = BubbleField::shared(*bub, ctx.dim);
    Ok(quad.integrate(&[u, &vf], |_, j| j[0].minus(j[1]).grad_norm().powf(p))?.value)
}

fn grad_norm_p(u: &FieldRef, ctx: &Context) -> Result<f64> {
    let p = ctx.dim.p();
    Ok(ctx.quad.integrate(&[u], |_, j| j[0].grad_norm().powf(p))?.value)
}

/// Derivatives of the bubble in `(a, b, x0)`.
fn parameter_fields(bub: &Bubble, ctx: &Context) -> [FieldRef; 3] {
    [
        TangentField::shared(Bubble { a: 1.0, ..*bub }, ctx.dim, TangentDirection::Amplitude),
        TangentField::shared(*bub, ctx.dim, TangentDirection::Concentration),
        TangentField::shared(*bub, ctx.dim, TangentDirection::Axial),
    ]
}

fn apply_step(bub: &Bubble, step: &[f64]) -> Option<Bubble> {
    let b = Bubble { a: bub.a + step[0], b: bub.b + step[1], x0: bub.x0 + step[2] };
    if b.b > 0.0 && b.a.is_finite() && b.a != 0.0 && b.x0.is_finite() {
        Some(b)
    } else {
        None
    }
}

fn small_step(bub: &Bubble, step: &[f64], ctx: &Context) -> bool {
    let len = bub.b.powf(-(ctx.dim.p() - 1.0) / ctx.dim.p());
    let rel = [step[0] / bub.a, step[1] / bub.b, step[2] / len];
    rel.iter().all(|r| r.abs() < 1e-11)
}

impl Projector for FunctionalProjector {
    fn name(&self) -> &'static str {
        "fu"
    }

    fn objective(&self, u: &FieldRef, bub: &Bubble, quad: &Quadrature, ctx: &Context) -> Result<f64> {
        fu_on(u, bub, quad, ctx)
    }

    fn polish_step(&self, u: &FieldRef, bub: &Bubble, ctx: &Context) -> Result<(Bubble, usize, bool)> {
        let ps = ctx.dim.p_star();
        let vf = BubbleField::shared(*bub, ctx.dim);
        let [xa, xb, xz] = parameter_fields(bub, ctx);
        let out = ctx.quad.integrate_many(&[u, &vf, &xa, &xb, &xz], 9, |_, j, out| {
            let (uu, v) = (j[0].value, j[1].value);
            let va = v.abs();
            let w = va.powf(ps - 2.0);
            let h = (ps - 1.0) * w - (ps - 2.0) * va.powf(ps - 3.0) * v.signum() * uu;
            let xi = [j[2].value, j[3].value, j[4].value];
            for i in 0..3 {
                out[i] = w * xi[i] * (v - uu);
            }
            let mut k = 3;
            for a in 0..3 {
                for b in a..3 {
                    out[k] = h * xi[a] * xi[b];
                    k += 1;
                }
            }
        })?;
        let g: Vec<f64> = out[..3].iter().map(|i| i.value).collect();
        let h = sym3(&out[3..].iter().map(|i| i.value).collect::<Vec<_>>());
        let step = solve_dense(h, g.iter().map(|x| -x).collect()).ok_or(LabError::NotConverged(1))?;
        let mut t = 1.0;
        for _ in 0..30 {
            let s: Vec<f64> = step.iter().map(|x| t * x).collect();
            if let Some(nb) = apply_step(bub, &s) {
                return Ok((nb, 1, small_step(bub, &s, ctx)));
            }
            t *= 0.5;
        }
        Err(LabError::NotConverged(1))
    }
}

impl Projector for GradientDistanceProjector {
    fn name(&self) -> &'static str {
        "gradient-distance"
    }

    fn objective(&self, u: &FieldRef, bub: &Bubble, quad: &Quadrature, ctx: &Context) -> Result<f64> {
        Ok(grad_distance_p(u, bub, quad, ctx)?.powf(1.0 / ctx.dim.p()))
    }

    fn polish_step(&self, u: &FieldRef, bub: &Bubble, ctx: &Context) -> Result<(Bubble, usize, bool)> {
        let p = ctx.dim.p();
        let vf = BubbleField::shared(*bub, ctx.dim);
        let [xa, xb, xz] = parameter_fields(bub, ctx);
        let scale = grad_norm_p(u, ctx)?.powf(1.0 / p);
        let floor = 1e-9 * scale;
        let out = ctx.quad.integrate_many(&[u, &vf, &xa, &xb, &xz], 10, |_, j, out| {
            let r = j[0].minus(j[1]);
            let nr = r.grad_norm();
            let gx = [j[2].grad, j[3].grad, j[4].grad];
            let e = if nr > 0.0 { [r.grad[0] / nr, r.grad[1] / nr] } else { [0.0, 0.0] };
            let exact = if nr > 0.0 { nr.powf(p - 2.0) } else { 0.0 };
            let rho = if p >= 2.0 { exact } else { (nr * nr + floor * floor).powf(0.5 * (p - 2.0)) };
            out[0] = nr.powf(p);
            for i in 0..3 {
                out[1 + i] = -p * exact * (r.grad[0] * gx[i][0] + r.grad[1] * gx[i][1]);
            }
            let proj: Vec<f64> = gx.iter().map(|g| e[0] * g[0] + e[1] * g[1]).collect();
            let mut k = 4;
            for a in 0..3 {
                for b in a..3 {
                    let dd = gx[a][0] * gx[b][0] + gx[a][1] * gx[b][1];
                    out[k] = p * rho * (dd + (p - 2.0) * proj[a] * proj[b]);
                    k += 1;
                }
            }
        })?;
        let j0 = out[0].value;
        let g: Vec<f64> = out[1..4].iter().map(|i| i.value).collect();
        let h = sym3(&out[4..].iter().map(|i| i.value).collect::<Vec<_>>());
        let step = damped_solve(&h, &g).ok_or(LabError::NotConverged(1))?;
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut evals = 1;
        let mut t = 1.0;
        for _ in 0..40 {
            let s: Vec<f64> = step.iter().map(|x| t * x).collect();
            if small_step(bub, &s, ctx) {
                return Ok((*bub, evals, true));
            }
            if let Some(nb) = apply_step(bub, &s) {
                evals += 1;
                let jt = grad_distance_p(u, &nb, &ctx.quad, ctx)?;
                if jt <= j0 + 1e-4 * t * slope.min(0.0) {
                    return Ok((nb, evals, false));
                }
            }
            t *= 0.5;
        }
        Ok((*bub, evals, true))
    }
}

/// Newton step for `h x = -g`, adding diagonal damping when `h` is singular.
fn damped_solve(h: &[Vec<f64>], g: &[f64]) -> Option<Vec<f64>> {
    let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
    if let Some(x) = solve_dense(h.to_vec(), rhs.clone()) {
        return Some(x);
    }
    let diag = (0..h.len()).map(|i| h[i][i].abs()).fold(0.0f64, f64::max);
    let mut mu = 1e-10 * diag.max(f64::MIN_POSITIVE);
    for _ in 0..12 {
        let mut a = h.to_vec();
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += mu.max(1e-12 * h[i][i].abs());
        }
        if let Some(x) = solve_dense(a, rhs.clone()) {
            return Some(x);
        }
        mu *= 100.0;
    }
    None
}

fn sym3(packed: &[f64]) -> Vec<Vec<f64>> {
    let idx = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    (0..3).map(|a| (0..3).map(|b| packed[idx[a][b]]).collect()).collect()
}

fn axis_node(z: f64, rho: f64) -> Node {
    Node { point: Point { anchor: 0.0, dz: z, rho }, r: z.hypot(rho), mu: 0.0, cell: None }
}

/// Starting bubble from the field itself: center from the `|u|^{p*}`-weighted
/// axial centroid, amplitude from the value there, concentration from the
/// half-height radius.
pub fn moment_guess(u: &FieldRef, ctx: &Context) -> Result<Bubble> {
    let ps = ctx.dim.p_star();
    let out = ctx.quad.integrate_many(&[u], 2, |node, j, out| {
        let w = j[0].value.abs().powf(ps);
        out[0] = w;
        out[1] = w * node.point.axial_from(0.0);
    })?;
    if !(out[0].value > 0.0) {
        return invalid("cannot place a bubble on a zero field");
    }
    let x0 = out[1].value / out[0].value;
    let a = u.eval(&axis_node(x0, 0.0)).value;
    if a == 0.0 || !a.is_finite() {
        return invalid("field vanishes at its centroid");
    }
    let half = |r: f64| u.eval(&axis_node(x0, r)).value / a - 0.5;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut grow = 0;
    while half(hi) > 0.0 && grow < 200 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if half(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let b = (2f64.powf(1.0 / ctx.dim.decay_exponent()) - 1.0) / r.powf(ctx.dim.radial_exponent());
    Bubble::new(a, b, x0)
}

/// Grid for the simplex stage: the context grid with fewer nodes.
fn search_quadrature(ctx: &Context) -> Result<Quadrature> {
    let s = ctx.quad.spec();
    let spec = GridSpec { radial_nodes: (s.radial_nodes / 4).max(256).min(s.radial_nodes), angular_nodes: (s.angular_nodes / 4).max(8).min(s.angular_nodes), ..s.clone() };
    Quadrature::new(&ctx.dim, spec)?.with_patch_resolution(8, 8)
}

fn to_params(b: &Bubble, len0: f64) -> Vec<f64> {
    vec![b.a.abs().ln(), b.b.ln(), b.x0 / len0]
}

fn from_params(x: &[f64], sign: f64, len0: f64) -> Option<Bubble> {
    Bubble::new(sign * x[0].exp(), x[1].exp(), x[2] * len0).ok()
}

const RESTART_OFFSETS: [[f64; 3]; 5] = [[0.0, 0.0, 0.0], [0.05, -0.1, 0.05], [-0.05, 0.1, -0.05], [0.03, 0.15, -0.1], [-0.03, -0.15, 0.1]];

fn run_projection<P: Projector + ?Sized>(pr: &P, u: &FieldRef, ctx: &Context, init: Option<Bubble>, opts: &ProjectionOptions) -> Result<ProjectionResult> {
    let start = match init {
        Some(b) => b,
        None => moment_guess(u, ctx)?,
    };
    let u_norm = grad_norm_p(u, ctx)?.powf(1.0 / ctx.dim.p());
    if !(u_norm > 0.0) {
        return invalid("field has zero gradient norm");
    }
    let rel_distance = |b: &Bubble, q: &Quadrature| -> Result<f64> { Ok(grad_distance_p(u, b, q, ctx)?.powf(1.0 / ctx.dim.p()) / u_norm) };

    let sign = start.a.signum();
    let len0 = start.b.powf(-(ctx.dim.p() - 1.0) / ctx.dim.p());
    let mut evals = 0usize;
    let mut diameter = 0.0;
    let mut simplex_converged = true;
    let mut best = start;

    if opts.restarts > 0 {
        let quad = search_quadrature(ctx)?;
        let starts: Vec<Bubble> = RESTART_OFFSETS
            .iter()
            .cycle()
            .take(opts.restarts)
            .filter_map(|o| {
                let x = to_params(&start, len0);
                from_params(&[x[0] + o[0], x[1] + o[1], x[2] + o[2]], sign, len0)
            })
            .collect();
        let nearest = starts.iter().map(|b| rel_distance(b, &quad)).collect::<Result<Vec<f64>>>()?.into_iter().fold(f64::INFINITY, f64::min);
        if !(nearest <= NEARBY_LIMIT) {
            return Err(LabError::NoNearbyBubble { limit: NEARBY_LIMIT, found: nearest });
        }
        let nm = NelderMeadOptions { max_evals: opts.max_evals, f_tol: opts.f_tol, x_tol: opts.x_tol };
        let runs: Vec<_> = starts
            .par_iter()
            .map(|b| {
                let objective = |x: &[f64]| match from_params(x, sign, len0) {
                    Some(bb) => pr.objective(u, &bb, &quad, ctx).unwrap_or(f64::INFINITY),
                    None => f64::INFINITY,
                };
                nelder_mead(objective, &to_params(b, len0), &[0.05, 0.1, 0.05], &nm)
            })
            .collect();
        let mut pick = 0;
        for (i, r) in runs.iter().enumerate() {
            if r.f < runs[pick].f {
                pick = i;
            }
        }
        evals = runs.iter().map(|r| r.evals).sum();
        diameter = runs[pick].diameter;
        simplex_converged = runs[pick].converged;
        if runs.iter().all(|r| !r.converged && r.evals >= opts.max_evals) {
            return Err(LabError::NotConverged(opts.max_evals));
        }
        best = from_params(&runs[pick].x, sign, len0).ok_or(LabError::NotConverged(evals))?;
    } else {
        let d = rel_distance(&start, &ctx.quad)?;
        if !(d <= NEARBY_LIMIT) {
            return Err(LabError::NoNearbyBubble { limit: NEARBY_LIMIT, found: d });
        }
    }

    let mut polished = false;
    for _ in 0..opts.polish_iterations {
        let (next, used, done) = pr.polish_step(u, &best, ctx)?;
        evals += used;
        best = next;
        if done {
            polished = true;
            break;
        }
    }

    let defect = zonal_defect(u, &best, ctx)?;
    let mut orthogonality_defect = vec![0.0; ctx.dim.n() + 2];
    orthogonality_defect[0] = defect[0];
    orthogonality_defect[1] = defect[1];
    orthogonality_defect[ctx.dim.n() + 1] = defect[2];
    Ok(ProjectionResult {
        method: pr.name().to_string(),
        bubble: best,
        objective: pr.objective(u, &best, &ctx.quad, ctx)?,
        orthogonality_defect,
        distance: rel_distance(&best, &ctx.quad)?,
        iterations: evals,
        converged: simplex_converged && polished,
        simplex_diameter: diameter,
    })
}

/// `int v^{p*-2} xi (u - v)` for `xi = v, dv/db, dv/dx0`.
pub fn zonal_defect(u: &FieldRef, bub: &Bubble, ctx: &Context) -> Result<[f64; 3]> {
    let ps = ctx.dim.p_star();
    let vf = BubbleField::shared(*bub, ctx.dim);
    let xb = TangentField::shared(*bub, ctx.dim, TangentDirection::Concentration);
    let xz = TangentField::shared(*bub, ctx.dim, TangentDirection::Axial);
    let out = ctx.quad.integrate_many(&[u, &vf, &xb, &xz], 3, |_, j, out| {
        let v = j[1].value;
        let w = v.abs().powf(ps - 2.0) * (j[0].value - v);
        out[0] = w * v;
        out[1] = w * j[2].value;
        out[2] = w * j[3].value;
    })?;
    Ok([out[0].value, out[1].value, out[2].value])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Dimension;
    use crate::quadrature::{combine, scale, RadialShape, ZonalProfile};
    use crate::tangent::orthogonalize;

    fn ctx(n: usize, p: f64) -> Context {
        let dim = Dimension::new(n, p).unwrap();
        Context::new(dim, GridSpec::sized_for(&dim, 1024, 16)).unwrap()
    }

    fn crit_integral(u: &FieldRef, c: &Context) -> f64 {
        let ps = c.dim.p_star();
        c.quad.integrate(&[u], |_, j| j[0].value.abs().powf(ps)).unwrap().value
    }

    #[test]
    fn functional_identities() {
        let c = ctx(3, 1.5);
        let ps = c.dim.p_star();
        let v = Bubble::new(1.3, 0.8, 0.2).unwrap();
        let u = BubbleField::shared(v, c.dim);
        let floor = -crit_integral(&u, &c) / (ps * (ps - 1.0));
        assert!((functional_fu(&u, &v, &c).unwrap() - floor).abs() < 1e-12 * floor.abs());
        for w in [Bubble::new(1.0, 1.0, 0.0).unwrap(), Bubble::new(2.0, 0.3, -0.5).unwrap(), Bubble::new(0.7, 3.0, 0.4).unwrap()] {
            assert!(functional_fu(&u, &w, &c).unwrap() >= floor);
            let f1 = functional_fu(&u, &w, &c).unwrap();
            let f2 = functional_fu(&scale(2.0, &u), &Bubble { a: 2.0 * w.a, ..w }, &c).unwrap();
            assert!((f2 - 2f64.powf(ps) * f1).abs() < 1e-12 * f2.abs());
        }
    }

    #[test]
    fn bubbles_project_to_themselves() {
        let c = ctx(3, 2.0);
        let v = Bubble::new(1.2, 0.7, 0.3).unwrap();
        let u = BubbleField::shared(v, c.dim);
        for name in PROJECTORS {
            let r = projector(name).unwrap().project(&u, &c, None, &ProjectionOptions::default()).unwrap();
            assert!(r.converged, "{name}");
            assert!((r.bubble.a - v.a).abs() < 1e-8 && (r.bubble.b - v.b).abs() < 1e-8 && (r.bubble.x0 - v.x0).abs() < 1e-8, "{name}: {:?}", r.bubble);
            assert!(r.distance < 1e-7);
            assert!(r.orthogonality_defect.iter().all(|d| d.abs() < 1e-8));
        }
    }

    #[test]
    fn orthogonal_perturbation_recovers_the_bubble() {
        let c = ctx(3, 1.5);
        let v = Bubble::unit();
        let phi = ZonalProfile::new(3, 0, RadialShape::Annulus { inner: 0.5, outer: 2.0 }).shared();
        let phi = orthogonalize(&phi, &v, &c).unwrap().field;
        let u = combine(1.0, &BubbleField::shared(v, c.dim), 1e-3, &phi);
        let fu = FunctionalProjector.project(&u, &c, None, &ProjectionOptions::default()).unwrap();
        assert!((fu.bubble.a - 1.0).abs() < 1e-5 && (fu.bubble.b - 1.0).abs() < 1e-5 && fu.bubble.x0.abs() < 1e-5, "{:?}", fu.bubble);
        let scale_ref = crit_integral(&u, &c).powf((c.dim.p_star() - 1.0) / c.dim.p_star());
        assert!(fu.orthogonality_defect.iter().all(|d| d.abs() < 1e-5 * scale_ref), "{:?}", fu.orthogonality_defect);
        let gd = GradientDistanceProjector.project(&u, &c, None, &ProjectionOptions::default()).unwrap();
        let bound = 1e-3 * crate::corpus::gradient_norm(&phi, &c).unwrap() / grad_norm_p(&u, &c).unwrap().powf(1.0 / c.dim.p());
        assert!(gd.distance <= bound * (1.0 + 1e-9));
        assert!(gd.distance <= fu.distance * (1.0 + 1e-9));
    }

    #[test]
    fn projections_follow_axial_shifts() {
        let c = ctx(3, 2.5);
        let phi = ZonalProfile::new(3, 1, RadialShape::Annulus { inner: 0.5, outer: 2.0 }).shared();
        let u0 = combine(1.0, &BubbleField::shared(Bubble::unit(), c.dim), 0.02, &phi);
        let shifted_phi = ZonalProfile::new(3, 1, RadialShape::Annulus { inner: 0.5, outer: 2.0 }).with_center(0.3).shared();
        let u1 = combine(1.0, &BubbleField::shared(Bubble::new(1.0, 1.0, 0.3).unwrap(), c.dim), 0.02, &shifted_phi);
        for name in PROJECTORS {
            let pr = projector(name).unwrap();
            let a = pr.project(&u0, &c, None, &ProjectionOptions::polish_only()).unwrap();
            let b = pr.project(&u1, &c, None, &ProjectionOptions::polish_only()).unwrap();
            assert!((b.bubble.x0 - a.bubble.x0 - 0.3).abs() < 1e-7, "{name}: {} {}", a.bubble.x0, b.bubble.x0);
        }
    }

    #[test]
    fn far_fields_are_rejected() {
        let c = ctx(3, 2.0);
        let u = ZonalProfile::new(3, 0, RadialShape::Annulus { inner: 0.5, outer: 2.0 }).shared();
        let err = FunctionalProjector.project(&u, &c, Some(Bubble::new(1.0, 1.0, 5.0).unwrap()), &ProjectionOptions::default()).unwrap_err();
        assert!(matches!(err, LabError::NoNearbyBubble { .. }));
    }
}
