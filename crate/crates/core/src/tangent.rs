//! Pairings with the zonal tangent space of the bubble manifold and
//! orthogonalization against it.

use serde::Serialize;

use crate::bubble::Bubble;
use crate::context::Context;
use crate::error::{LabError, Result};
use crate::linalg::solve_dense;
use crate::quadrature::{BubbleField, Combination, FieldRef, TangentDirection, TangentField};

/// Orthogonality is accepted once every normalized pairing is below this.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// The three zonal tangent fields `v, dv/db, dv/dx0`.
pub fn tangent_fields(v: &Bubble, ctx: &Context) -> [FieldRef; 3] {
    TangentDirection::ALL.map(|d| TangentField::shared(*v, ctx.dim, d))
}

/// `int v^{p*-2} xi_i w` for the three zonal tangent fields `xi_i`.
pub fn tangent_pairings(w: &FieldRef, v: &Bubble, ctx: &Context) -> Result<[f64; 3]> {
    let vf = BubbleField::shared(*v, ctx.dim);
    let [_, xb, xz] = tangent_fields(v, ctx);
    let e = ctx.dim.p_star() - 2.0;
    let out = ctx.quad.integrate_many(&[&vf, w, &xb, &xz], 3, |_, j, out| {
        let weight = j[0].value.abs().powf(e) * j[1].value;
        out[0] = weight * j[0].value;
        out[1] = weight * j[2].value;
        out[2] = weight * j[3].value;
    })?;
    Ok([out[0].value, out[1].value, out[2].value])
}

/// A field with its tangent components removed.
#[derive(Clone, Debug)]
pub struct Orthogonalized {
    pub field: FieldRef,
    /// Multiples of `v, dv/db, dv/dx0` subtracted from the input.
    pub coefficients: [f64; 3],
    /// Remaining pairings with the tangent fields.
    pub defect: [f64; 3],
    /// Largest remaining pairing divided by the product of weighted norms.
    pub relative_defect: f64,
}

/// Report form of [`Orthogonalized`].
#[derive(Clone, Debug, Serialize)]
pub struct OrthogonalitySummary {
    pub coefficients: [f64; 3],
    pub defect: [f64; 3],
    pub relative_defect: f64,
}

impl Orthogonalized {
    pub fn summary(&self) -> OrthogonalitySummary {
        OrthogonalitySummary { coefficients: self.coefficients, defect: self.defect, relative_defect: self.relative_defect }
    }
}

struct Projection {
    coefficients: [f64; 3],
    rhs: [f64; 3],
    gram_diag: [f64; 3],
    self_pairing: f64,
}

fn project(phi: &FieldRef, v: &Bubble, ctx: &Context) -> Result<Projection> {
    let vf = BubbleField::shared(*v, ctx.dim);
    let [_, xb, xz] = tangent_fields(v, ctx);
    let e = ctx.dim.p_star() - 2.0;
    let out = ctx.quad.integrate_many(&[&vf, phi, &xb, &xz], 10, |_, j, out| {
        let wt = j[0].value.abs().powf(e);
        let xi = [j[0].value, j[2].value, j[3].value];
        let f = j[1].value;
        let mut k = 0;
        for a in 0..3 {
            for b in a..3 {
                out[k] = wt * xi[a] * xi[b];
                k += 1;
            }
        }
        for a in 0..3 {
            out[6 + a] = wt * xi[a] * f;
        }
        out[9] = wt * f * f;
    })?;
    let g = |a: usize, b: usize| {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let k = [[0, 1, 2], [1, 3, 4], [2, 4, 5]][a][b];
        out[k].value
    };
    let gram: Vec<Vec<f64>> = (0..3).map(|a| (0..3).map(|b| g(a, b)).collect()).collect();
    let rhs = [out[6].value, out[7].value, out[8].value];
    let c = solve_dense(gram, rhs.to_vec()).ok_or_else(|| LabError::Orthogonalization("tangent Gram matrix is singular".into()))?;
    Ok(Projection { coefficients: [c[0], c[1], c[2]], rhs, gram_diag: [g(0, 0), g(1, 1), g(2, 2)], self_pairing: out[9].value })
}

/// Removes the tangent components of `phi` in the `v^{p*-2}`-weighted pairing.
pub fn orthogonalize(phi: &FieldRef, v: &Bubble, ctx: &Context) -> Result<Orthogonalized> {
    let xi = tangent_fields(v, ctx);
    let mut field = phi.clone();
    let mut total = [0.0; 3];
    for _ in 0..3 {
        let proj = project(&field, v, ctx)?;
        let relative = relative_defect(&proj);
        if relative < ORTHOGONALITY_TOL {
            return Ok(Orthogonalized { field, coefficients: total, defect: proj.rhs, relative_defect: relative });
        }
        for (t, c) in total.iter_mut().zip(&proj.coefficients) {
            *t += c;
        }
        let mut terms = vec![(1.0, phi.clone())];
        terms.extend(total.iter().zip(&xi).map(|(c, x)| (-c, x.clone())));
        field = Combination::new(terms).into_ref();
    }
    let proj = project(&field, v, ctx)?;
    let relative = relative_defect(&proj);
    if !(relative < ORTHOGONALITY_TOL) {
        return Err(LabError::Orthogonalization(format!("relative defect {relative:.3e} after refinement")));
    }
    Ok(Orthogonalized { field, coefficients: total, defect: proj.rhs, relative_defect: relative })
}

fn relative_defect(proj: &Projection) -> f64 {
    if proj.self_pairing <= 0.0 {
        return if proj.rhs.iter().all(|r| *r == 0.0) { 0.0 } else { f64::INFINITY };
    }
    (0..3).map(|i| proj.rhs[i].abs() / (proj.gram_diag[i] * proj.self_pairing).sqrt()).fold(0.0, f64::max)
}
