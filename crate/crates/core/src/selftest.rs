//! Quadrature moment and known-eigenpair checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{sobolev_constant_closed_form, Bubble, Dimension};
use crate::context::Context;
use crate::error::Result;
use crate::quadrature::{BubbleField, FieldRef, Zero};
use crate::special::{beta, sphere_area};
use crate::spectrum::{assemble_sector, eigen_scale, solve_sector, spectral_grid};

/// Dimension pairs covered when none is given.
pub const DEFAULT_PAIRS: [(usize, f64); 4] = [(3, 1.5), (3, 2.0), (4, 2.5), (5, 1.2)];

/// Radial nodes of the eigenpair checks.
pub const EIGEN_NODES: usize = 2048;

/// One comparison against a closed form.
#[derive(Clone, Debug, Serialize)]
pub struct SelfCheck {
    pub name: String,
    pub n: usize,
    pub p: f64,
    pub value: f64,
    pub expected: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SelfCheck {
    fn new(name: &str, dim: &Dimension, value: f64, expected: f64, tolerance: f64) -> Self {
        let relative_error = ((value - expected) / expected).abs();
        Self { name: name.into(), n: dim.n(), p: dim.p(), value, expected, relative_error, tolerance, passed: relative_error < tolerance }
    }
}

/// Moments of the quadrature grid of `ctx` against closed forms.
pub fn quadrature_checks(ctx: &Context) -> Result<Vec<SelfCheck>> {
    let dim = ctx.dim;
    let n = dim.nf();
    let zero: FieldRef = Arc::new(Zero);
    let mut out = Vec::new();
    let gauss = ctx.quad.integrate(&[&zero], |node, _| (-node.r * node.r).exp())?.value;
    out.push(SelfCheck::new("gaussian integral", &dim, gauss, std::f64::consts::PI.powf(0.5 * n), 1e-10));
    let ang = ctx.quad.angular();
    let m = ang.len();
    for k in [0, m / 2, m - 1] {
        let e = 2 * k as i32;
        let value: f64 = ang.nodes().iter().zip(ang.weights()).map(|(mu, w)| w * mu.powi(e)).sum::<f64>() * ang.sphere_factor();
        let expected = sphere_area(dim.n() - 2) * beta(k as f64 + 0.5, 0.5 * (n - 1.0));
        out.push(SelfCheck::new(&format!("angular moment mu^{e}"), &dim, value, expected, 1e-12));
    }
    let v = BubbleField::shared(Bubble::unit(), dim);
    let ps = dim.p_star();
    let norm = ctx.quad.integrate_checked(&[&v], |_, j| j[0].value.abs().powf(ps))?;
    let qe = dim.radial_exponent();
    let expected = sphere_area(dim.n() - 1) * beta(n / qe, ps * dim.decay_exponent() - n / qe) / qe;
    out.push(SelfCheck::new("bubble critical norm", &dim, norm, expected, 1e-8));
    out.push(SelfCheck::new("sobolev constant", &dim, ctx.sobolev, sobolev_constant_closed_form(&dim), 1e-6));
    Ok(out)
}

/// The three eigenvalues fixed by the bubble's symmetries.
pub fn eigenpair_checks(dim: &Dimension, radial_nodes: usize) -> Result<Vec<SelfCheck>> {
    let grid = spectral_grid(dim, radial_nodes)?;
    let c = eigen_scale(dim)?;
    let radial = solve_sector(&assemble_sector(0, dim, &grid)?, 2)?;
    let translation = solve_sector(&assemble_sector(1, dim, &grid)?, 1)?;
    let (p, ps) = (dim.p(), dim.p_star());
    Ok(vec![
        SelfCheck::new("radial ground state", dim, radial.eigenvalues[0], (p - 1.0) * c, 1e-3),
        SelfCheck::new("dilation mode", dim, radial.eigenvalues[1], (ps - 1.0) * c, 1e-3),
        SelfCheck::new("translation mode", dim, translation.eigenvalues[0], (ps - 1.0) * c, 1e-3),
    ])
}

/// Every check for each context.
pub fn run_selftest(contexts: &[Context]) -> Result<Vec<SelfCheck>> {
    let parts = contexts
        .par_iter()
        .map(|ctx| {
            let mut v = quadrature_checks(ctx)?;
            v.extend(eigenpair_checks(&ctx.dim, EIGEN_NODES)?);
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}
