//! Test perturbations and named fields.

use rand::Rng;

use crate::bubble::{Bubble, Dimension};
use crate::context::Context;
use crate::error::{invalid, LabError, Result};
use crate::kernels::search::chunk_rng;
use crate::quadrature::{combine, scale, BubbleField, FarBump, FieldRef, RadialShape, StretchedBubble, ZonalProfile};

/// Annuli used by the standard corpus.
pub const STANDARD_ANNULI: [(f64, f64); 4] = [(0.3, 1.2), (0.8, 2.5), (1.5, 4.0), (3.0, 8.0)];

/// Highest zonal degree in the corpora.
pub const MAX_DEGREE: usize = 3;

/// A labeled perturbation.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub label: String,
    pub field: FieldRef,
}

/// Zonal bumps `f(r) P_ell(mu)` for `ell = 0..=3` on the standard annuli,
/// plus plateaus that are constant near the origin.
pub fn standard_corpus(dim: &Dimension) -> Vec<CorpusEntry> {
    let n = dim.n();
    let mut out = Vec::new();
    for ell in 0..=MAX_DEGREE {
        for &(inner, outer) in &STANDARD_ANNULI {
            out.push(CorpusEntry { label: format!("annulus ell={ell} r=({inner},{outer})"), field: ZonalProfile::new(n, ell, RadialShape::Annulus { inner, outer }).shared() });
        }
    }
    for &(inner, outer) in &[(0.5, 1.5), (1.0, 4.0)] {
        out.push(CorpusEntry { label: format!("plateau r=({inner},{outer})"), field: ZonalProfile::new(n, 0, RadialShape::Plateau { inner, outer }).shared() });
    }
    out
}

fn random_annulus(dim: &Dimension, rng: &mut impl Rng) -> (String, FieldRef) {
    let ell = rng.gen_range(0..=MAX_DEGREE);
    let inner = 10f64.powf(rng.gen_range(-1.0..0.6));
    let outer = inner * rng.gen_range(1.5..4.0);
    let amp = if rng.gen::<bool>() { 1.0 } else { -1.0 } * rng.gen_range(0.2..1.0);
    let label = format!("{amp:.3}*annulus(ell={ell}, r=({inner:.3},{outer:.3}))");
    let f = ZonalProfile::new(dim.n(), ell, RadialShape::Annulus { inner, outer }).with_amplitude(amp).shared();
    (label, f)
}

/// Sums of one or two random zonal annulus bumps, deterministic in `seed`.
pub fn random_corpus(dim: &Dimension, count: usize, seed: u64) -> Vec<CorpusEntry> {
    (0..count)
        .map(|i| {
            let mut rng = chunk_rng(seed, i as u64);
            let (l1, f1) = random_annulus(dim, &mut rng);
            if rng.gen::<bool>() {
                let (l2, f2) = random_annulus(dim, &mut rng);
                CorpusEntry { label: format!("{l1} + {l2}"), field: combine(1.0, &f1, 1.0, &f2) }
            } else {
                CorpusEntry { label: l1, field: f1 }
            }
        })
        .collect()
}

/// Random zonal Gaussians `r^ell exp(-(r/w)^2) P_ell(mu)`, which reach the
/// origin and so have mass in every small ball, deterministic in `seed`.
pub fn smooth_corpus(dim: &Dimension, count: usize, seed: u64) -> Vec<CorpusEntry> {
    (0..count)
        .map(|i| {
            let mut rng = chunk_rng(seed, i as u64);
            let ell = rng.gen_range(0..=MAX_DEGREE);
            let width = 10f64.powf(rng.gen_range(-0.5..0.5));
            let center = rng.gen_range(-0.5..0.5);
            let amp = if rng.gen::<bool>() { 1.0 } else { -1.0 } * rng.gen_range(0.2..1.0);
            let field = ZonalProfile::new(dim.n(), ell, RadialShape::Gaussian { width }).with_origin_power(ell as i32).with_center(center).with_amplitude(amp).shared();
            CorpusEntry { label: format!("{amp:.3}*gaussian(ell={ell}, width={width:.3}, center={center:.3})"), field }
        })
        .collect()
}

/// Names accepted by [`builtin_field`].
pub const BUILTIN_FIELDS: [&str; 4] = ["bubble", "bubble-annulus", "stretched", "far-bump"];

/// A named analytic field.
pub fn builtin_field(name: &str, dim: &Dimension) -> Result<FieldRef> {
    let v = BubbleField::shared(Bubble::unit(), *dim);
    match name {
        "bubble" => Ok(v),
        "bubble-annulus" => {
            let bump = ZonalProfile::new(dim.n(), 0, RadialShape::Annulus { inner: 0.8, outer: 2.5 }).shared();
            Ok(combine(1.0, &v, 0.05, &bump))
        }
        "stretched" => Ok(StretchedBubble::shared(Bubble::unit(), *dim, 1.25)),
        "far-bump" => Ok(combine(1.0, &v, 0.01, &FarBump::shared(40.0, 1.0, 1.0))),
        other => invalid(format!("unknown field '{other}', expected one of {}", BUILTIN_FIELDS.join(", "))),
    }
}

/// `||D phi||_{L^p}`.
pub fn gradient_norm(phi: &FieldRef, ctx: &Context) -> Result<f64> {
    let p = ctx.dim.p();
    let v = ctx.quad.integrate(&[phi], |_, j| j[0].grad_norm().powf(p))?.checked()?;
    Ok(v.powf(1.0 / p))
}

/// `phi / ||D phi||_{L^p}` together with the original norm.
pub fn normalize_gradient(phi: &FieldRef, ctx: &Context) -> Result<(FieldRef, f64)> {
    let norm = gradient_norm(phi, ctx)?;
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(LabError::Invalid(format!("cannot normalize a field with gradient norm {norm}")));
    }
    Ok((scale(1.0 / norm, phi), norm))
}
