//! The Sobolev deficit and the term-by-term expansion of `||Du||^p - S^p ||u||^p`
//! around a bubble.

use serde::Serialize;

use crate::bubble::Bubble;
use crate::context::Context;
use crate::corpus::normalize_gradient;
use crate::error::{invalid, Result};
use crate::kernels::upper_expansion::{quadratic_coefficient, UpperBranch};
use crate::kernels::vector::{relative_weight, PairInvariants};
use crate::quadrature::{combine, BubbleField, FieldRef};

/// Relative tolerance of the Euler–Lagrange cross-identity.
pub const IDENTITY_TOL: f64 = 1e-6;

/// Deficit of a field together with the norms it is built from.
#[derive(Clone, Debug, Serialize)]
pub struct DeficitReport {
    pub deficit: f64,
    /// `||Du||_{L^p}`.
    pub grad_norm: f64,
    /// `||u||_{L^{p*}}`.
    pub func_norm: f64,
    pub sobolev: f64,
    pub grad_tail: f64,
    pub func_tail: f64,
}

/// `||Du||_p / ||u||_{p*} - S`.
pub fn deficit(u: &FieldRef, ctx: &Context) -> Result<DeficitReport> {
    let p = ctx.dim.p();
    let ps = ctx.dim.p_star();
    let out = ctx.quad.integrate_many(&[u], 2, |_, j, out| {
        out[0] = j[0].grad_norm().powf(p);
        out[1] = j[0].value.abs().powf(ps);
    })?;
    let grad = out[0].checked()?;
    let func = out[1].checked()?;
    let grad_norm = grad.powf(1.0 / p);
    let func_norm = func.powf(1.0 / ps);
    Ok(DeficitReport { deficit: grad_norm / func_norm - ctx.sobolev, grad_norm, func_norm, sobolev: ctx.sobolev, grad_tail: out[0].tail, func_tail: out[1].tail })
}

/// `u = v + eps phi` with `||D phi||_{L^p} = 1`.
#[derive(Clone, Debug)]
pub struct PerturbedBubble {
    pub base: Bubble,
    pub eps: f64,
    pub phi: FieldRef,
}

impl PerturbedBubble {
    /// Normalizes `phi` to unit gradient norm.
    pub fn new(base: Bubble, eps: f64, phi: &FieldRef, ctx: &Context) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return invalid(format!("perturbation size must be nonnegative, got {eps}"));
        }
        let (phi, _) = normalize_gradient(phi, ctx)?;
        Ok(Self { base, eps, phi })
    }

    pub fn bubble_field(&self, ctx: &Context) -> FieldRef {
        BubbleField::shared(self.base, ctx.dim)
    }

    pub fn field(&self, ctx: &Context) -> FieldRef {
        combine(1.0, &self.bubble_field(ctx), self.eps, &self.phi)
    }
}

/// Constants of the pointwise inequalities used by the expansion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainConstants {
    pub kappa: f64,
    pub c0: f64,
    pub c1: f64,
}

/// Every integral of the expansion of `||Du||^p - S^p ||u||^p`, `u = v + eps phi`.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionLedger {
    pub eps: f64,
    pub constants: ChainConstants,
    pub branch: UpperBranch,
    /// `||Dv||^p`.
    pub zeroth: f64,
    /// `int v^{p*}`.
    pub func_zeroth: f64,
    /// `||Du||^p`.
    pub grad_u: f64,
    /// `int |u|^{p*}`.
    pub func_u: f64,
    /// `p int |Dv|^{p-2} Dv.D phi`.
    pub grad_first: f64,
    /// `p* int v^{p*-1} phi`.
    pub func_first: f64,
    /// `int |Dv|^{p-2} |D phi|^2`.
    pub grad_quadratic: f64,
    /// `(p-2) int |w|^{p-2} ((|Du| - |Dv|)/eps)^2`.
    pub weight_term: f64,
    /// `int min{eps^p |D phi|^p, eps^2 |Dv|^{p-2} |D phi|^2}`.
    pub min_term: f64,
    /// Integral of the normalizer of the vector inequality at `(Dv, eps D phi)`.
    pub normalizer_term: f64,
    /// `int (v + C1 |eps phi|)^{p*} / (v^2 + |eps phi|^2) phi^2`.
    pub orlicz_term: f64,
    /// `int v^{p*-2} phi^2`.
    pub value_quadratic: f64,
    /// `int |phi|^{p*}`.
    pub func_power: f64,
    /// Share of `int eps^p |D phi|^p` on the set `eps |D phi| >= |Dv|`.
    pub large_gradient_share: f64,
    pub identity: IdentityCheck,
    pub chain: ChainCheck,
}

/// `p int |Dv|^{p-2} Dv.D phi` against `||v||^{p-p*} S^p p int v^{p*-1} phi`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityCheck {
    pub gradient_side: f64,
    pub function_side: f64,
    /// `p int |Dv|^{p-1} |D phi|`, the size the difference is measured against.
    pub scale: f64,
    pub relative_error: f64,
    pub holds: bool,
}

/// `||Du||^p - S^p ||u||^p` against the lower bound assembled from the ledger.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainCheck {
    pub lhs: f64,
    pub lower_bound: f64,
    pub slack: f64,
    /// Largest magnitude among the assembled terms.
    pub scale: f64,
    pub holds: bool,
}

const OUTPUTS: usize = 17;

/// Evaluates the expansion ledger in a single quadrature pass.
pub fn expansion_ledger(pb: &PerturbedBubble, k: ChainConstants, ctx: &Context) -> Result<ExpansionLedger> {
    if !(k.kappa > 0.0 && k.kappa < 1.0 && k.c0 >= 0.0 && k.c1 >= 0.0) {
        return invalid(format!("need 0 < kappa < 1 and nonnegative c0, c1, got {k:?}"));
    }
    let dim = ctx.dim;
    let (p, ps) = (dim.p(), dim.p_star());
    let eps = pb.eps;
    let vf = pb.bubble_field(ctx);
    let out = ctx.quad.integrate_many(&[&vf, &pb.phi], OUTPUTS, |_, j, out| {
        let (v, f) = (j[0].value, j[1].value);
        let dv = j[0].grad_norm();
        let df = j[1].grad_norm();
        let dot = j[0].grad_dot(&j[1]);
        let u = v + eps * f;
        let du = j[0].plus(j[1].scaled(eps)).grad_norm();
        let dvp2 = if dv > 0.0 { dv.powf(p - 2.0) } else { 0.0 };
        let vabs = v.abs();
        out[0] = dv.powf(p);
        out[1] = vabs.powf(ps);
        out[2] = du.powf(p);
        out[3] = u.abs().powf(ps);
        out[4] = dvp2 * dot;
        out[5] = vabs.powf(ps - 1.0) * f;
        out[6] = dv.powf(p - 1.0) * df;
        out[7] = vabs.powf(ps - 1.0) * f.abs();
        let gq = if df > 0.0 { dvp2 * df * df } else { 0.0 };
        out[8] = gq;
        out[9] = if dv > 0.0 && df > 0.0 {
            let ue = (2.0 * dot + eps * df * df) / (dv * dv);
            let inv = PairInvariants { t: (eps * df / dv).powi(2), u: eps * ue };
            let zeta = inv.zeta();
            (p - 2.0) * dvp2 * relative_weight(zeta, p) * (dv * ue / (1.0 + zeta)).powi(2)
        } else {
            0.0
        };
        let large = (eps * df).powf(p);
        out[10] = large.min(eps * eps * gq);
        out[11] = if p < 2.0 { out[10] } else { large };
        let e = (eps * f).abs();
        out[12] = if f != 0.0 { (vabs + k.c1 * e).powf(ps) / (v * v + e * e) * f * f } else { 0.0 };
        out[13] = if f != 0.0 { vabs.powf(ps - 2.0) * f * f } else { 0.0 };
        out[14] = f.abs().powf(ps);
        out[15] = if eps * df >= dv { large } else { 0.0 };
        out[16] = large;
    })?;
    let val: Vec<f64> = out.iter().map(|i| i.value).collect();
    out[0].checked()?;
    out[1].checked()?;

    let lambda = ctx.sobolev.powf(p) * val[1].powf((p - ps) / ps);
    let grad_first = p * val[4];
    let func_first = ps * val[5];
    let function_side = lambda * p * val[5];
    let scale = p * val[6];
    let relative_error = if scale > 0.0 { (grad_first - function_side).abs() / scale } else { 0.0 };
    let identity = IdentityCheck { gradient_side: grad_first, function_side, scale, relative_error, holds: relative_error < IDENTITY_TOL };

    let branch = UpperBranch::for_dimension(&dim);
    let kq = quadratic_coefficient(ps, k.kappa);
    let upper = match branch {
        UpperBranch::Orlicz => eps * eps * kq * val[12],
        UpperBranch::Split => eps * eps * kq * val[13] + eps.powf(ps) * k.c1 * val[14],
    };
    let sp = ctx.sobolev.powf(p);
    let func_norm_p = val[1].powf(p / ps);
    let concave = lambda * (p / ps);
    let terms =
        [val[0] - sp * func_norm_p, eps * grad_first, -concave * eps * func_first, 0.5 * (1.0 - k.kappa) * eps * eps * p * (val[8] + val[9]), k.c0 * val[11], -concave * upper];
    let lower_bound: f64 = terms.iter().sum();
    let lhs = val[2] - sp * val[3].powf(p / ps);
    let chain_scale = terms.iter().fold(val[2], |m, t| m.max(t.abs()));
    let slack = lhs - lower_bound;
    let chain = ChainCheck { lhs, lower_bound, slack, scale: chain_scale, holds: slack >= -1e-9 * chain_scale };

    Ok(ExpansionLedger {
        eps,
        constants: k,
        branch,
        zeroth: val[0],
        func_zeroth: val[1],
        grad_u: val[2],
        func_u: val[3],
        grad_first,
        func_first,
        grad_quadratic: val[8],
        weight_term: val[9],
        min_term: val[10],
        normalizer_term: val[11],
        orlicz_term: val[12],
        value_quadratic: val[13],
        func_power: val[14],
        large_gradient_share: if val[16] > 0.0 { val[15] / val[16] } else { 0.0 },
        identity,
        chain,
    })
}

/// Deficit against `c (||Du||^p - S^p)` at unit critical norm, where
/// `c = 1/(p (S + 0.1)^{p-1})` comes from the mean value bound on `t^p`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LowerEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    /// Whether the deficit is small enough (`<= 0.1`) for the bound to apply.
    pub applicable: bool,
    pub holds: bool,
}

/// Largest deficit for which [`lower_estimate_check`] asserts the bound.
pub const LOWER_ESTIMATE_RANGE: f64 = 0.1;

pub fn lower_estimate_check(u: &FieldRef, ctx: &Context) -> Result<LowerEstimate> {
    let r = deficit(u, ctx)?;
    let p = ctx.dim.p();
    let s = ctx.sobolev;
    let ratio = r.grad_norm / r.func_norm;
    let constant = 1.0 / (p * (s + LOWER_ESTIMATE_RANGE).powf(p - 1.0));
    let lhs = r.deficit;
    let rhs = constant * (ratio.powf(p) - s.powf(p));
    let applicable = lhs <= LOWER_ESTIMATE_RANGE;
    Ok(LowerEstimate { lhs, rhs, constant, applicable, holds: lhs >= rhs - 1e-12 * s })
}

/// `int min{eps^p |D phi|^p, eps^2 |Dv|^{p-2} |D phi|^2}` against
/// `c (eps^p int |D phi|^p)^{2/p}` with `c = 2^{1-2/p} min(1, ||Dv||_p^{p-2})`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolderMinBound {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    /// `lhs / (eps^p int |D phi|^p)^{2/p}`, the empirical constant.
    pub ratio: f64,
    pub holds: bool,
}

pub fn holder_min_bound(phi: &FieldRef, eps: f64, v: &Bubble, ctx: &Context) -> Result<HolderMinBound> {
    let p = ctx.dim.p();
    if p >= 2.0 {
        return invalid(format!("the min-term bound needs p < 2, got {p}"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("eps must lie in (0, 1], got {eps}"));
    }
    let (phi, _) = normalize_gradient(phi, ctx)?;
    let vf = BubbleField::shared(*v, ctx.dim);
    let out = ctx.quad.integrate_many(&[&vf, &phi], 3, |_, j, out| {
        let dv = j[0].grad_norm();
        let df = j[1].grad_norm();
        let large = (eps * df).powf(p);
        let small = if df > 0.0 { eps * eps * dv.powf(p - 2.0) * df * df } else { 0.0 };
        out[0] = large.min(small);
        out[1] = large;
        out[2] = dv.powf(p);
    })?;
    let (lhs, total, grad_v) = (out[0].value, out[1].value, out[2].value);
    let e = 2.0 / p;
    let constant = 2f64.powf(1.0 - e) * grad_v.powf(1.0 - e).min(1.0);
    let base = total.powf(e);
    let rhs = constant * base;
    Ok(HolderMinBound { lhs, rhs, constant, ratio: lhs / base, holds: lhs >= rhs * (1.0 - 1e-12) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Dimension;
    use crate::corpus::standard_corpus;
    use crate::kernels::{search_c0, search_c1};
    use crate::quadrature::{scale, GridSpec, RadialShape, ZonalProfile};
    use crate::tangent::orthogonalize;

    fn ctx(n: usize, p: f64, radial: usize, angular: usize) -> Context {
        let dim = Dimension::new(n, p).unwrap();
        Context::new(dim, GridSpec::sized_for(&dim, radial, angular)).unwrap()
    }

    fn annulus(n: usize, ell: usize) -> FieldRef {
        ZonalProfile::new(n, ell, RadialShape::Annulus { inner: 0.8, outer: 2.5 }).shared()
    }

    #[test]
    fn bubbles_have_zero_deficit() {
        for &(n, p) in &[(3usize, 1.5f64), (3, 2.0), (4, 2.5), (5, 1.2)] {
            let c = ctx(n, p, 2048, 16);
            for bub in [Bubble::unit(), Bubble::new(2.5, 0.3, 0.7).unwrap(), Bubble::new(0.4, 6.0, -1.0).unwrap()] {
                let r = deficit(&BubbleField::shared(bub, c.dim), &c).unwrap();
                assert!(r.deficit.abs() < 1e-7, "({n},{p}) {bub:?}: {}", r.deficit);
            }
        }
    }

    #[test]
    fn perturbation_has_positive_scale_invariant_deficit() {
        let c = ctx(3, 2.0, 1024, 24);
        let v = BubbleField::shared(Bubble::unit(), c.dim);
        let u = combine(1.0, &v, 0.05, &annulus(3, 0));
        let d1 = deficit(&u, &c).unwrap().deficit;
        let d2 = deficit(&scale(2.0, &u), &c).unwrap().deficit;
        assert!(d1 > 1e-6);
        assert!((d1 - d2).abs() < 1e-10 * d1);
    }

    #[test]
    fn euler_lagrange_identity_holds_on_corpus() {
        for &(n, p) in &[(3usize, 1.5f64), (4, 2.5)] {
            let c = ctx(n, p, 1024, 24);
            let k = ChainConstants { kappa: 0.5, c0: 0.0, c1: 1.0 };
            for e in standard_corpus(&c.dim) {
                let pb = PerturbedBubble::new(Bubble::unit(), 1e-2, &e.field, &c).unwrap();
                let l = expansion_ledger(&pb, k, &c).unwrap();
                assert!(l.identity.holds, "({n},{p}) {}: {:e}", e.label, l.identity.relative_error);
            }
        }
    }

    #[test]
    fn zero_perturbation_gives_zero_terms() {
        let c = ctx(3, 1.5, 1024, 16);
        let pb = PerturbedBubble::new(Bubble::unit(), 0.0, &annulus(3, 1), &c).unwrap();
        let l = expansion_ledger(&pb, ChainConstants { kappa: 0.3, c0: 0.1, c1: 1.0 }, &c).unwrap();
        assert_eq!(l.min_term, 0.0);
        assert_eq!(l.normalizer_term, 0.0);
        assert_eq!(l.grad_u, l.zeroth);
        assert_eq!(l.func_u, l.func_zeroth);
    }

    #[test]
    fn chain_lower_bound_holds() {
        for &(n, p) in &[(3usize, 1.2f64), (3, 1.7), (4, 2.5)] {
            let c = ctx(n, p, 1024, 24);
            let kappa = 0.5;
            let c0 = search_c0(p, kappa, 20_000, 3).unwrap().estimate;
            let c1 = search_c1(&c.dim, kappa).unwrap().c1;
            let k = ChainConstants { kappa, c0, c1 };
            for (i, e) in standard_corpus(&c.dim).iter().enumerate().step_by(3) {
                let eps = [1e-1, 1e-2, 1e-3][i % 3];
                let phi = orthogonalize(&e.field, &Bubble::unit(), &c).unwrap().field;
                let pb = PerturbedBubble::new(Bubble::unit(), eps, &phi, &c).unwrap();
                let l = expansion_ledger(&pb, k, &c).unwrap();
                assert!(l.chain.holds, "({n},{p}) {} eps={eps}: {:?}", e.label, l.chain);
            }
        }
    }

    #[test]
    fn lower_estimate_holds_near_bubbles() {
        let c = ctx(3, 1.5, 1024, 24);
        let v = BubbleField::shared(Bubble::unit(), c.dim);
        let r = lower_estimate_check(&v, &c).unwrap();
        assert!(r.lhs.abs() < 1e-7 && r.rhs.abs() < 1e-6);
        let u = combine(1.0, &v, 0.05, &annulus(3, 2));
        let r = lower_estimate_check(&u, &c).unwrap();
        assert!(r.applicable && r.holds && r.lhs > 0.0, "{r:?}");
    }

    #[test]
    fn min_term_bound_and_small_eps_limit() {
        let c = ctx(3, 1.5, 1024, 24);
        let v = Bubble::unit();
        let phi = annulus(3, 1);
        for eps in [0.5, 1e-1, 1e-2] {
            let h = holder_min_bound(&phi, eps, &v, &c).unwrap();
            assert!(h.holds && h.ratio > 0.0, "{eps}: {h:?}");
        }
        let pb = PerturbedBubble::new(v, 1e-4, &phi, &c).unwrap();
        let l = expansion_ledger(&pb, ChainConstants { kappa: 0.5, c0: 0.0, c1: 1.0 }, &c).unwrap();
        let h = holder_min_bound(&phi, 1e-4, &v, &c).unwrap();
        assert!((h.lhs / 1e-8 - l.grad_quadratic).abs() < 1e-6 * l.grad_quadratic);
        assert_eq!(l.large_gradient_share, 0.0);
    }
}
