//! Two-sided numerical inequality used for the subquadratic regime.

use serde::Serialize;

use crate::bubble::Dimension;
use crate::error::{invalid, LabError, Result};

/// Which right side to compare against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InterpolationForm {
    /// Right side carrying the factor `(1+r)^{-p/(p-1)}`.
    Inter,
    /// Right side without that factor.
    Young,
}

/// The point `(eps, r, a, b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterpolationPoint {
    pub eps: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
}

/// The constants `(eps0, zeta, C)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterpolationConstants {
    pub eps0: f64,
    pub zeta: f64,
    pub c: f64,
}

impl InterpolationConstants {
    /// `zeta = (eps0/3)^{1/p}` with the given `C`.
    pub fn balanced(dim: &Dimension, eps0: f64, c: f64) -> Self {
        Self { eps0, zeta: (eps0 / 3.0).powf(1.0 / dim.p()), c }
    }
}

/// Both sides split into the pieces the constant search needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterpolationTerms {
    pub lhs: f64,
    /// `eps0 (1+R)^{E0} a^2`.
    pub absorbed: f64,
    /// The factor multiplying `C` on the selected right side.
    pub coefficient: f64,
}

impl InterpolationTerms {
    pub fn gap(&self, c: f64) -> f64 {
        self.absorbed + c * self.coefficient - self.lhs
    }

    /// Size of the largest term, for relative tolerances.
    pub fn scale(&self, c: f64) -> f64 {
        self.lhs.max(self.absorbed).max(c * self.coefficient)
    }

    /// The smallest `C` making the gap nonnegative.
    pub fn required_c(&self) -> f64 {
        let excess = self.lhs - self.absorbed;
        if excess <= 0.0 {
            f64::NEG_INFINITY
        } else {
            excess / self.coefficient
        }
    }
}

/// Largest admissible `eps * a` at radius `r`: `zeta (1 + r^{p/(p-1)})^{1-n/p}`.
pub fn amplitude_limit(dim: &Dimension, zeta: f64, r: f64) -> f64 {
    let big = r.powf(dim.p() / (dim.p() - 1.0));
    zeta * (1.0 + big).powf(1.0 - dim.nf() / dim.p())
}

fn check_domain(dim: &Dimension, x: &InterpolationPoint, zeta: f64) -> Result<()> {
    let p = dim.p();
    if p > 2.0 * dim.nf() / (dim.nf() + 2.0) {
        return invalid(format!("requires p <= 2n/(n+2), got n={} p={p}", dim.n()));
    }
    if !(x.eps > 0.0 && x.eps < 1.0) {
        return invalid(format!("eps must lie in (0,1), got {}", x.eps));
    }
    if !(x.r >= 0.0 && x.a >= 0.0 && x.b >= 0.0) {
        return invalid("r, a, b must be nonnegative");
    }
    let limit = amplitude_limit(dim, zeta, x.r);
    if x.eps * x.a > limit * (1.0 + 1e-12) {
        return Err(LabError::ConstraintViolated(format!("eps*a = {:.6e} exceeds {limit:.6e}", x.eps * x.a)));
    }
    Ok(())
}

/// Evaluates both sides at a point satisfying the hypothesis.
pub fn interpolation_terms(dim: &Dimension, x: &InterpolationPoint, eps0: f64, zeta: f64, which: InterpolationForm) -> Result<InterpolationTerms> {
    check_domain(dim, x, zeta)?;
    let (n, p) = (dim.nf(), dim.p());
    let q = p / (p - 1.0);
    let big = x.r.powf(q);
    let one_big = 1.0 + big;
    let e0 = (1.0 - n / p) * (dim.p_star() - 2.0);
    let e1 = e0 + p - 1.0;
    let (a, b, eps) = (x.a, x.b, x.eps);
    let inner = a * a * zeta.powf(p) * big * one_big.powf(-p) + a * a * (eps * b).powf(p) * one_big.powf(n - p) + if b > 0.0 { a.powf(2.0 - p) * b.powf(p) } else { 0.0 };
    let lhs = one_big.powf(e1) * inner;
    let absorbed = eps0 * one_big.powf(e0) * a * a;
    let base = one_big.powf(-n / p) * x.r.powf(1.0 / (p - 1.0)) + eps * b;
    let mut coefficient = if b > 0.0 { base.powf(p - 2.0) * b * b } else { 0.0 };
    if which == InterpolationForm::Inter {
        coefficient *= (1.0 + x.r).powf(-q);
    }
    Ok(InterpolationTerms { lhs, absorbed, coefficient })
}

/// Right side minus left side of the selected inequality.
pub fn interpolation_gap(dim: &Dimension, x: &InterpolationPoint, k: &InterpolationConstants, which: InterpolationForm) -> Result<f64> {
    Ok(interpolation_terms(dim, x, k.eps0, k.zeta, which)?.gap(k.c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim() -> Dimension {
        Dimension::new(3, 1.2).unwrap()
    }

    #[test]
    fn zero_amplitudes_give_zero_gap() {
        let k = InterpolationConstants::balanced(&dim(), 0.1, 5.0);
        let x = InterpolationPoint { eps: 0.3, r: 2.0, a: 0.0, b: 0.0 };
        assert_eq!(interpolation_gap(&dim(), &x, &k, InterpolationForm::Inter).unwrap(), 0.0);
    }

    #[test]
    fn young_form_dominates() {
        let d = Dimension::new(4, 1.3).unwrap();
        let k = InterpolationConstants::balanced(&d, 0.2, 3.0);
        for &(eps, r, frac, b) in &[(0.5, 0.3, 0.5, 2.0), (0.01, 7.0, 0.9, 1e-3), (0.9, 0.0, 0.1, 40.0)] {
            let a = frac * amplitude_limit(&d, k.zeta, r) / eps;
            let x = InterpolationPoint { eps, r, a, b };
            let inter = interpolation_gap(&d, &x, &k, InterpolationForm::Inter).unwrap();
            let young = interpolation_gap(&d, &x, &k, InterpolationForm::Young).unwrap();
            assert!(young >= inter);
        }
    }

    #[test]
    fn hypothesis_is_enforced() {
        let k = InterpolationConstants::balanced(&dim(), 0.1, 1.0);
        let limit = amplitude_limit(&dim(), k.zeta, 1.0);
        let x = InterpolationPoint { eps: 0.5, r: 1.0, a: 3.0 * limit, b: 1.0 };
        assert!(matches!(interpolation_gap(&dim(), &x, &k, InterpolationForm::Inter), Err(LabError::ConstraintViolated(_))));
        let bad = Dimension::new(3, 2.0).unwrap();
        assert!(matches!(interpolation_gap(&bad, &x, &k, InterpolationForm::Inter), Err(LabError::Invalid(_))));
    }

    #[test]
    fn balanced_zeta_absorbs_pure_amplitude() {
        let d = dim();
        let k = InterpolationConstants::balanced(&d, 0.3, 0.0);
        for &r in &[0.0, 0.5, 3.0, 100.0] {
            let a = amplitude_limit(&d, k.zeta, r) / 0.5;
            let x = InterpolationPoint { eps: 0.5, r, a, b: 0.0 };
            assert!(interpolation_gap(&d, &x, &k, InterpolationForm::Inter).unwrap() >= 0.0);
        }
    }
}
