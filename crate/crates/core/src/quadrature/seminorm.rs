//! Bubble-weighted quadratic integrals of a perturbation.

use serde::Serialize;

use crate::bubble::{Bubble, Dimension};
use crate::error::{LabError, Result};

use super::field::{BubbleField, FieldRef};
use super::integrate::Quadrature;

/// Share of an integral allowed in the first radial decade before the
/// integrand is declared non-integrable at the origin.
pub const ORIGIN_SHARE: f64 = 1e-6;

/// Weight of a quadratic integral of `phi` against the bubble `v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SeminormWeight {
    /// `int |Dv|^{p-2} |D phi|^2`.
    GradientWeighted,
    /// `int v^{p*-2} phi^2`.
    ValueWeighted,
    /// `int (v + c1 |eps phi|)^{p*} / (v^2 + |eps phi|^2) phi^2`.
    Orlicz { eps: f64, c1: f64 },
}

/// Integrand of a weighted seminorm at one point.
pub fn seminorm_density(weight: SeminormWeight, dim: &Dimension, v: f64, dv: f64, phi: f64, dphi: f64) -> f64 {
    let p = dim.p();
    let ps = dim.p_star();
    match weight {
        SeminormWeight::GradientWeighted => {
            if dphi == 0.0 {
                0.0
            } else {
                dv.powf(p - 2.0) * dphi * dphi
            }
        }
        SeminormWeight::ValueWeighted => {
            if phi == 0.0 {
                0.0
            } else {
                v.abs().powf(ps - 2.0) * phi * phi
            }
        }
        SeminormWeight::Orlicz { eps, c1 } => {
            if phi == 0.0 {
                0.0
            } else {
                let e = (eps * phi).abs();
                (v.abs() + c1 * e).powf(ps) / (v * v + e * e) * phi * phi
            }
        }
    }
}

/// Weighted quadratic integral of `phi` against the bubble `v`, with an
/// origin integrability check on the first radial decade.
pub fn weighted_seminorm(phi: &FieldRef, v: &Bubble, dim: &Dimension, weight: SeminormWeight, quad: &Quadrature) -> Result<f64> {
    let vf = BubbleField::shared(*v, *dim);
    let rows = quad.integrate_rows(&[phi, &vf], |_, j| seminorm_density(weight, dim, j[1].value, j[1].grad_norm(), j[0].value, j[0].grad_norm()))?;
    let total = rows.integral.value;
    let logs = quad.radial().log_nodes();
    let first_decade_end = logs[0] + std::f64::consts::LN_10;
    let first: f64 = rows.rows.iter().zip(logs).take_while(|(_, s)| **s < first_decade_end).map(|(c, _)| c.abs()).sum();
    if !total.is_finite() || first > ORIGIN_SHARE * total.abs() {
        return Err(LabError::DivergentNearOrigin { first_decade: first, total });
    }
    rows.integral.checked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::field::{RadialShape, ZonalProfile};
    use crate::quadrature::grid::GridSpec;

    #[test]
    fn value_weight_of_bubble_is_critical_norm() {
        let dim = Dimension::new(3, 1.5).unwrap();
        let q = Quadrature::new(&dim, GridSpec::sized_for(&dim, 1024, 16)).unwrap();
        let v = Bubble::unit();
        let vf = BubbleField::shared(v, dim);
        let a = weighted_seminorm(&vf, &v, &dim, SeminormWeight::ValueWeighted, &q).unwrap();
        let ps = dim.p_star();
        let b = q.integrate(&[&vf], |_, j| j[0].value.powf(ps)).unwrap().value;
        assert!((a - b).abs() < 1e-13 * b);
    }

    #[test]
    fn orlicz_limits_to_value_weight() {
        let dim = Dimension::new(3, 1.2).unwrap();
        let q = Quadrature::new(&dim, GridSpec::sized_for(&dim, 1024, 16)).unwrap();
        let v = Bubble::unit();
        let phi = ZonalProfile::new(3, 1, RadialShape::Annulus { inner: 0.5, outer: 2.0 }).shared();
        let a = weighted_seminorm(&phi, &v, &dim, SeminormWeight::ValueWeighted, &q).unwrap();
        let b = weighted_seminorm(&phi, &v, &dim, SeminormWeight::Orlicz { eps: 1e-6, c1: 2.0 }, &q).unwrap();
        assert!((a - b).abs() < 1e-4 * a);
    }

    #[test]
    fn gradient_weight_finite_for_bump_off_origin_and_divergent_otherwise() {
        let dim = Dimension::new(3, 1.1).unwrap();
        let q = Quadrature::new(&dim, GridSpec::sized_for(&dim, 1024, 16)).unwrap();
        let v = Bubble::unit();
        let off = ZonalProfile::new(3, 0, RadialShape::Annulus { inner: 0.5, outer: 1.5 }).shared();
        let val = weighted_seminorm(&off, &v, &dim, SeminormWeight::GradientWeighted, &q).unwrap();
        assert!(val.is_finite() && val > 0.0);
        let through = ZonalProfile::new(3, 1, RadialShape::Gaussian { width: 1.0 }).with_origin_power(1).shared();
        let err = weighted_seminorm(&through, &v, &dim, SeminormWeight::GradientWeighted, &q).unwrap_err();
        assert!(matches!(err, LabError::DivergentNearOrigin { .. }));
    }
}
