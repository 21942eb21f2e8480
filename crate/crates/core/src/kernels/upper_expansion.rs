//! Upper expansion of `|a+b|^{p*}` with an Orlicz-type or split remainder.

use serde::Serialize;

use crate::bubble::Dimension;
use crate::special::pow1p_remainder;

/// Which form of the upper bound applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UpperBranch {
    /// `p* <= 2`: remainder `K (|a| + C1|b|)^{p*} b^2 / (a^2 + b^2)`.
    Orlicz,
    /// `p* > 2`: remainder `K |a|^{p*-2} b^2 + C1 |b|^{p*}`.
    Split,
}

impl UpperBranch {
    pub fn for_dimension(dim: &Dimension) -> Self {
        if dim.p_star() <= 2.0 {
            Self::Orlicz
        } else {
            Self::Split
        }
    }
}

/// `p*(p*-1)/2 + kappa`.
pub fn quadratic_coefficient(q: f64, kappa: f64) -> f64 {
    0.5 * q * (q - 1.0) + kappa
}

/// `|1+t|^q - 1 - q t`.
pub fn unit_remainder(t: f64, q: f64) -> f64 {
    if t > -1.0 {
        pow1p_remainder(t, q)
    } else {
        (1.0 + t).abs().powf(q) - 1.0 - q * t
    }
}

/// Right side minus left side at `a = 1`, `b = t`.
pub fn reduced_gap(t: f64, q: f64, kappa: f64, c1: f64, branch: UpperBranch) -> f64 {
    let k = quadratic_coefficient(q, kappa);
    let bound = match branch {
        UpperBranch::Orlicz => k * (1.0 + c1 * t.abs()).powf(q) * t * t / (1.0 + t * t),
        UpperBranch::Split => k * t * t + c1 * t.abs().powf(q),
    };
    bound - unit_remainder(t, q)
}

/// Right side minus left side of the upper bound for `(a, b)`, `a != 0`.
pub fn upper_expansion_gap(a: f64, b: f64, dim: &Dimension, kappa: f64, c1: f64) -> f64 {
    let q = dim.p_star();
    a.abs().powf(q) * reduced_gap(b / a, q, kappa, c1, UpperBranch::for_dimension(dim))
}

/// The smallest `C1` making the reduced gap nonnegative at `t`.
///
/// Returns `-inf` where every `C1 >= 0` works.
pub fn required_c1(t: f64, q: f64, kappa: f64, branch: UpperBranch) -> f64 {
    if t == 0.0 {
        return f64::NEG_INFINITY;
    }
    let k = quadratic_coefficient(q, kappa);
    let rem = unit_remainder(t, q);
    match branch {
        UpperBranch::Orlicz => {
            if rem <= 0.0 {
                return f64::NEG_INFINITY;
            }
            let base = (1.0 + t * t) * rem / (k * t * t);
            (base.powf(1.0 / q) - 1.0) / t.abs()
        }
        UpperBranch::Split => (rem - k * t * t) / t.abs().powf(q),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_increment_has_zero_gap() {
        for &(n, p) in &[(3usize, 1.2f64), (4, 1.3), (3, 2.0), (5, 3.0)] {
            let dim = Dimension::new(n, p).unwrap();
            assert_eq!(upper_expansion_gap(1.7, 0.0, &dim, 0.1, 1.0), 0.0);
        }
    }

    #[test]
    fn gap_is_homogeneous() {
        let dim = Dimension::new(3, 1.2).unwrap();
        let q = dim.p_star();
        for &(a, b) in &[(2.0, 0.3), (-1.5, 4.0), (0.2, -7.0)] {
            let g = upper_expansion_gap(a, b, &dim, 0.2, 0.8);
            let g1 = upper_expansion_gap(1.0, b / a, &dim, 0.2, 0.8);
            assert!((g - a.abs().powf(q) * g1).abs() < 1e-12 * g.abs().max(1.0));
        }
    }

    #[test]
    fn branch_follows_critical_exponent() {
        assert_eq!(UpperBranch::for_dimension(&Dimension::new(3, 1.2).unwrap()), UpperBranch::Orlicz);
        assert_eq!(UpperBranch::for_dimension(&Dimension::new(3, 2.0).unwrap()), UpperBranch::Split);
    }

    #[test]
    fn required_constant_makes_gap_vanish() {
        for &(q, branch) in &[(1.8, UpperBranch::Orlicz), (3.0, UpperBranch::Split)] {
            for &t in &[-3.0, -0.7, 0.9, 12.0] {
                let c = required_c1(t, q, 0.1, branch);
                if c.is_finite() {
                    assert!(reduced_gap(t, q, 0.1, c, branch).abs() < 1e-10 * t.abs().powf(q).max(1.0));
                }
            }
        }
    }

    #[test]
    fn remainder_matches_direct_form() {
        for &t in &[-2.5, -1.0, -0.3, 1e-3, 0.6, 40.0] {
            let direct = (1.0f64 + t).abs().powf(2.4) - 1.0 - 2.4 * t;
            assert!((unit_remainder(t, 2.4) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }
}
