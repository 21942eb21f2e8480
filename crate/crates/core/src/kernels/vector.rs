//! Weighted second-order expansion of `|x+y|^p` for vectors.

use serde::Serialize;

use crate::special::pow1p_remainder;

/// Which piecewise definition of the weight applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WeightBranch {
    PLess2,
    PGe2,
}

impl WeightBranch {
    pub fn for_exponent(p: f64) -> Self {
        if p < 2.0 {
            Self::PLess2
        } else {
            Self::PGe2
        }
    }
}

/// The weight vector together with a flag marking degenerate-norm inputs,
/// where the returned value is the limiting one.
#[derive(Clone, Debug, PartialEq)]
pub struct Weight {
    pub w: Vec<f64>,
    pub degenerate: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The weight `w(x, x+y)`.
pub fn weight_w(x: &[f64], x_plus_y: &[f64], p: f64) -> Weight {
    let nx = norm(x);
    let nz = norm(x_plus_y);
    match WeightBranch::for_exponent(p) {
        WeightBranch::PLess2 => {
            if nx == 0.0 {
                return Weight { w: vec![0.0; x.len()], degenerate: true };
            }
            if nz <= nx {
                Weight { w: x.to_vec(), degenerate: false }
            } else {
                let f = (nz / ((2.0 - p) * nz + (p - 1.0) * nx)).powf(1.0 / (p - 2.0));
                Weight { w: x.iter().map(|a| f * a).collect(), degenerate: false }
            }
        }
        WeightBranch::PGe2 => {
            if nx == 0.0 || nz == 0.0 {
                return Weight { w: vec![0.0; x.len()], degenerate: true };
            }
            if nx <= nz {
                Weight { w: x.to_vec(), degenerate: false }
            } else if p == 2.0 {
                Weight { w: x_plus_y.to_vec(), degenerate: false }
            } else {
                let f = (nz / nx).powf(1.0 / (p - 2.0));
                Weight { w: x_plus_y.iter().map(|a| f * a).collect(), degenerate: false }
            }
        }
    }
}

/// `|w|^{p-2} / |x|^{p-2}` as a function of `zeta = |x+y| / |x|`.
pub fn relative_weight(zeta: f64, p: f64) -> f64 {
    match WeightBranch::for_exponent(p) {
        WeightBranch::PLess2 => {
            if zeta > 1.0 {
                zeta / ((2.0 - p) * zeta + (p - 1.0))
            } else {
                1.0
            }
        }
        WeightBranch::PGe2 => {
            if zeta >= 1.0 {
                1.0
            } else {
                zeta.powf(p - 1.0)
            }
        }
    }
}

/// Rotation invariants of a pair `(x, y)` normalized by `|x|`:
/// `t = |y|^2/|x|^2` and `u = (2 x.y + |y|^2)/|x|^2`, so that
/// `|x+y|^2 = |x|^2 (1 + u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairInvariants {
    pub t: f64,
    pub u: f64,
}

impl PairInvariants {
    pub fn from_norms(nx: f64, ny: f64, dot: f64) -> Self {
        let t = (ny / nx).powi(2);
        Self { t, u: (2.0 * dot / nx + ny * ny / nx) / nx }
    }

    /// Invariants for `x = e_1`, `y = rho (cos psi, sin psi)`.
    pub fn from_polar(rho: f64, psi: f64) -> Self {
        let t = rho * rho;
        Self { t, u: 2.0 * rho * psi.cos() + t }
    }

    /// `|x+y| / |x|`.
    pub fn zeta(&self) -> f64 {
        (1.0 + self.u).max(0.0).sqrt()
    }
}

/// Terms of the expansion at `|x| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionTerms {
    /// `|x+y|^p - |x|^p - p|x|^{p-2} x.y`.
    pub remainder: f64,
    /// `G(x, y)`.
    pub quad_form: f64,
    /// `min{|y|^p, |x|^{p-2}|y|^2}` for `p < 2`, `|y|^p` otherwise.
    pub normalizer: f64,
}

impl ExpansionTerms {
    pub fn at(inv: PairInvariants, p: f64) -> Self {
        let PairInvariants { t, u } = inv;
        let remainder = pow1p_remainder(u, p / 2.0) + 0.5 * p * t;
        let zeta = inv.zeta();
        let gap = u / (1.0 + zeta);
        let quad_form = p * t + p * (p - 2.0) * relative_weight(zeta, p) * gap * gap;
        let tp = t.powf(p / 2.0);
        let normalizer = if p < 2.0 { tp.min(t) } else { tp };
        Self { remainder, quad_form, normalizer }
    }

    /// `remainder - (1-kappa)/2 G - c0 normalizer`.
    pub fn gap(&self, kappa: f64, c0: f64) -> f64 {
        self.remainder - 0.5 * (1.0 - kappa) * self.quad_form - c0 * self.normalizer
    }

    /// The largest `c0` for which the gap is nonnegative at this pair.
    pub fn admissible_c0(&self, kappa: f64) -> f64 {
        (self.remainder - 0.5 * (1.0 - kappa) * self.quad_form) / self.normalizer
    }
}

/// `G(x, y) = p|x|^{p-2}|y|^2 + p(p-2)|w|^{p-2}(|x| - |x+y|)^2`.
pub fn quad_form_g(x: &[f64], y: &[f64], p: f64) -> f64 {
    let nx = norm(x);
    if nx == 0.0 {
        return 0.0;
    }
    let inv = PairInvariants::from_norms(nx, norm(y), dot(x, y));
    nx.powf(p) * ExpansionTerms::at(inv, p).quad_form
}

/// One evaluation of the vector inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityGapSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub p: f64,
    pub kappa: f64,
    pub c0: f64,
    /// Left side minus right side.
    pub gap: f64,
    pub normalizer: f64,
    /// Set when `|x| = 0`, where the limiting value is reported.
    pub degenerate: bool,
}

/// `|x+y|^p - [|x|^p + p|x|^{p-2}x.y + (1-kappa)/2 G + c0 normalizer]`.
pub fn lower_bound_gap(x: &[f64], y: &[f64], p: f64, kappa: f64, c0: f64) -> InequalityGapSample {
    let nx = norm(x);
    let ny = norm(y);
    let (gap, normalizer, degenerate) = if nx == 0.0 {
        let yp = ny.powf(p);
        let quad = if p == 2.0 { 2.0 * ny * ny } else { 0.0 };
        (yp - 0.5 * (1.0 - kappa) * quad - c0 * yp, yp, true)
    } else {
        let terms = ExpansionTerms::at(PairInvariants::from_norms(nx, ny, dot(x, y)), p);
        let scale = nx.powf(p);
        (scale * terms.gap(kappa, c0), scale * terms.normalizer, false)
    };
    InequalityGapSample { x: x.to_vec(), y: y.to_vec(), p, kappa, c0, gap, normalizer, degenerate }
}
