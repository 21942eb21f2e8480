//! Talenti bubbles, their gradients and tangent spaces.

use serde::{Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::quadrature::RadialGrid;
use crate::special::sphere_area;

/// Spatial dimension `n` and Sobolev exponent `p`, with `1 < p < n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dimension {
    n: usize,
    p: f64,
}

/// Which form of the sharp expansion applies to a given `(n, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `p <= 2n/(n+2)`, equivalently the critical exponent is at most 2.
    Subquadratic,
    /// `2n/(n+2) < p < 2`.
    Intermediate,
    /// `p >= 2`.
    Superquadratic,
}

impl Dimension {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < 2 {
            return invalid(format!("dimension n must be at least 2, got {n}"));
        }
        if !(p.is_finite() && p > 1.0 && p < n as f64) {
            return invalid(format!("exponent p must satisfy 1 < p < n = {n}, got {p}"));
        }
        Ok(Self { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Critical exponent `np/(n-p)`.
    pub fn p_star(&self) -> f64 {
        self.nf() * self.p / (self.nf() - self.p)
    }

    /// Radial exponent `p/(p-1)` of the bubble profile.
    pub fn radial_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Decay exponent `(n-p)/p` of the bubble profile.
    pub fn decay_exponent(&self) -> f64 {
        (self.nf() - self.p) / self.p
    }

    /// Far-field decay rate of `v`: `v ~ r^{-(n-p)/(p-1)}`.
    pub fn far_decay(&self) -> f64 {
        (self.nf() - self.p) / (self.p - 1.0)
    }

    pub fn regime(&self) -> Regime {
        let n = self.nf();
        if self.p <= 2.0 * n / (n + 2.0) {
            Regime::Subquadratic
        } else if self.p < 2.0 {
            Regime::Intermediate
        } else {
            Regime::Superquadratic
        }
    }
}

impl Serialize for Dimension {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n: usize,
            p: f64,
            p_star: f64,
        }
        Repr { n: self.n, p: self.p, p_star: self.p_star() }.serialize(s)
    }
}

/// A bubble `a (1 + b |x - x0|^{p/(p-1)})^{-(n-p)/p}` centered on the axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bubble {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
}

/// Value and derivatives of a radial profile at one distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialJet {
    pub value: f64,
    /// `dv/dd` at distance `d` from the center.
    pub slope: f64,
    /// `slope / d`, finite at `d = 0` only when the profile is C^2 there.
    pub slope_over_d: f64,
}

impl Bubble {
    pub fn new(a: f64, b: f64, x0: f64) -> Result<Self> {
        if !(a.is_finite() && a != 0.0) {
            return invalid(format!("bubble amplitude must be finite and nonzero, got {a}"));
        }
        if !(b.is_finite() && b > 0.0) {
            return invalid(format!("bubble concentration must be positive, got {b}"));
        }
        if !x0.is_finite() {
            return invalid("bubble center must be finite");
        }
        Ok(Self { a, b, x0 })
    }

    /// The reference bubble `a = b = 1`, centered at the origin.
    pub fn unit() -> Self {
        Self { a: 1.0, b: 1.0, x0: 0.0 }
    }

    /// Value, radial slope and slope/d at distance `d >= 0` from the center.
    pub fn radial(&self, dim: &Dimension, d: f64) -> RadialJet {
        let q = dim.radial_exponent();
        let k = dim.decay_exponent();
        if d == 0.0 {
            return RadialJet {
                value: self.a,
                slope: 0.0,
                slope_over_d: if q < 2.0 {
                    f64::NEG_INFINITY * self.a.signum()
                } else if q == 2.0 {
                    -self.a * k * self.b * 2.0
                } else {
                    0.0
                },
            };
        }
        let dq = d.powf(q);
        let t = 1.0 + self.b * dq;
        let lt = t.ln();
        let value = self.a * (-k * lt).exp();
        let slope_over_d = -self.a * k * self.b * q * dq / (d * d) * (-(k + 1.0) * lt).exp();
        RadialJet { value, slope: slope_over_d * d, slope_over_d }
    }

    pub fn value_at_distance(&self, dim: &Dimension, d: f64) -> f64 {
        self.radial(dim, d).value
    }

    /// `dv/db` at distance `d`.
    pub fn d_concentration(&self, dim: &Dimension, d: f64) -> f64 {
        let q = dim.radial_exponent();
        let k = dim.decay_exponent();
        if d == 0.0 {
            return 0.0;
        }
        let dq = d.powf(q);
        let t = 1.0 + self.b * dq;
        -self.a * k * dq * (-(k + 1.0) * t.ln()).exp()
    }

    /// Radial derivative of `dv/db` at distance `d`.
    pub fn d_concentration_slope(&self, dim: &Dimension, d: f64) -> f64 {
        let q = dim.radial_exponent();
        let k = dim.decay_exponent();
        if d == 0.0 {
            return 0.0;
        }
        let dq = d.powf(q);
        let t = 1.0 + self.b * dq;
        -self.a * k * q * dq / d * (-(k + 2.0) * t.ln()).exp() * (1.0 - k * self.b * dq)
    }

    /// Second radial derivative of the profile at distance `d > 0`.
    pub fn radial_curvature(&self, dim: &Dimension, d: f64) -> f64 {
        let q = dim.radial_exponent();
        let k = dim.decay_exponent();
        let dq = d.powf(q);
        let t = 1.0 + self.b * dq;
        // v' = -a k b q d^{q-1} t^{-k-1}
        let c = -self.a * k * self.b * q;
        c * d.powf(q - 2.0) * (-(k + 2.0) * t.ln()).exp() * ((q - 1.0) * t - (k + 1.0) * self.b * q * dq)
    }

    /// Rescale the amplitude so that the critical Lebesgue norm equals `target`,
    /// given the norm of the current bubble.
    pub fn with_norm(&self, current_norm: f64, target: f64) -> Self {
        Self { a: self.a * target / current_norm, ..*self }
    }

    /// Distance vector from the center to an n-dimensional point, whose last
    /// coordinate is the symmetry axis.
    fn offset(&self, x: &[f64]) -> Vec<f64> {
        let mut d = x.to_vec();
        if let Some(last) = d.last_mut() {
            *last -= self.x0;
        }
        d
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn check_point(dim: &Dimension, x: &[f64]) {
    assert_eq!(x.len(), dim.n(), "point has wrong dimension");
}

/// Value of the bubble at an n-dimensional point.
pub fn eval_bubble(bub: &Bubble, dim: &Dimension, x: &[f64]) -> f64 {
    check_point(dim, x);
    bub.value_at_distance(dim, norm(&bub.offset(x)))
}

/// Gradient of the bubble at an n-dimensional point.
pub fn eval_bubble_gradient(bub: &Bubble, dim: &Dimension, x: &[f64]) -> Vec<f64> {
    check_point(dim, x);
    let off = bub.offset(x);
    let d = norm(&off);
    if d == 0.0 {
        return vec![0.0; dim.n()];
    }
    let s = bub.radial(dim, d).slope_over_d;
    off.iter().map(|c| s * c).collect()
}

/// The tangent vectors `v, dv/db, dv/dx_1, ..., dv/dx_n` at a point.
///
/// The first entry is the value itself, which is the derivative in `a` scaled by `a`.
pub fn tangent_basis_eval(bub: &Bubble, dim: &Dimension, x: &[f64]) -> Vec<f64> {
    check_point(dim, x);
    let off = bub.offset(x);
    let d = norm(&off);
    let mut out = Vec::with_capacity(dim.n() + 2);
    out.push(bub.value_at_distance(dim, d));
    out.push(bub.d_concentration(dim, d));
    out.extend(eval_bubble_gradient(bub, dim, x).into_iter().map(|g| -g));
    out
}

/// Gradient `L^p` norm and critical Lebesgue norm of a bubble by radial quadrature.
pub fn bubble_norms(bub: &Bubble, dim: &Dimension, grid: &RadialGrid) -> Result<(f64, f64)> {
    let p = dim.p();
    let ps = dim.p_star();
    let area = sphere_area(dim.n() - 1);
    let grad = grid.integrate(|d| bub.radial(dim, d).slope.abs().powf(p)).checked()?;
    let func = grid.integrate(|d| bub.value_at_distance(dim, d).abs().powf(ps)).checked()?;
    Ok(((area * grad).powf(1.0 / p), (area * func).powf(1.0 / ps)))
}

/// Optimal Sobolev constant, computed as the norm ratio of the reference bubble.
pub fn sobolev_constant(dim: &Dimension, grid: &RadialGrid) -> Result<f64> {
    let (g, f) = bubble_norms(&Bubble::unit(), dim, grid)?;
    Ok(g / f)
}

/// Closed form of the optimal Sobolev constant.
pub fn sobolev_constant_closed_form(dim: &Dimension) -> f64 {
    use crate::special::gamma;
    let n = dim.nf();
    let p = dim.p();
    let ratio = gamma(1.0 + n / 2.0) * gamma(n) / (gamma(n / p) * gamma(1.0 + n - n / p));
    std::f64::consts::PI.sqrt() * n.powf(1.0 / p) * ((n - p) / (p - 1.0)).powf(1.0 - 1.0 / p) * ratio.powf(-1.0 / n)
}

/// The bubble rescaled in amplitude to unit critical norm.
pub fn unit_normalized(bub: &Bubble, dim: &Dimension, grid: &RadialGrid) -> Result<Bubble> {
    let (_, f) = bubble_norms(bub, dim, grid)?;
    Ok(bub.with_norm(f, 1.0))
}
