//! Log-radial and Gauss–Gegenbauer angular grids.

use serde::Serialize;

use crate::bubble::Dimension;
use crate::error::{invalid, LabError, Result};
use crate::linalg::SymTridiag;
use crate::reduce::pairwise_sum;
use crate::special::{beta, sphere_area};

/// Parameters of the tensor grid in `(s = ln r, mu = cos theta)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub s_min: f64,
    pub s_max: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

impl GridSpec {
    pub fn new(s_min: f64, s_max: f64, radial_nodes: usize, angular_nodes: usize) -> Result<Self> {
        let spec = Self { s_min, s_max, radial_nodes, angular_nodes };
        spec.validate()?;
        Ok(spec)
    }

    /// Default grid: `s` from -14 up to a cutoff where the slowest
    /// bubble-weighted tail has decayed by `e^{-25}`.
    pub fn default_for(dim: &Dimension) -> Self {
        Self::sized_for(dim, 2048, 64)
    }

    pub fn sized_for(dim: &Dimension, radial_nodes: usize, angular_nodes: usize) -> Self {
        Self { s_min: -14.0, s_max: default_s_max(dim), radial_nodes, angular_nodes }
    }

    /// The same range with twice as many nodes in each direction.
    pub fn doubled(&self) -> Self {
        Self { radial_nodes: 2 * self.radial_nodes, angular_nodes: 2 * self.angular_nodes, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s_min.is_finite() && self.s_max.is_finite() && self.s_min < self.s_max) {
            return invalid(format!("grid range [{}, {}] is empty", self.s_min, self.s_max));
        }
        if self.radial_nodes < 16 {
            return invalid(format!("need at least 16 radial nodes, got {}", self.radial_nodes));
        }
        if self.angular_nodes < 2 {
            return invalid(format!("need at least 2 angular nodes, got {}", self.angular_nodes));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.s_max - self.s_min) / (self.radial_nodes - 1) as f64
    }
}

/// Upper log-radius cutoff for a given dimension.
pub fn default_s_max(dim: &Dimension) -> f64 {
    let slowest = (dim.nf() - dim.p()) / (dim.p() - 1.0);
    (25.0 / slowest.min(dim.nf())).max(14.0).ceil()
}

/// Integral value with its truncation estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Integral {
    pub value: f64,
    pub tail: f64,
}

impl Integral {
    /// Fails when the tail exceeds `1e-8 |value|`.
    pub fn checked(self) -> Result<f64> {
        self.checked_with(1e-8)
    }

    pub fn checked_with(self, rel: f64) -> Result<f64> {
        if !self.value.is_finite() {
            return Err(LabError::TailTooLarge { tail: f64::INFINITY, value: self.value });
        }
        if self.tail > rel * self.value.abs() {
            return Err(LabError::TailTooLarge { tail: self.tail, value: self.value });
        }
        Ok(self.value)
    }
}

/// Trapezoid nodes in `s = ln r`, weights `h r^n` (ends halved), so that
/// `sum w_k f(r_k)` approximates `int_0^inf f(r) r^{n-1} dr`.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    n: usize,
    s: Vec<f64>,
    r: Vec<f64>,
    w: Vec<f64>,
    step: f64,
}

impl RadialGrid {
    pub fn new(n: usize, s_min: f64, s_max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(s_min < s_max) {
            return invalid("radial grid needs at least two nodes on a nonempty range");
        }
        let h = (s_max - s_min) / (count - 1) as f64;
        let nf = n as f64;
        let s: Vec<f64> = (0..count).map(|k| s_min + h * k as f64).collect();
        let r: Vec<f64> = s.iter().map(|s| s.exp()).collect();
        let w = s
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let end = if k == 0 || k + 1 == count { 0.5 } else { 1.0 };
                end * h * (nf * s).exp()
            })
            .collect();
        Ok(Self { n, s, r, w, step: h })
    }

    pub fn from_spec(n: usize, spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        Self::new(n, spec.s_min, spec.s_max, spec.radial_nodes)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn log_nodes(&self) -> &[f64] {
        &self.s
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `int_0^inf f(r) r^{n-1} dr` from samples of `f` at the nodes.
    pub fn integrate_samples(&self, f: &[f64]) -> Integral {
        assert_eq!(f.len(), self.len());
        let terms: Vec<f64> = self.w.iter().zip(f).map(|(w, f)| w * f).collect();
        let value = pairwise_sum(&terms);
        let density: Vec<f64> = f.iter().zip(&self.s).map(|(f, s)| f * (self.n as f64 * s).exp()).collect();
        Integral { value, tail: tail_estimate(&self.s, &density) }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Integral {
        let samples: Vec<f64> = self.r.iter().map(|&r| f(r)).collect();
        self.integrate_samples(&samples)
    }
}

/// Estimated mass outside `[s_0, s_last]` of an integrand with density `g(s)`
/// in `s`, from exponential fits on the first and last 10% of the nodes.
pub fn tail_estimate(s: &[f64], g: &[f64]) -> f64 {
    let m = (s.len() / 10).max(4).min(s.len());
    let right = end_fit(&s[s.len() - m..], &g[g.len() - m..]);
    let left = end_fit(&s[..m], &g[..m]);
    let s_last = s[s.len() - 1];
    let s_first = s[0];
    let mut tail = 0.0;
    if let Some((alpha, slope)) = right {
        tail += if slope < -1e-3 { (alpha + slope * s_last).exp() / (-slope) } else { f64::INFINITY };
    }
    if let Some((alpha, slope)) = left {
        tail += if slope > 1e-3 { (alpha + slope * s_first).exp() / slope } else { f64::INFINITY };
    }
    tail
}

fn end_fit(s: &[f64], g: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = s.iter().zip(g).filter(|(_, g)| g.abs() > 0.0 && g.is_finite()).map(|(s, g)| (*s, g.abs().ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let k = pts.len() as f64;
    let sx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let sy = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx = pts.iter().map(|p| (p.0 - sx) * (p.0 - sx)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum::<f64>();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    // Anchor the fit at the largest magnitude so oscillation cannot hide mass.
    let alpha = pts.iter().map(|p| p.1 - slope * p.0).fold(f64::NEG_INFINITY, f64::max);
    Some((alpha, slope))
}

/// Gauss nodes in `mu` for the weight `(1 - mu^2)^{(n-3)/2}`, the polar-angle
/// measure of `S^{n-1}`. Legendre when `n = 3`, Chebyshev when `n = 2`.
#[derive(Clone, Debug)]
pub struct AngularGrid {
    n: usize,
    mu: Vec<f64>,
    sin: Vec<f64>,
    w: Vec<f64>,
}

impl AngularGrid {
    pub fn new(n: usize, count: usize) -> Result<Self> {
        if n < 2 {
            return invalid("angular grid needs n >= 2");
        }
        if count < 1 {
            return invalid("angular grid needs at least one node");
        }
        let (mu, w) = if n == 2 { chebyshev(count) } else { gegenbauer(0.5 * (n as f64 - 3.0), count)? };
        let sin = mu.iter().map(|m: &f64| (1.0 - m * m).max(0.0).sqrt()).collect();
        Ok(Self { n, mu, sin, w })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.mu
    }

    pub fn sines(&self) -> &[f64] {
        &self.sin
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// Area of `S^{n-2}`, the factor turning the `mu` integral into a full
    /// spherical integral for zonal integrands.
    pub fn sphere_factor(&self) -> f64 {
        sphere_area(self.n - 2)
    }
}

fn chebyshev(count: usize) -> (Vec<f64>, Vec<f64>) {
    let m = count as f64;
    let mut mu: Vec<f64> = (0..count).map(|j| -((2.0 * j as f64 + 1.0) * std::f64::consts::PI / (2.0 * m)).cos()).collect();
    mu.iter_mut().for_each(|x| {
        if x.abs() < 1e-16 {
            *x = 0.0
        }
    });
    (mu, vec![std::f64::consts::PI / m; count])
}

/// Golub–Welsch style construction: nodes from Sturm bisection on the Jacobi
/// matrix, weights from the normalized polynomials.
fn gegenbauer(alpha: f64, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let beta_k = |k: f64| k * (k + 2.0 * alpha) / ((2.0 * k + 2.0 * alpha + 1.0) * (2.0 * k + 2.0 * alpha - 1.0));
    let off: Vec<f64> = (1..count).map(|k| beta_k(k as f64).sqrt()).collect();
    let jac = SymTridiag::new(vec![0.0; count], off.clone())?;
    let mu0 = beta(0.5, alpha + 1.0);
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    for j in 0..count {
        let mut x = jac.eigenvalue(j);
        // Newton polish on the degree-`count` orthonormal polynomial.
        for _ in 0..3 {
            let (p, dp) = orthonormal_with_derivative(&off, count, x);
            if dp != 0.0 {
                let step = p / dp;
                if step.abs() < 1e-10 {
                    x -= step;
                }
            }
        }
        let mut sum = 0.0;
        let mut prev = 0.0;
        let mut cur = 1.0;
        sum += cur * cur;
        for k in 1..count {
            let next = (x * cur - if k >= 2 { off[k - 2] * prev } else { 0.0 }) / off[k - 1];
            prev = cur;
            cur = next;
            sum += cur * cur;
        }
        nodes.push(x);
        weights.push(mu0 / sum);
    }
    // Enforce exact symmetry about mu = 0.
    for j in 0..count / 2 {
        let k = count - 1 - j;
        let x = 0.5 * (nodes[k] - nodes[j]);
        let w = 0.5 * (weights[k] + weights[j]);
        nodes[j] = -x;
        nodes[k] = x;
        weights[j] = w;
        weights[k] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    if weights.iter().any(|w| !(*w > 0.0)) {
        return Err(LabError::Invalid("angular weights not positive".into()));
    }
    Ok((nodes, weights))
}

/// Value and derivative of the degree-`count` orthonormal polynomial, up to a
/// positive factor.
fn orthonormal_with_derivative(off: &[f64], count: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0;
    let mut d_prev = 0.0;
    let mut d = 0.0;
    for k in 0..count {
        let b_prev = if k >= 1 { off[k - 1] } else { 0.0 };
        let b_next = if k < off.len() { off[k] } else { 1.0 };
        let pn = (x * p - b_prev * p_prev) / b_next;
        let dn = (p + x * d - b_prev * d_prev) / b_next;
        p_prev = p;
        p = pn;
        d_prev = d;
        d = dn;
    }
    (p, d)
}
