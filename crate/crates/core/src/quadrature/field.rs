//! Axisymmetric fields on R^n: the trait every integral consumes and the
//! analytic field kinds.

use std::fmt;
use std::sync::Arc;

use crate::bubble::{Bubble, Dimension};
use crate::special::zonal;

use super::grid::GridSpec;

/// Value and gradient `(d/dz, d/drho)` of a field at one point, where `z` is
/// the symmetry axis and `rho` the distance to it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; 2],
}

impl Jet {
    pub fn new(value: f64, dz: f64, drho: f64) -> Self {
        Self { value, grad: [dz, drho] }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }

    pub fn grad_dot(&self, other: &Jet) -> f64 {
        self.grad[0] * other.grad[0] + self.grad[1] * other.grad[1]
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { value: c * self.value, grad: [c * self.grad[0], c * self.grad[1]] }
    }

    pub fn plus(self, other: Jet) -> Self {
        Self { value: self.value + other.value, grad: [self.grad[0] + other.grad[0], self.grad[1] + other.grad[1]] }
    }

    pub fn minus(self, other: Jet) -> Self {
        self.plus(other.scaled(-1.0))
    }
}

/// A point in the meridian half-plane, stored as an axial anchor plus a local
/// offset so that points far along the axis keep full local precision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub anchor: f64,
    pub dz: f64,
    pub rho: f64,
}

impl Point {
    /// Axial offset of the point from the axial position `c`.
    pub fn axial_from(&self, c: f64) -> f64 {
        (self.anchor - c) + self.dz
    }

    pub fn distance_from(&self, c: f64) -> f64 {
        self.axial_from(c).hypot(self.rho)
    }
}

/// A quadrature node: the point plus its polar coordinates relative to the
/// quadrature center and, on the base grid, its `(radial, angular)` index.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub point: Point,
    pub r: f64,
    pub mu: f64,
    pub cell: Option<(usize, usize)>,
}

/// A ball on the axis where a field differs from its base field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Patch {
    pub center: f64,
    pub radius: f64,
}

/// An axisymmetric scalar field with gradient.
///
/// Fields with a localized part far from the quadrature center expose it via
/// [`patches`](AxisymField::patches) and [`base`](AxisymField::base): the
/// field equals its base outside the patches.
pub trait AxisymField: Send + Sync + fmt::Debug {
    fn eval(&self, node: &Node) -> Jet;

    /// Natural center of the field on the axis.
    fn center(&self) -> f64 {
        0.0
    }

    fn describe(&self) -> String;

    fn patches(&self) -> Vec<Patch> {
        Vec::new()
    }

    fn base(&self) -> Option<FieldRef> {
        None
    }

    /// Grid and center for fields that only exist at grid nodes.
    fn sampled_on(&self) -> Option<(&GridSpec, f64)> {
        None
    }
}

pub type FieldRef = Arc<dyn AxisymField>;

/// The base of a field, or the field itself when it has no patches.
pub fn base_or_self(f: &FieldRef) -> FieldRef {
    f.base().unwrap_or_else(|| f.clone())
}

/// The zero field.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl AxisymField for Zero {
    fn eval(&self, _node: &Node) -> Jet {
        Jet::default()
    }

    fn describe(&self) -> String {
        "zero".into()
    }
}

/// Linear combination `sum c_i f_i`.
#[derive(Clone, Debug)]
pub struct Combination {
    terms: Vec<(f64, FieldRef)>,
}

impl Combination {
    pub fn new(terms: Vec<(f64, FieldRef)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(f64, FieldRef)] {
        &self.terms
    }

    pub fn into_ref(self) -> FieldRef {
        Arc::new(self)
    }
}

/// `a*f + b*g` as a shared field.
pub fn combine(a: f64, f: &FieldRef, b: f64, g: &FieldRef) -> FieldRef {
    Combination::new(vec![(a, f.clone()), (b, g.clone())]).into_ref()
}

/// `c*f` as a shared field.
pub fn scale(c: f64, f: &FieldRef) -> FieldRef {
    Combination::new(vec![(c, f.clone())]).into_ref()
}

impl AxisymField for Combination {
    fn eval(&self, node: &Node) -> Jet {
        let mut acc = Jet::default();
        for (c, f) in &self.terms {
            acc = acc.plus(f.eval(node).scaled(*c));
        }
        acc
    }

    fn center(&self) -> f64 {
        self.terms.first().map(|t| t.1.center()).unwrap_or(0.0)
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.terms.iter().map(|(c, f)| format!("{c}*[{}]", f.describe())).collect();
        parts.join(" + ")
    }

    fn patches(&self) -> Vec<Patch> {
        let mut out: Vec<Patch> = Vec::new();
        for (_, f) in &self.terms {
            for p in f.patches() {
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out
    }

    fn base(&self) -> Option<FieldRef> {
        if self.patches().is_empty() {
            return None;
        }
        Some(Combination::new(self.terms.iter().map(|(c, f)| (*c, base_or_self(f))).collect()).into_ref())
    }

    fn sampled_on(&self) -> Option<(&GridSpec, f64)> {
        self.terms.iter().find_map(|(_, f)| f.sampled_on())
    }
}

/// A bubble as a field.
#[derive(Clone, Copy, Debug)]
pub struct BubbleField {
    pub bubble: Bubble,
    pub dim: Dimension,
}

impl BubbleField {
    pub fn new(bubble: Bubble, dim: Dimension) -> Self {
        Self { bubble, dim }
    }

    pub fn shared(bubble: Bubble, dim: Dimension) -> FieldRef {
        Arc::new(Self::new(bubble, dim))
    }
}

impl AxisymField for BubbleField {
    fn eval(&self, node: &Node) -> Jet {
        let dz = node.point.axial_from(self.bubble.x0);
        let rho = node.point.rho;
        let d = dz.hypot(rho);
        if d == 0.0 {
            return Jet::new(self.bubble.a, 0.0, 0.0);
        }
        let j = self.bubble.radial(&self.dim, d);
        Jet::new(j.value, j.slope_over_d * dz, j.slope_over_d * rho)
    }

    fn center(&self) -> f64 {
        self.bubble.x0
    }

    fn describe(&self) -> String {
        format!("bubble(a={}, b={}, x0={})", self.bubble.a, self.bubble.b, self.bubble.x0)
    }
}

/// The zonal tangent directions of the bubble manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentDirection {
    /// `v` itself (amplitude direction).
    Amplitude,
    /// `dv/db`.
    Concentration,
    /// `dv/dx0`, derivative in the axial center.
    Axial,
}

impl TangentDirection {
    pub const ALL: [TangentDirection; 3] = [Self::Amplitude, Self::Concentration, Self::Axial];
}

/// A tangent vector of the bubble manifold as a field.
#[derive(Clone, Copy, Debug)]
pub struct TangentField {
    pub bubble: Bubble,
    pub dim: Dimension,
    pub direction: TangentDirection,
}

impl TangentField {
    pub fn shared(bubble: Bubble, dim: Dimension, direction: TangentDirection) -> FieldRef {
        Arc::new(Self { bubble, dim, direction })
    }
}

impl AxisymField for TangentField {
    fn eval(&self, node: &Node) -> Jet {
        let b = &self.bubble;
        let dz = node.point.axial_from(b.x0);
        let rho = node.point.rho;
        let d = dz.hypot(rho);
        match self.direction {
            TangentDirection::Amplitude => BubbleField::new(*b, self.dim).eval(node),
            TangentDirection::Concentration => {
                if d == 0.0 {
                    return Jet::default();
                }
                let s = b.d_concentration_slope(&self.dim, d) / d;
                Jet::new(b.d_concentration(&self.dim, d), s * dz, s * rho)
            }
            TangentDirection::Axial => {
                if d == 0.0 {
                    return Jet::default();
                }
                let g = b.radial(&self.dim, d).slope_over_d;
                let curv = b.radial_curvature(&self.dim, d);
                let c = (curv - g) / (d * d);
                Jet::new(-g * dz, -(c * dz * dz + g), -c * rho * dz)
            }
        }
    }

    fn center(&self) -> f64 {
        self.bubble.x0
    }

    fn describe(&self) -> String {
        format!("tangent {:?} of bubble(a={}, b={}, x0={})", self.direction, self.bubble.a, self.bubble.b, self.bubble.x0)
    }
}

/// Radial profiles for zonal perturbations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadialShape {
    /// `exp(-1/(1-t^2))` with `t = (2r - inner - outer)/(outer - inner)`,
    /// supported in the annulus `inner < r < outer`.
    Annulus { inner: f64, outer: f64 },
    /// `exp(-1/(1-(r/radius)^2))`, supported in the ball of that radius.
    Ball { radius: f64 },
    /// Equal to 1 for `r <= inner`, 0 for `r >= outer`, smooth in between.
    Plateau { inner: f64, outer: f64 },
    /// `exp(-(r/width)^2)`.
    Gaussian { width: f64 },
    /// `(1 + r^exponent)^(-power)`.
    Algebraic { exponent: f64, power: f64 },
}

fn bump(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - t * t;
    let f = (-1.0 / s).exp();
    (f, f * (-2.0 * t / (s * s)))
}

fn smooth_step_factor(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

impl RadialShape {
    /// Profile value and radial derivative.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        match *self {
            RadialShape::Annulus { inner, outer } => {
                let half = 0.5 * (outer - inner);
                let (f, df) = bump((r - 0.5 * (inner + outer)) / half);
                (f, df / half)
            }
            RadialShape::Ball { radius } => {
                let (f, df) = bump(r / radius);
                (f, df / radius)
            }
            RadialShape::Plateau { inner, outer } => {
                let w = outer - inner;
                let x = (outer - r) / w;
                if x >= 1.0 {
                    return (1.0, 0.0);
                }
                if x <= 0.0 {
                    return (0.0, 0.0);
                }
                let a = smooth_step_factor(x);
                let b = smooth_step_factor(1.0 - x);
                let da = a / (x * x);
                let db = -b / ((1.0 - x) * (1.0 - x));
                let f = a / (a + b);
                let dfdx = (da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
                (f, -dfdx / w)
            }
            RadialShape::Gaussian { width } => {
                let f = (-(r / width).powi(2)).exp();
                (f, -2.0 * r / (width * width) * f)
            }
            RadialShape::Algebraic { exponent, power } => {
                if r == 0.0 {
                    return (1.0, 0.0);
                }
                let re = r.powf(exponent);
                let f = (1.0 + re).powf(-power);
                (f, -power * exponent * re / r * f / (1.0 + re))
            }
        }
    }

    /// Inner and outer radius of the support (outer may be infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            RadialShape::Annulus { inner, outer } => (inner, outer),
            RadialShape::Ball { radius } => (0.0, radius),
            RadialShape::Plateau { outer, .. } => (0.0, outer),
            _ => (0.0, f64::INFINITY),
        }
    }
}

/// `amplitude * f(r) r^origin_power Y_ell(mu)` about an axial center, with
/// `Y_ell` the zonal harmonic of degree `ell` normalized to 1 at the pole.
#[derive(Clone, Copy, Debug)]
pub struct ZonalProfile {
    pub n: usize,
    pub center: f64,
    pub ell: usize,
    pub shape: RadialShape,
    pub origin_power: i32,
    pub amplitude: f64,
}

impl ZonalProfile {
    pub fn new(n: usize, ell: usize, shape: RadialShape) -> Self {
        Self { n, center: 0.0, ell, shape, origin_power: 0, amplitude: 1.0 }
    }

    pub fn with_origin_power(mut self, power: i32) -> Self {
        self.origin_power = power;
        self
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn shared(self) -> FieldRef {
        Arc::new(self)
    }
}

impl AxisymField for ZonalProfile {
    fn eval(&self, node: &Node) -> Jet {
        let dz = node.point.axial_from(self.center);
        let rho = node.point.rho;
        let r = dz.hypot(rho);
        let (f, df) = self.shape.eval(r);
        let m = self.origin_power;
        let (big_f, big_df) = if m == 0 {
            (f, df)
        } else {
            let rm = r.powi(m);
            (f * rm, df * rm + m as f64 * f * r.powi(m - 1))
        };
        if r == 0.0 {
            let y = if self.ell == 0 { 1.0 } else { 0.0 };
            return Jet::new(self.amplitude * big_f * y, 0.0, 0.0);
        }
        let mu = dz / r;
        let s = rho / r;
        let (y, dy) = zonal(self.ell, self.n, mu);
        let a = self.amplitude;
        let radial = big_df * y;
        let tang = big_f / r * dy;
        Jet::new(a * big_f * y, a * (radial * mu + tang * s * s), a * (radial * s - tang * s * mu))
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn patches(&self) -> Vec<Patch> {
        let (_, outer) = self.shape.support();
        if outer.is_finite() {
            vec![Patch { center: self.center, radius: outer }]
        } else {
            Vec::new()
        }
    }

    fn base(&self) -> Option<FieldRef> {
        if self.patches().is_empty() {
            None
        } else {
            Some(Arc::new(Zero))
        }
    }

    fn describe(&self) -> String {
        format!("zonal(ell={}, shape={:?}, r^{}, amp={}, center={})", self.ell, self.shape, self.origin_power, self.amplitude, self.center)
    }
}

/// A smooth bump `amplitude * exp(-1/(1-(d/radius)^2))` centered far out on
/// the axis. Its base field is zero.
#[derive(Clone, Copy, Debug)]
pub struct FarBump {
    pub center: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl FarBump {
    pub fn shared(center: f64, radius: f64, amplitude: f64) -> FieldRef {
        Arc::new(Self { center, radius, amplitude })
    }
}

impl AxisymField for FarBump {
    fn eval(&self, node: &Node) -> Jet {
        let dz = node.point.axial_from(self.center);
        let rho = node.point.rho;
        let d = dz.hypot(rho);
        let (f, df) = bump(d / self.radius);
        if d == 0.0 {
            return Jet::new(self.amplitude * f, 0.0, 0.0);
        }
        let s = self.amplitude * df / (self.radius * d);
        Jet::new(self.amplitude * f, s * dz, s * rho)
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn describe(&self) -> String {
        format!("far bump(center={}, radius={}, amp={})", self.center, self.radius, self.amplitude)
    }

    fn patches(&self) -> Vec<Patch> {
        vec![Patch { center: self.center, radius: self.radius }]
    }

    fn base(&self) -> Option<FieldRef> {
        Some(Arc::new(Zero))
    }
}

/// `v(A x)` with `A = diag(1, ..., 1, stretch)`: a bubble stretched along the axis.
#[derive(Clone, Copy, Debug)]
pub struct StretchedBubble {
    pub bubble: Bubble,
    pub dim: Dimension,
    pub stretch: f64,
}

impl StretchedBubble {
    pub fn shared(bubble: Bubble, dim: Dimension, stretch: f64) -> FieldRef {
        Arc::new(Self { bubble, dim, stretch })
    }
}

impl AxisymField for StretchedBubble {
    fn eval(&self, node: &Node) -> Jet {
        let z = self.stretch * node.point.axial_from(0.0);
        let inner = Node { point: Point { anchor: 0.0, dz: z, rho: node.point.rho }, ..*node };
        let j = BubbleField::new(self.bubble, self.dim).eval(&inner);
        Jet::new(j.value, self.stretch * j.grad[0], j.grad[1])
    }

    fn center(&self) -> f64 {
        self.bubble.x0 / self.stretch
    }

    fn describe(&self) -> String {
        format!("stretched bubble(stretch={}, a={}, b={}, x0={})", self.stretch, self.bubble.a, self.bubble.b, self.bubble.x0)
    }
}
