//! Tensor-grid integration of axisymmetric integrands over R^n.

use rayon::prelude::*;

use crate::bubble::Dimension;
use crate::error::{LabError, Result};
use crate::reduce::pairwise_sum;

use super::field::{base_or_self, FieldRef, Jet, Node, Patch, Point};
use super::grid::{AngularGrid, GridSpec, Integral, RadialGrid};

const PATCH_PANELS: usize = 32;
const PATCH_ORDER: usize = 16;
const PATCH_ANGULAR: usize = 32;

/// Integrator over R^n for integrands built from the jets of a few fields.
///
/// The base grid is the tensor product of a log-radial trapezoid rule and a
/// Gauss rule in `mu`, centered on the first field. Fields with localized
/// patches contribute the difference to their base field on a local
/// Gauss grid per patch.
#[derive(Clone, Debug)]
pub struct Quadrature {
    dim: Dimension,
    spec: GridSpec,
    radial: RadialGrid,
    angular: AngularGrid,
    patch_rho: Vec<(f64, f64)>,
    patch_angular: AngularGrid,
    patch_resolution: (usize, usize),
}

/// Per-radius contributions of an integral, used for origin diagnostics.
#[derive(Clone, Debug)]
pub struct RowIntegral {
    pub integral: Integral,
    /// Weighted contribution of each radial row, in grid order.
    pub rows: Vec<f64>,
}

impl Quadrature {
    pub fn new(dim: &Dimension, spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let radial = RadialGrid::from_spec(dim.n(), &spec)?;
        let angular = AngularGrid::new(dim.n(), spec.angular_nodes)?;
        let (patch_rho, patch_angular) = patch_grid(dim, PATCH_PANELS, PATCH_ANGULAR)?;
        Ok(Self { dim: *dim, spec, radial, angular, patch_rho, patch_angular, patch_resolution: (PATCH_PANELS, PATCH_ANGULAR) })
    }

    /// The same quadrature with `panels` radial Gauss panels and `angular`
    /// angular nodes on each patch.
    pub fn with_patch_resolution(mut self, panels: usize, angular: usize) -> Result<Self> {
        let (rho, ang) = patch_grid(&self.dim, panels, angular)?;
        self.patch_rho = rho;
        self.patch_angular = ang;
        self.patch_resolution = (panels, angular);
        Ok(self)
    }

    /// Radial panels and angular nodes on each patch.
    pub fn patch_resolution(&self) -> (usize, usize) {
        self.patch_resolution
    }

    pub fn default_for(dim: &Dimension) -> Result<Self> {
        Self::new(dim, GridSpec::default_for(dim))
    }

    pub fn dim(&self) -> &Dimension {
        &self.dim
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn radial(&self) -> &RadialGrid {
        &self.radial
    }

    pub fn angular(&self) -> &AngularGrid {
        &self.angular
    }

    /// Base-grid node `(k, j)` for a grid centered at `center`.
    pub fn node(&self, center: f64, k: usize, j: usize) -> Node {
        let r = self.radial.nodes()[k];
        let mu = self.angular.nodes()[j];
        let sin = self.angular.sines()[j];
        Node { point: Point { anchor: center, dz: r * mu, rho: r * sin }, r, mu, cell: Some((k, j)) }
    }

    fn center_for(&self, fields: &[&FieldRef]) -> Result<f64> {
        let mut center = fields.first().map(|f| f.center()).unwrap_or(0.0);
        let mut sampled: Option<f64> = None;
        for f in fields {
            if let Some((spec, c)) = f.sampled_on() {
                if spec != &self.spec {
                    return Err(LabError::GridMismatch(format!("field sampled on {spec:?}, quadrature uses {:?}", self.spec)));
                }
                if let Some(prev) = sampled {
                    if prev != c {
                        return Err(LabError::GridMismatch("sampled fields have different centers".into()));
                    }
                }
                sampled = Some(c);
            }
        }
        if let Some(c) = sampled {
            center = c;
        }
        Ok(center)
    }

    /// Integral of `f(node, jets)` over R^n, where `jets[i]` is the jet of
    /// `fields[i]` at the node. Returns value and truncation estimate.
    pub fn integrate<F>(&self, fields: &[&FieldRef], f: F) -> Result<Integral>
    where
        F: Fn(&Node, &[Jet]) -> f64 + Sync,
    {
        Ok(self.integrate_rows(fields, f)?.integral)
    }

    /// Integral that fails with `TailTooLarge` when the truncation estimate
    /// exceeds `1e-8` of the value.
    pub fn integrate_checked<F>(&self, fields: &[&FieldRef], f: F) -> Result<f64>
    where
        F: Fn(&Node, &[Jet]) -> f64 + Sync,
    {
        self.integrate(fields, f)?.checked()
    }

    /// Like [`integrate`](Self::integrate), also returning per-row contributions.
    pub fn integrate_rows<F>(&self, fields: &[&FieldRef], f: F) -> Result<RowIntegral>
    where
        F: Fn(&Node, &[Jet]) -> f64 + Sync,
    {
        let (mut integrals, mut rows) = self.run(fields, 1, |node, jets, out| out[0] = f(node, jets))?;
        Ok(RowIntegral { integral: integrals.remove(0), rows: rows.remove(0) })
    }

    /// Several integrals in one pass: `f(node, jets, out)` writes the
    /// `count` integrands at the node into `out`.
    pub fn integrate_many<F>(&self, fields: &[&FieldRef], count: usize, f: F) -> Result<Vec<Integral>>
    where
        F: Fn(&Node, &[Jet], &mut [f64]) + Sync,
    {
        Ok(self.run(fields, count, f)?.0)
    }

    fn run<F>(&self, fields: &[&FieldRef], count: usize, f: F) -> Result<(Vec<Integral>, Vec<Vec<f64>>)>
    where
        F: Fn(&Node, &[Jet], &mut [f64]) + Sync,
    {
        let center = self.center_for(fields)?;
        let bases: Vec<FieldRef> = fields.iter().map(|f| base_or_self(f)).collect();
        let sphere = self.angular.sphere_factor();
        let m = self.angular.len();
        let per_row: Vec<Vec<f64>> = (0..self.radial.len())
            .into_par_iter()
            .map(|k| {
                let mut jets = vec![Jet::default(); bases.len()];
                let mut acc = vec![0.0; count];
                let mut out = vec![0.0; count];
                for j in 0..m {
                    let node = self.node(center, k, j);
                    for (slot, field) in jets.iter_mut().zip(&bases) {
                        *slot = field.eval(&node);
                    }
                    f(&node, &jets, &mut out);
                    let w = self.angular.weights()[j];
                    for (a, o) in acc.iter_mut().zip(&out) {
                        *a += w * o;
                    }
                }
                acc.iter().map(|a| a * sphere).collect()
            })
            .collect();

        let patches = merge_patches(fields.iter().flat_map(|f| f.patches()).collect());
        let corrections: Vec<Vec<f64>> = patches.iter().map(|patch| self.patch_difference(center, patch, fields, &bases, count, &f)).collect();

        let mut integrals = Vec::with_capacity(count);
        let mut all_rows = Vec::with_capacity(count);
        for i in 0..count {
            let weighted: Vec<f64> = per_row.iter().zip(self.radial.weights()).map(|(a, w)| a[i] * w).collect();
            let mut value = pairwise_sum(&weighted);
            let density: Vec<f64> = per_row.iter().zip(self.radial.log_nodes()).map(|(a, s)| a[i] * (self.dim.nf() * s).exp()).collect();
            let tail = super::grid::tail_estimate(self.radial.log_nodes(), &density);
            for c in &corrections {
                value += c[i];
            }
            integrals.push(Integral { value, tail });
            all_rows.push(weighted);
        }
        Ok((integrals, all_rows))
    }

    fn patch_difference<F>(&self, center: f64, patch: &Patch, fields: &[&FieldRef], bases: &[FieldRef], count: usize, f: &F) -> Vec<f64>
    where
        F: Fn(&Node, &[Jet], &mut [f64]) + Sync,
    {
        let nf = self.dim.nf();
        let sphere = self.patch_angular.sphere_factor();
        let rows: Vec<Vec<f64>> = self
            .patch_rho
            .par_iter()
            .map(|&(t, wt)| {
                let rad = t * patch.radius;
                let mut full = vec![Jet::default(); fields.len()];
                let mut base = vec![Jet::default(); fields.len()];
                let mut acc = vec![0.0; count];
                let mut out_full = vec![0.0; count];
                let mut out_base = vec![0.0; count];
                for j in 0..self.patch_angular.len() {
                    let mu = self.patch_angular.nodes()[j];
                    let sin = self.patch_angular.sines()[j];
                    let point = Point { anchor: patch.center, dz: rad * mu, rho: rad * sin };
                    let az = point.axial_from(center);
                    let r = az.hypot(point.rho);
                    let node = Node { point, r, mu: if r > 0.0 { az / r } else { 1.0 }, cell: None };
                    for i in 0..fields.len() {
                        full[i] = fields[i].eval(&node);
                        base[i] = bases[i].eval(&node);
                    }
                    f(&node, &full, &mut out_full);
                    f(&node, &base, &mut out_base);
                    let w = self.patch_angular.weights()[j];
                    for i in 0..count {
                        acc[i] += w * (out_full[i] - out_base[i]);
                    }
                }
                let scale = sphere * wt * patch.radius * rad.powf(nf - 1.0);
                acc.iter().map(|a| a * scale).collect()
            })
            .collect();
        (0..count).map(|i| pairwise_sum(&rows.iter().map(|r| r[i]).collect::<Vec<f64>>())).collect()
    }
}

fn patch_grid(dim: &Dimension, panels: usize, angular: usize) -> Result<(Vec<(f64, f64)>, AngularGrid)> {
    let gl = AngularGrid::new(3, PATCH_ORDER)?;
    let mut rho = Vec::with_capacity(panels * PATCH_ORDER);
    let width = 1.0 / panels as f64;
    for panel in 0..panels {
        let left = panel as f64 * width;
        for (x, w) in gl.nodes().iter().zip(gl.weights()) {
            rho.push((left + 0.5 * width * (x + 1.0), 0.5 * width * w));
        }
    }
    Ok((rho, AngularGrid::new(dim.n(), angular)?))
}

/// Replaces overlapping balls by the smallest axial ball containing both,
/// so that every point lies in at most one patch.
fn merge_patches(mut patches: Vec<Patch>) -> Vec<Patch> {
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..patches.len() {
            for j in i + 1..patches.len() {
                let (a, b) = (patches[i], patches[j]);
                if (a.center - b.center).abs() < a.radius + b.radius {
                    let lo = (a.center - a.radius).min(b.center - b.radius);
                    let hi = (a.center + a.radius).max(b.center + b.radius);
                    patches[i] = Patch { center: 0.5 * (lo + hi), radius: 0.5 * (hi - lo) };
                    patches.remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    patches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::Bubble;
    use crate::quadrature::field::{BubbleField, FarBump, RadialShape, Zero, ZonalProfile};
    use crate::special::beta;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn quad(n: usize, p: f64) -> Quadrature {
        let dim = Dimension::new(n, p).unwrap();
        Quadrature::default_for(&dim).unwrap()
    }

    #[test]
    fn integrals_are_stable_under_grid_doubling() {
        for &(n, p) in &[(3usize, 2.0f64), (3, 1.5), (4, 2.5), (5, 1.2)] {
            let dim = Dimension::new(n, p).unwrap();
            let ps = dim.p_star();
            let coarse = Quadrature::default_for(&dim).unwrap();
            let (panels, ang) = coarse.patch_resolution();
            let fine = Quadrature::new(&dim, coarse.spec().doubled()).unwrap().with_patch_resolution(2 * panels, 2 * ang).unwrap();
            let v = BubbleField::shared(Bubble::unit(), dim);
            let bump = ZonalProfile::new(n, 0, RadialShape::Annulus { inner: 0.8, outer: 2.5 }).shared();
            let smooth = ZonalProfile::new(n, 2, RadialShape::Gaussian { width: 1.0 }).with_origin_power(2).shared();
            let values = |q: &Quadrature| -> Vec<f64> {
                q.integrate_many(&[&v, &bump, &smooth], 4, |_, j, out| {
                    let nv = j[0].grad_norm();
                    let w = j[0].value.abs().powf(ps - 2.0);
                    out[0] = j[0].value.abs().powf(ps);
                    out[1] = nv.powf(p);
                    out[2] = nv.powf(p - 2.0) * (j[0].grad[0] * j[1].grad[0] + j[0].grad[1] * j[1].grad[1]);
                    out[3] = w * j[2].value * j[2].value;
                })
                .unwrap()
                .iter()
                .map(|i| i.value)
                .collect()
            };
            for (a, b) in values(&coarse).iter().zip(values(&fine)) {
                assert!((a - b).abs() < 1e-6 * b.abs(), "n={n} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn gaussian_integral() {
        let q = quad(3, 2.0);
        let z: FieldRef = Arc::new(Zero);
        let val = q.integrate(&[&z], |node, _| (-node.r * node.r).exp()).unwrap();
        assert!((val.value - PI.powf(1.5)).abs() < 1e-10 * PI.powf(1.5));
        assert!(val.checked().is_ok());
    }

    #[test]
    fn bubble_critical_norm_matches_beta_integral() {
        for &(n, p) in &[(3usize, 2.0f64), (3, 1.5), (4, 2.5), (5, 1.2)] {
            let dim = Dimension::new(n, p).unwrap();
            let q = Quadrature::default_for(&dim).unwrap();
            let v = BubbleField::shared(Bubble::unit(), dim);
            let ps = dim.p_star();
            let val = q.integrate_checked(&[&v], |_, j| j[0].value.abs().powf(ps)).unwrap();
            // int_0^inf r^{n-1} (1 + r^qe)^{-n/qe'} dr via the substitution t = r^qe.
            let qe = dim.radial_exponent();
            let power = ps * dim.decay_exponent();
            let radial = beta(n as f64 / qe, power - n as f64 / qe) / qe;
            let exact = crate::special::sphere_area(n - 1) * radial;
            assert!((val - exact).abs() < 1e-8 * exact, "({n},{p}): {val} vs {exact}");
        }
    }

    #[test]
    fn many_outputs_match_single_integrals() {
        let dim = Dimension::new(3, 1.5).unwrap();
        let q = Quadrature::default_for(&dim).unwrap();
        let v = BubbleField::shared(Bubble::unit(), dim);
        let bump = FarBump::shared(30.0, 1.0, 0.5);
        let both = crate::quadrature::field::combine(1.0, &v, 1.0, &bump);
        let many = q
            .integrate_many(&[&both], 2, |_, j, out| {
                out[0] = j[0].value.abs().powf(2.0);
                out[1] = j[0].grad_norm().powf(1.5);
            })
            .unwrap();
        let a = q.integrate(&[&both], |_, j| j[0].value.abs().powf(2.0)).unwrap();
        let b = q.integrate(&[&both], |_, j| j[0].grad_norm().powf(1.5)).unwrap();
        assert_eq!(many[0], a);
        assert_eq!(many[1], b);
    }

    #[test]
    fn hemisphere_mirror_symmetry() {
        let q = quad(3, 2.0);
        let z: FieldRef = Arc::new(Zero);
        let upper = q.integrate(&[&z], |n, _| if n.mu > 0.0 { (-n.r).exp() * n.mu } else { 0.0 }).unwrap();
        let lower = q.integrate(&[&z], |n, _| if n.mu < 0.0 { -(-n.r).exp() * n.mu } else { 0.0 }).unwrap();
        assert!((upper.value - lower.value).abs() < 1e-14 * upper.value);
    }

    #[test]
    fn patches_integrate_far_bumps() {
        let dim = Dimension::new(3, 2.0).unwrap();
        let q = Quadrature::default_for(&dim).unwrap();
        let shape = RadialShape::Ball { radius: 1.0 };
        let near = ZonalProfile::new(3, 0, shape).shared();
        let far = FarBump::shared(1e12, 1.0, 1.0);
        let a = q.integrate(&[&near], |_, j| j[0].value * j[0].value).unwrap().value;
        let b = q.integrate(&[&far], |_, j| j[0].value * j[0].value).unwrap().value;
        let exact_value = 0.096_102_709_924_270_34;
        assert!((b - exact_value).abs() < 1e-12 * exact_value, "{b}");
        assert!((a - exact_value).abs() < 1e-7 * exact_value, "{a}");
        let ga = q.integrate(&[&near], |_, j| j[0].grad_norm().powi(2)).unwrap().value;
        let gb = q.integrate(&[&far], |_, j| j[0].grad_norm().powi(2)).unwrap().value;
        let exact_grad = 1.1822301061809896;
        assert!((gb - exact_grad).abs() < 1e-12 * exact_grad, "{gb}");
        assert!((ga - exact_grad).abs() < 1e-7 * exact_grad, "{ga}");
    }

    #[test]
    fn deterministic_across_calls() {
        let dim = Dimension::new(4, 2.5).unwrap();
        let q = Quadrature::new(&dim, GridSpec::sized_for(&dim, 512, 16)).unwrap();
        let v = BubbleField::shared(Bubble::new(1.3, 0.6, 0.2).unwrap(), dim);
        let a = q.integrate(&[&v], |_, j| j[0].grad_norm().powf(2.5)).unwrap().value;
        let b = q.integrate(&[&v], |_, j| j[0].grad_norm().powf(2.5)).unwrap().value;
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
