//! Fields stored as samples on the base grid, and their binary container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{LabError, Result};

use super::field::{AxisymField, FieldRef, Jet, Node};
use super::grid::GridSpec;
use super::integrate::Quadrature;

/// Samples of a field and its gradient at the base-grid nodes of a
/// quadrature centered at `center`. Arrays are row-major with the radial
/// index outermost.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedField {
    n: usize,
    spec: GridSpec,
    center: f64,
    values: Vec<f64>,
    grad_z: Vec<f64>,
    grad_rho: Vec<f64>,
    description: String,
}

impl GriddedField {
    /// Sample an analytic field, keeping its exact gradient.
    pub fn sample(field: &FieldRef, quad: &Quadrature, center: f64) -> Self {
        let (nr, m) = (quad.spec().radial_nodes, quad.spec().angular_nodes);
        let mut values = Vec::with_capacity(nr * m);
        let mut grad_z = Vec::with_capacity(nr * m);
        let mut grad_rho = Vec::with_capacity(nr * m);
        for k in 0..nr {
            for j in 0..m {
                let jet = field.eval(&quad.node(center, k, j));
                values.push(jet.value);
                grad_z.push(jet.grad[0]);
                grad_rho.push(jet.grad[1]);
            }
        }
        Self { n: quad.dim().n(), spec: quad.spec().clone(), center, values, grad_z, grad_rho, description: format!("sampled {}", field.describe()) }
    }

    /// Build from values alone: fourth-order differences in `s = ln r` and
    /// spectral differentiation in `mu`.
    pub fn from_values(quad: &Quadrature, center: f64, values: Vec<f64>) -> Result<Self> {
        let spec = quad.spec();
        let (nr, m) = (spec.radial_nodes, spec.angular_nodes);
        if values.len() != nr * m {
            return Err(LabError::GridMismatch(format!("expected {} samples, got {}", nr * m, values.len())));
        }
        let h = spec.step();
        let dmu = differentiation_matrix(quad.angular().nodes());
        let mut grad_z = vec![0.0; nr * m];
        let mut grad_rho = vec![0.0; nr * m];
        let column: Vec<Vec<f64>> = (0..m).map(|j| (0..nr).map(|k| values[k * m + j]).collect()).collect();
        let ds: Vec<Vec<f64>> = column.iter().map(|c| fourth_order_derivative(c, h)).collect();
        for k in 0..nr {
            let r = quad.radial().nodes()[k];
            let row = &values[k * m..(k + 1) * m];
            for j in 0..m {
                let f_r = ds[j][k] / r;
                let f_mu: f64 = (0..m).map(|i| dmu[j * m + i] * row[i]).sum();
                let mu = quad.angular().nodes()[j];
                let s = quad.angular().sines()[j];
                grad_z[k * m + j] = f_r * mu + s * s * f_mu / r;
                grad_rho[k * m + j] = f_r * s - s * mu * f_mu / r;
            }
        }
        Ok(Self { n: quad.dim().n(), spec: spec.clone(), center, values, grad_z, grad_rho, description: "gridded values".into() })
    }

    pub fn shared(self) -> FieldRef {
        Arc::new(self)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grad_z(&self) -> &[f64] {
        &self.grad_z
    }

    pub fn grad_rho(&self) -> &[f64] {
        &self.grad_rho
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = d.into();
        self
    }

    /// Write to the binary container: `u64` dimension, radial count, angular
    /// count; `f64` s_min, s_max, center; then values, axial gradient and
    /// transverse gradient, each row-major. All little-endian.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for v in [self.n as u64, self.spec.radial_nodes as u64, self.spec.angular_nodes as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.spec.s_min, self.spec.s_max, self.center] {
            w.write_all(&v.to_le_bytes())?;
        }
        for arr in [&self.values, &self.grad_z, &self.grad_rho] {
            for v in arr.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut u = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
            r.read_exact(&mut u)?;
            Ok(u64::from_le_bytes(u))
        };
        let n = read_u64(&mut r)? as usize;
        let nr = read_u64(&mut r)? as usize;
        let m = read_u64(&mut r)? as usize;
        let read_f64 = |r: &mut BufReader<File>| -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let s_min = read_f64(&mut r)?;
        let s_max = read_f64(&mut r)?;
        let center = read_f64(&mut r)?;
        let spec = GridSpec::new(s_min, s_max, nr, m)?;
        if n < 2 || nr.checked_mul(m).is_none() {
            return Err(LabError::Invalid("corrupt field container header".into()));
        }
        let mut arrays = Vec::new();
        for _ in 0..3 {
            let mut a = Vec::with_capacity(nr * m);
            for _ in 0..nr * m {
                a.push(read_f64(&mut r)?);
            }
            arrays.push(a);
        }
        let grad_rho = arrays.pop().unwrap();
        let grad_z = arrays.pop().unwrap();
        let values = arrays.pop().unwrap();
        Ok(Self { n, spec, center, values, grad_z, grad_rho, description: format!("fixture {}", path.display()) })
    }
}

impl AxisymField for GriddedField {
    fn eval(&self, node: &Node) -> Jet {
        match node.cell {
            Some((k, j)) => {
                let i = k * self.spec.angular_nodes + j;
                Jet::new(self.values[i], self.grad_z[i], self.grad_rho[i])
            }
            None => Jet::new(f64::NAN, f64::NAN, f64::NAN),
        }
    }

    fn center(&self) -> f64 {
        self.center
    }

    fn describe(&self) -> String {
        self.description.clone()
    }

    fn sampled_on(&self) -> Option<(&GridSpec, f64)> {
        Some((&self.spec, self.center))
    }
}

/// Fourth-order first derivative on a uniform grid, one-sided at the ends.
pub fn fourth_order_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 5, "need at least five samples");
    let mut d = vec![0.0; n];
    let c = 1.0 / (12.0 * h);
    d[0] = c * (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]);
    d[1] = c * (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]);
    for k in 2..n - 2 {
        d[k] = c * (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]);
    }
    d[n - 2] = -c * (-3.0 * f[n - 1] - 10.0 * f[n - 2] + 18.0 * f[n - 3] - 6.0 * f[n - 4] + f[n - 5]);
    d[n - 1] = -c * (-25.0 * f[n - 1] + 48.0 * f[n - 2] - 36.0 * f[n - 3] + 16.0 * f[n - 4] - 3.0 * f[n - 5]);
    d
}

/// Polynomial differentiation matrix on arbitrary distinct nodes, row-major.
pub fn differentiation_matrix(x: &[f64]) -> Vec<f64> {
    let m = x.len();
    // Barycentric weights in log form to avoid overflow.
    let mut logw = vec![0.0; m];
    let mut sign = vec![1.0; m];
    for j in 0..m {
        for k in 0..m {
            if k != j {
                let diff = 2.0 * (x[j] - x[k]);
                logw[j] -= diff.abs().ln();
                if diff < 0.0 {
                    sign[j] = -sign[j];
                }
            }
        }
    }
    let mut d = vec![0.0; m * m];
    for i in 0..m {
        let mut diag = 0.0;
        for j in 0..m {
            if i != j {
                let ratio = sign[j] * sign[i] * (logw[j] - logw[i]).exp();
                let v = ratio / (x[i] - x[j]);
                d[i * m + j] = v;
                diag -= v;
            }
        }
        d[i * m + i] = diag;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{Bubble, Dimension};
    use crate::quadrature::field::{BubbleField, RadialShape, ZonalProfile};

    #[test]
    fn differentiation_matrix_is_exact_for_polynomials() {
        let x: Vec<f64> = (0..12).map(|j| -((2 * j + 1) as f64 * std::f64::consts::PI / 24.0).cos()).collect();
        let d = differentiation_matrix(&x);
        let f: Vec<f64> = x.iter().map(|t| t.powi(7) - 2.0 * t * t).collect();
        for i in 0..12 {
            let df: f64 = (0..12).map(|j| d[i * 12 + j] * f[j]).sum();
            let exact = 7.0 * x[i].powi(6) - 4.0 * x[i];
            assert!((df - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn fourth_order_rate() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let f: Vec<f64> = (0..n).map(|k| (3.0 * k as f64 * h).sin()).collect();
            let d = fourth_order_derivative(&f, h);
            (0..n).map(|k| (d[k] - 3.0 * (3.0 * k as f64 * h).cos()).abs()).fold(0.0, f64::max)
        };
        let e1 = err(41);
        let e2 = err(81);
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn values_only_gradients_match_analytic() {
        let dim = Dimension::new(3, 2.0).unwrap();
        let quad = Quadrature::new(&dim, GridSpec::new(-6.0, 6.0, 1200, 24).unwrap()).unwrap();
        let f = ZonalProfile::new(3, 2, RadialShape::Gaussian { width: 1.0 }).with_origin_power(2).shared();
        let sampled = GriddedField::sample(&f, &quad, 0.0);
        let rebuilt = GriddedField::from_values(&quad, 0.0, sampled.values().to_vec()).unwrap();
        let scale = sampled.grad_z().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let worst = sampled.grad_z().iter().zip(rebuilt.grad_z()).chain(sampled.grad_rho().iter().zip(rebuilt.grad_rho())).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-5 * scale, "{worst} vs {scale}");
    }

    #[test]
    fn container_round_trip() {
        let dim = Dimension::new(4, 2.5).unwrap();
        let quad = Quadrature::new(&dim, GridSpec::new(-5.0, 5.0, 64, 6).unwrap()).unwrap();
        let f = BubbleField::shared(Bubble::new(1.0, 2.0, 0.0).unwrap(), dim);
        let g = GriddedField::sample(&f, &quad, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        g.write_to(&path).unwrap();
        let back = GriddedField::read_from(&path).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(back.grad_rho(), g.grad_rho());
        assert_eq!(back.spec(), g.spec());
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 48 + 3 * 64 * 6 * 8);
    }

    #[test]
    fn gridded_integrals_match_analytic() {
        let dim = Dimension::new(3, 2.0).unwrap();
        let quad = Quadrature::new(&dim, GridSpec::sized_for(&dim, 512, 16)).unwrap();
        let f = BubbleField::shared(Bubble::unit(), dim);
        let g = GriddedField::sample(&f, &quad, 0.0).shared();
        let a = quad.integrate(&[&f], |_, j| j[0].grad_norm().powi(2)).unwrap().value;
        let b = quad.integrate(&[&g], |_, j| j[0].grad_norm().powi(2)).unwrap().value;
        assert_eq!(a, b);
        let other = Quadrature::new(&dim, GridSpec::sized_for(&dim, 256, 16)).unwrap();
        assert!(other.integrate(&[&g], |_, j| j[0].value).is_err());
    }
}
