//! Symmetric tridiagonal eigenproblems: Sturm counts, bisection, inverse iteration.

use crate::error::{LabError, Result};

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows `i` and `i+1`).
#[derive(Clone, Debug)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(LabError::Invalid("tridiagonal shape mismatch".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = self.diag[0] - x;
        if d < 0.0 {
            count += 1;
        }
        for i in 1..self.diag.len() {
            let prev = if d == 0.0 { f64::EPSILON * (self.off[i - 1].abs() + 1e-300) } else { d };
            d = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / prev;
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.off[i - 1].abs();
            }
            if i + 1 < n {
                rad += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection on Sturm counts.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale.min(mid.abs().max(f64::MIN_POSITIVE)) {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// The `k` smallest eigenvalues in ascending order.
    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<f64> {
        (0..k.min(self.len())).map(|i| self.eigenvalue(i)).collect()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Solve `(A - shift) x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        if n == 1 {
            return vec![rhs[0] / nonzero(d[0], 1.0)];
        }
        let mut dl = self.off.clone();
        let mut du = self.off.clone();
        let mut b = rhs.to_vec();
        let scale = self.gershgorin().1.abs().max(shift.abs()).max(1e-300);
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                let fact = dl[i] / nonzero(d[i], scale);
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    dl[i] = du[i + 1];
                    du[i + 1] = -fact * dl[i];
                } else {
                    dl[i] = 0.0;
                }
                du[i] = temp;
                let tb = b[i];
                b[i] = b[i + 1];
                b[i + 1] = tb - fact * b[i + 1];
            }
        }
        let mut x = vec![0.0; n];
        x[n - 1] = b[n - 1] / nonzero(d[n - 1], scale);
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / nonzero(d[n - 2], scale);
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (b[i] - du[i] * x[i + 1] - dl[i] * x[i + 2]) / nonzero(d[i], scale);
        }
        x
    }

    /// Eigenvector for a converged eigenvalue by inverse iteration.
    pub fn eigenvector(&self, lambda: f64, seed_index: usize) -> Vec<f64> {
        let n = self.len();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (((i * 7919 + seed_index * 104729) % 1009) as f64 / 1009.0)).collect();
        normalize(&mut x);
        let (lo, hi) = self.gershgorin();
        let perturb = 64.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1e-300);
        for _ in 0..6 {
            let mut y = self.solve_shifted(lambda + perturb, &x);
            normalize(&mut y);
            let change: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).abs().min((a + b).abs())).fold(0.0, f64::max);
            x = y;
            if change < 1e-14 {
                break;
            }
        }
        x
    }
}

/// Generalized eigenproblem `K f = mu M f` for a stiffness form written as
/// `sum_i edges[i] (f[i+1] - f[i])^2 + sum_i potential[i] f[i]^2` and a
/// diagonal positive mass.
///
/// Pivots are formed from series combinations of edge weights, which keeps
/// Sturm counts free of cancellation for strongly graded coefficients.
#[derive(Clone, Debug)]
pub struct EdgePencil {
    pub edges: Vec<f64>,
    pub potential: Vec<f64>,
    pub mass: Vec<f64>,
}

impl EdgePencil {
    pub fn new(edges: Vec<f64>, potential: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        let n = mass.len();
        if n == 0 || potential.len() != n || edges.len() + 1 != n {
            return Err(LabError::Invalid("pencil shape mismatch".into()));
        }
        if !edges.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(LabError::Invalid("edge weights must be positive and finite".into()));
        }
        if !potential.iter().all(|g| *g >= 0.0 && g.is_finite()) {
            return Err(LabError::Invalid("potential must be nonnegative and finite".into()));
        }
        if !mass.iter().all(|m| *m > 0.0 && m.is_finite()) {
            return Err(LabError::Invalid("mass must be positive and finite".into()));
        }
        Ok(Self { edges, potential, mass })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    fn edge(&self, i: usize) -> f64 {
        self.edges.get(i).copied().unwrap_or(0.0)
    }

    /// Pivots of `K - x M = L D L^T`.
    fn pivots(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        let mut d = Vec::with_capacity(n);
        let mut t = self.potential[0] - x * self.mass[0];
        for i in 0..n {
            if i > 0 {
                let e = self.edges[i - 1];
                let prev = d[i - 1];
                t = e * t / prev + self.potential[i] - x * self.mass[i];
            }
            let mut di = self.edge(i) + t;
            if di == 0.0 {
                di = f64::EPSILON * (self.edge(i) + self.potential[i] + x.abs() * self.mass[i]).max(f64::MIN_POSITIVE);
                t = di - self.edge(i);
            }
            d.push(di);
        }
        d
    }

    /// Number of generalized eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        self.pivots(x).iter().filter(|d| **d < 0.0).count()
    }

    /// The `k`-th smallest generalized eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k >= self.len() {
            return Err(LabError::Eigen(format!("requested eigenvalue {k} of a {}-point pencil", self.len())));
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.count_below(hi) <= k {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(LabError::Eigen("eigenvalue bracket diverged".into()));
            }
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `K f`.
    pub fn apply_stiffness(&self, f: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = (0..n).map(|i| self.potential[i] * f[i]).collect();
        for (i, e) in self.edges.iter().enumerate() {
            let flux = e * (f[i + 1] - f[i]);
            y[i] -= flux;
            y[i + 1] += flux;
        }
        y
    }

    /// `f^T K f` as a sum of nonnegative terms.
    pub fn energy(&self, f: &[f64]) -> f64 {
        let edge: f64 = self.edges.iter().enumerate().map(|(i, e)| e * (f[i + 1] - f[i]).powi(2)).sum();
        edge + self.potential.iter().zip(f).map(|(g, v)| g * v * v).sum::<f64>()
    }

    /// `f^T M g`.
    pub fn mass_product(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mass.iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
    }

    /// Solve `(K - shift M) x = rhs`.
    pub fn solve_shifted(&self, shift: f64, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        let d = self.pivots(shift);
        let mut z = rhs.to_vec();
        for i in 1..n {
            z[i] += self.edges[i - 1] / d[i - 1] * z[i - 1];
        }
        let mut x = vec![0.0; n];
        x[n - 1] = z[n - 1] / d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = z[i] / d[i] + self.edges[i] / d[i] * x[i + 1];
        }
        x
    }

    /// Eigenvector for a converged eigenvalue by inverse iteration, kept
    /// `M`-orthogonal to `previous` and normalized to unit `M`-norm.
    pub fn eigenvector(&self, mu: f64, previous: &[Vec<f64>]) -> Vec<f64> {
        let n = self.len();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.25 * ((i * 7919 % 1009) as f64 / 1009.0)).collect();
        self.mass_normalize(&mut x);
        for _ in 0..8 {
            let mx: Vec<f64> = x.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
            let mut y = self.solve_shifted(mu, &mx);
            for q in previous {
                let c = self.mass_product(&y, q);
                for (a, b) in y.iter_mut().zip(q) {
                    *a -= c * b;
                }
            }
            self.mass_normalize(&mut y);
            if !y.iter().all(|a| a.is_finite()) {
                break;
            }
            let overlap = self.mass_product(&x, &y).abs();
            x = y;
            if (1.0 - overlap).abs() < 1e-15 {
                break;
            }
        }
        let pivot = x.iter().copied().fold(0.0f64, |m, a| if a.abs() > m.abs() { a } else { m });
        if pivot < 0.0 {
            x.iter_mut().for_each(|a| *a = -*a);
        }
        x
    }

    fn mass_normalize(&self, x: &mut [f64]) {
        let norm = self.mass_product(x, x).sqrt();
        if norm > 0.0 {
            x.iter_mut().for_each(|a| *a /= norm);
        }
    }
}

fn nonzero(v: f64, scale: f64) -> f64 {
    let tiny = f64::EPSILON * scale;
    if v.abs() < tiny {
        if v < 0.0 {
            -tiny
        } else {
            tiny
        }
    } else {
        v
    }
}

pub fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting. Returns `None` for a numerically singular matrix.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_recovers_solution() {
        let a = vec![vec![2.0, 1.0, -1.0], vec![-3.0, -1.0, 2.0], vec![-2.0, 1.0, 2.0]];
        let x = solve_dense(a, vec![8.0, -11.0, -3.0]).unwrap();
        for (got, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(solve_dense(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 2.0]).is_none());
    }

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let n = 50;
        let a = laplacian(n);
        for k in 0..5 {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((a.eigenvalue(k) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvectors_have_small_residual() {
        let a = SymTridiag::new((0..40).map(|i| (i as f64).sin() + 3.0).collect(), (0..39).map(|i| 0.5 + 0.1 * (i as f64).cos()).collect()).unwrap();
        for k in 0..4 {
            let lam = a.eigenvalue(k);
            let x = a.eigenvector(lam, k);
            let ax = a.apply(&x);
            let res: f64 = ax.iter().zip(&x).map(|(y, v)| (y - lam * v).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-10, "k={k} res={res}");
        }
    }

    #[test]
    fn shifted_solve_inverts() {
        let a = laplacian(30);
        let rhs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let x = a.solve_shifted(0.7, &rhs);
        let back = a.apply(&x);
        for i in 0..30 {
            assert!((back[i] - 0.7 * x[i] - rhs[i]).abs() < 1e-10);
        }
    }

    fn graded_pencil(n: usize) -> EdgePencil {
        let edges = (0..n - 1).map(|i| (0.2 * i as f64).exp()).collect();
        let potential = (0..n).map(|i| if i + 1 == n { (0.2 * (n - 1) as f64).exp() } else { 0.0 }).collect();
        let mass = (0..n).map(|i| (-0.3 * i as f64).exp()).collect();
        EdgePencil::new(edges, potential, mass).unwrap()
    }

    #[test]
    fn pencil_matches_dense_reduction() {
        let p = EdgePencil::new(vec![1.0, 2.0, 0.5], vec![0.1, 0.0, 0.0, 1.0], vec![1.0, 2.0, 1.0, 0.5]).unwrap();
        let s: Vec<f64> = p.mass.iter().map(|m| m.sqrt()).collect();
        let k = |i: usize, j: usize| -> f64 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            p.apply_stiffness(&e)[i]
        };
        let reduced = SymTridiag::new((0..4).map(|i| k(i, i) / (s[i] * s[i])).collect(), (0..3).map(|i| k(i, i + 1) / (s[i] * s[i + 1])).collect()).unwrap();
        for j in 0..4 {
            let a = p.eigenvalue(j).unwrap();
            let b = reduced.eigenvalue(j);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn graded_pencil_eigenpairs() {
        let p = graded_pencil(200);
        let mut prev: Vec<Vec<f64>> = Vec::new();
        for k in 0..4 {
            let mu = p.eigenvalue(k).unwrap();
            let f = p.eigenvector(mu, &prev);
            let rq = p.energy(&f) / p.mass_product(&f, &f);
            assert!((rq - mu).abs() < 1e-10 * mu, "k={k} rq={rq} mu={mu}");
            for q in &prev {
                assert!(p.mass_product(&f, q).abs() < 1e-10);
            }
            prev.push(f);
        }
    }
}
