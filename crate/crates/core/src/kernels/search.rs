//! Empirical searches for the constants of the vector inequalities and
//! independent verification passes.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::Dimension;
use crate::error::{LabError, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

use super::interpolation::{amplitude_limit, interpolation_terms, InterpolationConstants, InterpolationForm, InterpolationPoint};
use super::sobol::Sobol2;
use super::upper_expansion::{reduced_gap, required_c1, UpperBranch};
use super::vector::{lower_bound_gap, ExpansionTerms, PairInvariants};

/// Number of independent random streams a sampling run is split into.
pub const CHUNKS: u64 = 64;
/// Number of worst samples refined by local minimization.
pub const POLISH_COUNT: usize = 100;

const LOG_RHO_MIN: f64 = -18.420680743952367;
const LOG_RHO_MAX: f64 = 13.815510557964274;

/// Generator for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk + 1);
    rng
}

/// Runs `f(rng, count)` on [`CHUNKS`] streams splitting `total` samples.
/// The result order is the chunk order, independent of scheduling.
pub fn par_chunks<T, F>(seed: u64, total: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let per = total / CHUNKS as usize;
    let extra = total % CHUNKS as usize;
    (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let count = per + usize::from((c as usize) < extra);
            f(&mut chunk_rng(seed, c), count)
        })
        .collect()
}

fn keep_smallest(mut v: Vec<(f64, Vec<f64>)>, k: usize) -> Vec<(f64, Vec<f64>)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v.truncate(k);
    v
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Outcome of a constant search.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantSearch {
    /// Conservative value reported as the constant.
    pub estimate: f64,
    /// Extremal value of the defining ratio found by the search.
    pub extremum: f64,
    /// Parameters of the extremal sample.
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// Outcome of a verification pass with a fixed constant.
#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    pub samples: usize,
    pub violations: usize,
    /// Smallest gap observed, in the units of the tolerance.
    pub worst_gap: f64,
    pub witness: Vec<f64>,
    /// Samples with degenerate norms, excluded from the statistics.
    pub excluded: usize,
}

impl Verification {
    fn merge(parts: Vec<Verification>) -> Verification {
        let mut out = Verification { samples: 0, violations: 0, worst_gap: f64::INFINITY, witness: Vec::new(), excluded: 0 };
        for part in parts {
            out.samples += part.samples;
            out.violations += part.violations;
            out.excluded += part.excluded;
            if part.worst_gap < out.worst_gap {
                out.worst_gap = part.worst_gap;
                out.witness = part.witness;
            }
        }
        out
    }
}

fn c0_ratio(p: f64, kappa: f64, log_rho: f64, psi: f64) -> f64 {
    let rho = clamp(log_rho, LOG_RHO_MIN, LOG_RHO_MAX).exp();
    let psi = clamp(psi, 0.0, std::f64::consts::PI);
    ExpansionTerms::at(PairInvariants::from_polar(rho, psi), p).admissible_c0(kappa)
}

/// Empirical lower estimate of the sharp `c0(p, kappa)`.
///
/// By homogeneity and rotation invariance the ratio depends only on
/// `|y|` and the angle between `x = e_1` and `y`. Half the budget follows
/// a Sobol sequence over `(angle, log|y|)`, half is uniform random; the
/// worst samples are then polished by Nelder–Mead.
pub fn search_c0(p: f64, kappa: f64, budget: usize, seed: u64) -> Result<ConstantSearch> {
    if !(p > 1.0) || !(kappa > 0.0 && kappa < 1.0) {
        return Err(LabError::Invalid(format!("search_c0 needs p > 1 and kappa in (0,1), got p={p} kappa={kappa}")));
    }
    if budget < 10_000 {
        return Err(LabError::Invalid(format!("sample budget must be at least 1e4, got {budget}")));
    }
    let pi = std::f64::consts::PI;
    let span = LOG_RHO_MAX - LOG_RHO_MIN;
    let sobol_count = budget / 2;
    let mut sobol = Sobol2::new();
    let sobol_points: Vec<[f64; 2]> = (0..sobol_count).map(|_| sobol.next_point()).collect();
    let mut worst: Vec<(f64, Vec<f64>)> = sobol_points
        .par_chunks(4096)
        .map(|pts| {
            let v = pts
                .iter()
                .map(|u| {
                    let (lr, psi) = (LOG_RHO_MIN + span * u[1], pi * u[0]);
                    (c0_ratio(p, kappa, lr, psi), vec![lr, psi])
                })
                .collect();
            keep_smallest(v, POLISH_COUNT)
        })
        .flatten()
        .collect();
    let random = par_chunks(seed, budget - sobol_count, |rng, count| {
        let v = (0..count)
            .map(|_| {
                let lr = rng.gen_range(LOG_RHO_MIN..=LOG_RHO_MAX);
                let psi = rng.gen_range(0.0..=pi);
                (c0_ratio(p, kappa, lr, psi), vec![lr, psi])
            })
            .collect();
        keep_smallest(v, POLISH_COUNT)
    });
    worst.extend(random.into_iter().flatten());
    let worst = keep_smallest(worst, POLISH_COUNT);
    let opts = NelderMeadOptions { max_evals: 2000, f_tol: 1e-15, x_tol: 1e-10 };
    let polished: Vec<(f64, Vec<f64>)> = worst
        .par_iter()
        .map(|(f, x)| {
            let m = nelder_mead(|z| c0_ratio(p, kappa, z[0], z[1]), x, &[0.05, 0.02], &opts);
            if m.f < *f {
                let z = vec![clamp(m.x[0], LOG_RHO_MIN, LOG_RHO_MAX), clamp(m.x[1], 0.0, pi)];
                (m.f, z)
            } else {
                (*f, x.clone())
            }
        })
        .collect();
    let (extremum, witness) = keep_smallest(polished, 1).pop().expect("nonempty sample set");
    let estimate = extremum - 1e-9 * extremum.abs() - 1e-15;
    if !(estimate > 0.0) {
        return Err(LabError::SearchFailed(format!("c0 estimate {estimate:.6e} is not positive for p={p} kappa={kappa}")));
    }
    Ok(ConstantSearch { estimate, extremum, witness: vec![witness[0].exp(), witness[1]], samples: budget })
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

/// Fresh random check of the vector inequality at `|x| = 1` in dimensions
/// 2 to 4; a violation is a gap below `-tolerance`.
pub fn verify_lower_bound(p: f64, kappa: f64, c0: f64, samples: usize, seed: u64, tolerance: f64) -> Verification {
    let parts = par_chunks(seed, samples, |rng, count| {
        let mut out = Verification { samples: 0, violations: 0, worst_gap: f64::INFINITY, witness: Vec::new(), excluded: 0 };
        for _ in 0..count {
            let dim = rng.gen_range(2..=4);
            let x = random_unit(rng, dim);
            let rho = rng.gen_range(LOG_RHO_MIN..=LOG_RHO_MAX).exp();
            let y: Vec<f64> = random_unit(rng, dim).into_iter().map(|a| rho * a).collect();
            let s = lower_bound_gap(&x, &y, p, kappa, c0);
            out.samples += 1;
            if s.degenerate {
                out.excluded += 1;
                continue;
            }
            if s.gap < -tolerance {
                out.violations += 1;
            }
            if s.gap < out.worst_gap {
                out.worst_gap = s.gap;
                out.witness = x.iter().chain(&y).copied().collect();
            }
        }
        out
    });
    Verification::merge(parts)
}

/// Result of the one-dimensional scan defining `C1`.
#[derive(Clone, Debug, Serialize)]
pub struct C1Search {
    pub c1: f64,
    /// Supremum of the required constant over the scan.
    pub supremum: f64,
    pub argmax: f64,
    pub branch: UpperBranch,
    pub scanned: usize,
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Smallest admissible `C1` over a log-spaced scan of `t = b/a` on both
/// sides of the origin plus a linear window around `t = 0`, refined by a
/// golden-section search around the best scan point, never below `1/p*`.
pub fn search_c1(dim: &Dimension, kappa: f64) -> Result<C1Search> {
    if !(kappa > 0.0) {
        return Err(LabError::Invalid(format!("kappa must be positive, got {kappa}")));
    }
    let q = dim.p_star();
    let branch = UpperBranch::for_dimension(dim);
    let per_side = 20_001;
    let mut ts: Vec<f64> = Vec::with_capacity(2 * per_side + 2001);
    for i in 0..per_side {
        let t = 10f64.powf(-6.0 + 14.0 * i as f64 / (per_side - 1) as f64);
        ts.push(t);
        ts.push(-t);
    }
    for i in 0..=2000 {
        ts.push(-0.1 + 0.2 * i as f64 / 2000.0);
    }
    let req = |t: f64| required_c1(t, q, kappa, branch);
    let (mut argmax, mut sup) = ts.iter().map(|&t| (t, req(t))).fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if sup.is_finite() && argmax != 0.0 {
        let sign = argmax.signum();
        let l = argmax.abs().ln();
        let (lt, v) = golden_max(|s| req(sign * s.exp()), l - 0.01, l + 0.01);
        if v > sup {
            sup = v;
            argmax = sign * lt.exp();
        }
    }
    let floor = 1.0 / q;
    let c1 = if sup.is_finite() { (sup * (1.0 + 1e-8) + 1e-12).max(floor) } else { floor };
    Ok(C1Search { c1, supremum: sup, argmax, branch, scanned: ts.len() })
}

/// Fresh random check of the upper expansion: `a` log-uniform in magnitude
/// with random sign, `t = b/a` half log-uniform and half uniform on
/// `[-1e6, 1e6]`. A violation is a gap below `-tolerance |a|^{p*}`.
pub fn verify_upper_expansion(dim: &Dimension, kappa: f64, c1: f64, samples: usize, seed: u64, tolerance: f64) -> Verification {
    let q = dim.p_star();
    let branch = UpperBranch::for_dimension(dim);
    let parts = par_chunks(seed, samples, |rng, count| {
        let mut out = Verification { samples: 0, violations: 0, worst_gap: f64::INFINITY, witness: Vec::new(), excluded: 0 };
        for i in 0..count {
            let a = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * 10f64.powf(rng.gen_range(-2.0..2.0));
            let t = if i % 2 == 0 {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * 10f64.powf(rng.gen_range(-6.0..6.0))
            } else {
                rng.gen_range(-1e6..=1e6)
            };
            let scaled = reduced_gap(t, q, kappa, c1, branch);
            out.samples += 1;
            if scaled < -tolerance {
                out.violations += 1;
            }
            if scaled < out.worst_gap {
                out.worst_gap = scaled;
                out.witness = vec![a, t * a];
            }
        }
        out
    });
    Verification::merge(parts)
}

/// Box from which interpolation sample points are drawn, in logarithmic
/// coordinates: `log r`, `log eps`, `log` of `a` relative to its limit, `log b`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InterpolationBox {
    pub log_r: (f64, f64),
    pub log_eps: (f64, f64),
    pub log_fraction: (f64, f64),
    pub log_b: (f64, f64),
}

impl Default for InterpolationBox {
    fn default() -> Self {
        let l10 = std::f64::consts::LN_10;
        Self { log_r: (-3.0 * l10, 3.0 * l10), log_eps: (-6.0 * l10, -1e-9), log_fraction: (-6.0 * l10, 0.0), log_b: (-10.0 * l10, 10.0 * l10) }
    }
}

impl InterpolationBox {
    fn point(&self, dim: &Dimension, zeta: f64, z: &[f64]) -> InterpolationPoint {
        let r = clamp(z[0], self.log_r.0, self.log_r.1).exp();
        let eps = clamp(z[1], self.log_eps.0, self.log_eps.1).exp();
        let frac = clamp(z[2], self.log_fraction.0, self.log_fraction.1).exp();
        let b = clamp(z[3], self.log_b.0, self.log_b.1).exp();
        let a = frac * amplitude_limit(dim, zeta, r) / eps;
        InterpolationPoint { eps, r, a, b }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![
            rng.gen_range(self.log_r.0..=self.log_r.1),
            rng.gen_range(self.log_eps.0..=self.log_eps.1),
            rng.gen_range(self.log_fraction.0..=self.log_fraction.1),
            rng.gen_range(self.log_b.0..=self.log_b.1),
        ]
    }
}

/// Empirical `C(eps0, n, p)` for the interpolation inequality with
/// `zeta = (eps0/3)^{1/p}`: the supremum over constrained samples of the
/// excess of the left side over the absorbed term, divided by the factor
/// multiplying `C`, polished by Nelder–Mead from the worst samples.
pub fn search_interpolation(dim: &Dimension, eps0: f64, budget: usize, seed: u64, region: &InterpolationBox) -> Result<ConstantSearch> {
    let zeta = InterpolationConstants::balanced(dim, eps0, 0.0).zeta;
    let neg_required = |z: &[f64]| -> f64 {
        let x = region.point(dim, zeta, z);
        match interpolation_terms(dim, &x, eps0, zeta, InterpolationForm::Inter) {
            Ok(t) => -t.required_c(),
            Err(_) => f64::INFINITY,
        }
    };
    interpolation_terms(dim, &region.point(dim, zeta, &[0.0, -1.0, -1.0, 0.0]), eps0, zeta, InterpolationForm::Inter)?;
    let worst = par_chunks(seed, budget, |rng, count| {
        let v = (0..count)
            .map(|_| {
                let z = region.draw(rng);
                (neg_required(&z), z)
            })
            .collect();
        keep_smallest(v, POLISH_COUNT)
    });
    let worst = keep_smallest(worst.into_iter().flatten().collect(), POLISH_COUNT);
    let opts = NelderMeadOptions { max_evals: 3000, f_tol: 1e-14, x_tol: 1e-10 };
    let polished: Vec<(f64, Vec<f64>)> = worst
        .par_iter()
        .map(|(f, z)| {
            let m = nelder_mead(neg_required, z, &[0.1; 4], &opts);
            if m.f < *f {
                (m.f, m.x)
            } else {
                (*f, z.clone())
            }
        })
        .collect();
    let (neg, z) = keep_smallest(polished, 1).pop().expect("nonempty sample set");
    let extremum = -neg;
    if !extremum.is_finite() {
        return Ok(ConstantSearch { estimate: 0.0, extremum: 0.0, witness: Vec::new(), samples: budget });
    }
    let x = region.point(dim, zeta, &z);
    Ok(ConstantSearch { estimate: extremum * (1.0 + 1e-6), extremum, witness: vec![x.eps, x.r, x.a, x.b], samples: budget })
}

/// Fresh random check of both forms of the interpolation bound with the given constants.
/// A violation is a gap below `-tolerance` times the largest term.
pub fn verify_interpolation(dim: &Dimension, k: &InterpolationConstants, samples: usize, seed: u64, region: &InterpolationBox, tolerance: f64) -> Result<Verification> {
    interpolation_terms(dim, &region.point(dim, k.zeta, &[0.0, -1.0, -1.0, 0.0]), k.eps0, k.zeta, InterpolationForm::Inter)?;
    let parts = par_chunks(seed, samples, |rng, count| {
        let mut out = Verification { samples: 0, violations: 0, worst_gap: f64::INFINITY, witness: Vec::new(), excluded: 0 };
        for _ in 0..count {
            let z = region.draw(rng);
            let x = region.point(dim, k.zeta, &z);
            out.samples += 1;
            for which in [InterpolationForm::Inter, InterpolationForm::Young] {
                let Ok(t) = interpolation_terms(dim, &x, k.eps0, k.zeta, which) else {
                    out.excluded += 1;
                    continue;
                };
                let scale = t.scale(k.c);
                let rel = if scale > 0.0 { t.gap(k.c) / scale } else { 0.0 };
                if rel < -tolerance {
                    out.violations += 1;
                }
                if rel < out.worst_gap {
                    out.worst_gap = rel;
                    out.witness = vec![x.eps, x.r, x.a, x.b];
                }
            }
        }
        out
    });
    Ok(Verification::merge(parts))
}
