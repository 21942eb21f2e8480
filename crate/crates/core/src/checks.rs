//! Named inequality checks run by the scan front end.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::Dimension;
use crate::context::Context;
use crate::corpus::{random_corpus, smooth_corpus};
use crate::error::{invalid, Result};
use crate::kernels::{search_c0, search_c1, search_interpolation, verify_interpolation, verify_lower_bound, verify_upper_expansion, InterpolationBox, InterpolationConstants};
use crate::quadrature::RadialShape;
use crate::spectrum::{check_gap_inequality, embedding_ratios, fit_power_law, hardy_poincare_ratio, orlicz_poincare_ratio, spectral_gap, spectral_grid, GapCase, GapParams};

/// Settings shared by every check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckSettings {
    pub kappa: f64,
    pub eps0: f64,
    /// Sample count; `None` selects the check's own default.
    pub samples: Option<usize>,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self { kappa: 0.5, eps0: 0.1, samples: None, seed: 1, tolerance: 1e-10 }
    }
}

/// Result of one check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest observed margin; its units depend on the check.
    pub worst_margin: f64,
    /// Constants searched for or fitted by the check.
    pub constants: BTreeMap<String, f64>,
    /// Labels of failing samples with a short reason.
    pub failures: Vec<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// A sampled inequality with an empirical constant.
pub trait InequalityCheck: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn default_samples(&self) -> usize;
    fn run(&self, settings: &CheckSettings, ctx: &Context) -> Result<CheckOutcome>;
}

/// Names accepted by [`inequality_check`].
pub const CHECKS: [&str; 7] = ["pointwise-lower", "pointwise-upper", "interpolation", "perturbed-gap", "weighted-embedding", "orlicz-poincare", "hardy-poincare"];

pub fn inequality_check(name: &str) -> Result<Box<dyn InequalityCheck>> {
    match name {
        "pointwise-lower" => Ok(Box::new(PointwiseLower)),
        "pointwise-upper" => Ok(Box::new(PointwiseUpper)),
        "interpolation" => Ok(Box::new(Interpolation)),
        "perturbed-gap" => Ok(Box::new(PerturbedGap)),
        "weighted-embedding" => Ok(Box::new(WeightedEmbedding)),
        "orlicz-poincare" => Ok(Box::new(OrliczPoincare)),
        "hardy-poincare" => Ok(Box::new(HardyPoincare)),
        other => invalid(format!("unknown check '{other}', expected one of {}", CHECKS.join(", "))),
    }
}

fn sample_count(check: &dyn InequalityCheck, s: &CheckSettings) -> usize {
    s.samples.unwrap_or_else(|| check.default_samples())
}

fn verify_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn constants<const K: usize>(pairs: [(&str, f64); K]) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Lower bound for `|x+y|^p` with the searched constant `c0(p, kappa)`.
pub struct PointwiseLower;

/// Upper expansion of `|a+b|^{p*}` with the searched constant `C1`.
pub struct PointwiseUpper;

/// Two-sided scalar interpolation bound with the searched constant `C` and
/// `zeta^p = eps0/3`.
pub struct Interpolation;

/// Perturbed spectral-gap inequality for orthogonalized corpus fields.
pub struct PerturbedGap;

/// Whole-space, small-ball and large-ball weighted embeddings.
pub struct WeightedEmbedding;

/// Orlicz-type weighted Poincaré inequality.
pub struct OrliczPoincare;

/// Exterior Hardy–Poincaré inequality for radial profiles.
pub struct HardyPoincare;

impl InequalityCheck for PointwiseLower {
    fn name(&self) -> &'static str {
        "pointwise-lower"
    }

    fn description(&self) -> &'static str {
        "lower bound for |x+y|^p with weighted quadratic term"
    }

    fn default_samples(&self) -> usize {
        1_000_000
    }

    fn run(&self, s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let samples = sample_count(self, s);
        let p = ctx.dim.p();
        let c0 = search_c0(p, s.kappa, samples, s.seed)?;
        let v = verify_lower_bound(p, s.kappa, c0.estimate, samples, verify_seed(s.seed), s.tolerance);
        Ok(CheckOutcome {
            check: self.name().into(),
            samples: v.samples,
            violations: v.violations,
            worst_margin: v.worst_gap,
            constants: constants([("c0", c0.estimate), ("c0_extremum", c0.extremum), ("kappa", s.kappa)]),
            failures: Vec::new(),
        })
    }
}

impl InequalityCheck for PointwiseUpper {
    fn name(&self) -> &'static str {
        "pointwise-upper"
    }

    fn description(&self) -> &'static str {
        "upper expansion of |a+b|^p* with a bounded remainder"
    }

    fn default_samples(&self) -> usize {
        1_000_000
    }

    fn run(&self, s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let samples = sample_count(self, s);
        let c1 = search_c1(&ctx.dim, s.kappa)?;
        let v = verify_upper_expansion(&ctx.dim, s.kappa, c1.c1, samples, s.seed, s.tolerance);
        Ok(CheckOutcome {
            check: self.name().into(),
            samples: v.samples,
            violations: v.violations,
            worst_margin: v.worst_gap,
            constants: constants([("c1", c1.c1), ("c1_supremum", c1.supremum), ("kappa", s.kappa)]),
            failures: Vec::new(),
        })
    }
}

impl InequalityCheck for Interpolation {
    fn name(&self) -> &'static str {
        "interpolation"
    }

    fn description(&self) -> &'static str {
        "scalar interpolation bound absorbing eps0 |a|^p*"
    }

    fn default_samples(&self) -> usize {
        1_000_000
    }

    fn run(&self, s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let samples = sample_count(self, s);
        let region = InterpolationBox::default();
        let search = search_interpolation(&ctx.dim, s.eps0, samples, s.seed, &region)?;
        let k = InterpolationConstants::balanced(&ctx.dim, s.eps0, search.estimate);
        let v = verify_interpolation(&ctx.dim, &k, samples, verify_seed(s.seed), &region, s.tolerance)?;
        let zeta_p = k.zeta.powf(ctx.dim.p());
        Ok(CheckOutcome {
            check: self.name().into(),
            samples: v.samples,
            violations: v.violations,
            worst_margin: v.worst_gap,
            constants: constants([("c", k.c), ("eps0", s.eps0), ("zeta", k.zeta), ("zeta_pow_p", zeta_p), ("excluded", v.excluded as f64)]),
            failures: Vec::new(),
        })
    }
}

/// Gradient norms at which each perturbation is tested.
pub const GAP_NORMS: [f64; 2] = [1e-2, 1e-3];
/// Coefficient of the min-term on the left of the perturbed gap inequality.
pub const GAP_GAMMA0: f64 = 0.1;
/// Constant in the Orlicz weight on the right.
pub const GAP_C1: f64 = 1.0;

impl InequalityCheck for PerturbedGap {
    fn name(&self) -> &'static str {
        "perturbed-gap"
    }

    fn description(&self) -> &'static str {
        "perturbed spectral-gap inequality on orthogonalized corpus fields"
    }

    fn default_samples(&self) -> usize {
        50
    }

    fn run(&self, s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let samples = sample_count(self, s);
        let gap = spectral_gap(&ctx.dim, &spectral_grid(&ctx.dim, 2048)?)?;
        let case = GapCase::for_dimension(&ctx.dim);
        let corpus = random_corpus(&ctx.dim, samples, s.seed);
        let results: Vec<(String, Result<(f64, bool)>)> = corpus
            .par_iter()
            .flat_map_iter(|entry| {
                GAP_NORMS.iter().map(move |&norm| {
                    let params = GapParams { gamma0: GAP_GAMMA0, c1: GAP_C1, lambda: gap.lambda, gradient_norm: norm };
                    let r = check_gap_inequality(&entry.field, case, &params, ctx).map(|x| {
                        let margin = ((x.lhs - x.rhs) / x.rhs.abs().max(f64::MIN_POSITIVE)).min((x.linear_lhs - x.linear_rhs) / x.linear_rhs.abs().max(f64::MIN_POSITIVE));
                        (margin, x.holds && x.linear_holds)
                    });
                    (format!("{} |Dphi|={norm:e}", entry.label), r)
                })
            })
            .collect();
        let mut out = CheckOutcome {
            check: self.name().into(),
            samples: results.len(),
            violations: 0,
            worst_margin: f64::INFINITY,
            constants: constants([("lambda", gap.lambda), ("gamma0", GAP_GAMMA0), ("c1", GAP_C1)]),
            failures: Vec::new(),
        };
        for (label, r) in results {
            match r {
                Ok((margin, holds)) => {
                    out.worst_margin = out.worst_margin.min(margin);
                    if !holds {
                        out.violations += 1;
                        out.failures.push(format!("{label}: relative margin {margin:.3e}"));
                    }
                }
                Err(e) => {
                    out.violations += 1;
                    out.failures.push(format!("{label}: {e}"));
                }
            }
        }
        Ok(out)
    }
}

/// Radii at which the small-ball and large-ball ratios are sampled.
pub const EMBEDDING_RADII: [f64; 3] = [0.5, 0.1, 0.02];

/// Fitted constants of the weighted embeddings over a corpus.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingConstants {
    pub whole: f64,
    pub small_ball: f64,
    pub large_ball: f64,
    /// Smallest fitted small-ball exponent over the corpus.
    pub theta: f64,
    pub samples: usize,
    pub failures: Vec<String>,
}

/// Largest ratio of each embedding form and the smallest fitted exponent.
pub fn embedding_constants(samples: usize, seed: u64, ctx: &Context) -> EmbeddingConstants {
    let corpus = smooth_corpus(&ctx.dim, samples, seed);
    let per: Vec<(String, Result<(f64, f64, f64, f64)>)> = corpus
        .par_iter()
        .map(|entry| {
            let r = (|| {
                let ratios = EMBEDDING_RADII.iter().map(|&rho| embedding_ratios(&entry.field, rho, ctx)).collect::<Result<Vec<_>>>()?;
                let small: Vec<f64> = ratios.iter().map(|r| r.small_ball).collect();
                let (theta, c) = fit_power_law(&EMBEDDING_RADII, &small)?;
                let whole = ratios.iter().map(|r| r.whole).fold(0.0, f64::max);
                let large = ratios.iter().map(|r| r.large_ball).fold(0.0, f64::max);
                Ok((whole, c, large, theta))
            })();
            (entry.label.clone(), r)
        })
        .collect();
    let mut out = EmbeddingConstants { whole: 0.0, small_ball: 0.0, large_ball: 0.0, theta: f64::INFINITY, samples: per.len(), failures: Vec::new() };
    for (label, r) in per {
        match r {
            Ok((w, c, l, theta)) if [w, c, l, theta].iter().all(|x| x.is_finite()) => {
                out.whole = out.whole.max(w);
                out.small_ball = out.small_ball.max(c);
                out.large_ball = out.large_ball.max(l);
                out.theta = out.theta.min(theta);
            }
            Ok(_) => out.failures.push(format!("{label}: non-finite ratio")),
            Err(e) => out.failures.push(format!("{label}: {e}")),
        }
    }
    out
}

impl InequalityCheck for WeightedEmbedding {
    fn name(&self) -> &'static str {
        "weighted-embedding"
    }

    fn description(&self) -> &'static str {
        "weighted embedding ratios on the whole space, small balls and large-ball complements"
    }

    fn default_samples(&self) -> usize {
        50
    }

    fn run(&self, s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let e = embedding_constants(sample_count(self, s), s.seed, ctx);
        let violations = e.failures.len() + usize::from(!(e.theta > 0.0));
        Ok(CheckOutcome {
            check: self.name().into(),
            samples: e.samples,
            violations,
            worst_margin: e.theta,
            constants: constants([("whole", e.whole), ("small_ball", e.small_ball), ("large_ball", e.large_ball), ("theta", e.theta)]),
            failures: e.failures,
        })
    }
}

/// Amplitudes at which the Orlicz-type ratio is sampled.
pub const ORLICZ_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

/// Largest Orlicz-type ratio over a corpus with the failing labels.
pub fn orlicz_constant(samples: usize, seed: u64, ctx: &Context) -> Result<(f64, Vec<String>)> {
    let dim = ctx.dim;
    if dim.p() > 2.0 * dim.nf() / (dim.nf() + 2.0) {
        return invalid(format!("the Orlicz-type inequality needs p <= 2n/(n+2), got n={} p={}", dim.n(), dim.p()));
    }
    let corpus = random_corpus(&dim, samples, seed);
    let per: Vec<(String, Result<f64>)> = corpus
        .par_iter()
        .map(|entry| {
            let r = ORLICZ_EPS.iter().map(|&eps| orlicz_poincare_ratio(&entry.field, eps, ctx)).try_fold(0.0f64, |m, r| r.map(|x| m.max(x)));
            (entry.label.clone(), r)
        })
        .collect();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (label, r) in per {
        match r {
            Ok(x) if x.is_finite() => worst = worst.max(x),
            Ok(x) => failures.push(format!("{label}: ratio {x}")),
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    Ok((worst, failures))
}

impl InequalityCheck for OrliczPoincare {
    fn name(&self) -> &'static str {
        "orlicz-poincare"
    }

    fn description(&self) -> &'static str {
        "Orlicz-type weighted Poincaré ratio for p <= 2n/(n+2)"
    }

    fn default_samples(&self) -> usize {
        50
    }

    fn run(&self, s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let samples = sample_count(self, s);
        let (c, failures) = orlicz_constant(samples, s.seed, ctx)?;
        Ok(CheckOutcome { check: self.name().into(), samples, violations: failures.len(), worst_margin: c, constants: constants([("c", c)]), failures })
    }
}

/// Exterior radii of the Hardy–Poincaré scan.
pub const HARDY_RADII: [f64; 3] = [1.0, 2.0, 10.0];

/// Weight exponents `alpha` of the Hardy–Poincaré scan.
pub fn hardy_alphas(dim: &Dimension) -> [f64; 3] {
    [0.0, 1.0, dim.nf() - 1.5]
}

/// Radial profiles supported outside the ball of radius `r0`.
pub fn hardy_profiles(dim: &Dimension, r0: f64) -> Vec<(String, RadialShape)> {
    vec![
        (format!("annulus ({r0}, {})", r0 + 1.0), RadialShape::Annulus { inner: r0, outer: r0 + 1.0 }),
        (format!("annulus ({}, {})", 1.5 * r0, 3.0 * r0), RadialShape::Annulus { inner: 1.5 * r0, outer: 3.0 * r0 }),
        (format!("gaussian width {}", 2.0 * r0), RadialShape::Gaussian { width: 2.0 * r0 }),
        ("algebraic".into(), RadialShape::Algebraic { exponent: 1.0, power: dim.nf() / dim.p() + 1.0 }),
    ]
}

/// Largest Hardy–Poincaré ratio over profiles, radii and weights.
pub fn hardy_constant(dim: &Dimension, radial_nodes: usize) -> (f64, usize, Vec<String>) {
    let cases: Vec<(String, RadialShape, f64, f64)> = HARDY_RADII
        .iter()
        .flat_map(|&r0| {
            hardy_profiles(dim, r0)
                .into_iter()
                .flat_map(move |(label, shape)| hardy_alphas(dim).into_iter().map(move |alpha| (format!("{label} R={r0} alpha={alpha}"), shape, alpha, r0)))
        })
        .collect();
    let per: Vec<(String, Result<f64>)> =
        cases.par_iter().map(|(label, shape, alpha, r0)| (label.clone(), hardy_poincare_ratio(|r| shape.eval(r), *alpha, *r0, dim, radial_nodes))).collect();
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (label, r) in per {
        match r {
            Ok(x) if x.is_finite() => worst = worst.max(x),
            Ok(x) => failures.push(format!("{label}: ratio {x}")),
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    }
    (worst, cases.len(), failures)
}

impl InequalityCheck for HardyPoincare {
    fn name(&self) -> &'static str {
        "hardy-poincare"
    }

    fn description(&self) -> &'static str {
        "exterior Hardy-Poincaré ratio for radial profiles"
    }

    fn default_samples(&self) -> usize {
        36
    }

    fn run(&self, _s: &CheckSettings, ctx: &Context) -> Result<CheckOutcome> {
        let (c, samples, failures) = hardy_constant(&ctx.dim, ctx.quad.spec().radial_nodes);
        Ok(CheckOutcome { check: self.name().into(), samples, violations: failures.len(), worst_margin: c, constants: constants([("c", c)]), failures })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridSpec;

    fn ctx(n: usize, p: f64) -> Context {
        let dim = Dimension::new(n, p).unwrap();
        Context::new(dim, GridSpec::sized_for(&dim, 512, 16)).unwrap()
    }

    #[test]
    fn registry_resolves_every_name() {
        for name in CHECKS {
            assert_eq!(inequality_check(name).unwrap().name(), name);
        }
        assert!(inequality_check("nope").is_err());
    }

    #[test]
    fn pointwise_checks_pass_on_small_budgets() {
        let s = CheckSettings { samples: Some(20_000), ..CheckSettings::default() };
        for (name, p) in [("pointwise-lower", 1.5), ("pointwise-upper", 1.5), ("interpolation", 1.2)] {
            let out = inequality_check(name).unwrap().run(&s, &ctx(3, p)).unwrap();
            assert!(out.passed(), "{name}: {out:?}");
            assert_eq!(out.samples, 20_000);
        }
    }

    #[test]
    fn interpolation_uses_balanced_zeta() {
        let c = ctx(3, 1.2);
        let s = CheckSettings { samples: Some(10_000), eps0: 0.3, ..CheckSettings::default() };
        let out = Interpolation.run(&s, &c).unwrap();
        assert!((out.constants["zeta_pow_p"] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn orlicz_check_needs_low_exponent() {
        let s = CheckSettings { samples: Some(3), ..CheckSettings::default() };
        assert!(OrliczPoincare.run(&s, &ctx(3, 2.0)).is_err());
        assert!(OrliczPoincare.run(&s, &ctx(5, 1.2)).unwrap().passed());
    }

    #[test]
    fn hardy_scan_is_finite() {
        let dim = Dimension::new(3, 1.5).unwrap();
        let (c, count, failures) = hardy_constant(&dim, 1024);
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(count, 36);
        assert!(c.is_finite() && c > 0.0);
    }
}
