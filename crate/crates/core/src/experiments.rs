//! Sharpness families and the stability-ratio scan.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::{Bubble, Dimension};
use crate::context::Context;
use crate::corpus::{gradient_norm, normalize_gradient, CorpusEntry};
use crate::deficit::deficit;
use crate::error::{invalid, LabError, Result};
use crate::kernels::search::chunk_rng;
use crate::optim::{fit_line, LineFit};
use crate::projection::{GradientDistanceProjector, ProjectionOptions, ProjectionResult, Projector};
use crate::quadrature::{combine, BubbleField, FarBump, FieldRef, StretchedBubble};

/// Largest admissible `v(x_far) / min(eps)`.
pub const SEPARATION_LIMIT: f64 = 0.1;

/// Target `v(x_far) / min(eps)` when the bump position is chosen automatically.
pub const AUTO_SEPARATION: f64 = 1e-3;

/// Deficits below this are treated as quadrature noise rather than violations.
pub const DEFICIT_FLOOR: f64 = -1e-7;

/// One member of a family.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyPoint {
    pub param: f64,
    pub deficit: f64,
    /// `||D(u - v)||_p / ||Du||_p` for the projected bubble `v`.
    pub distance: f64,
    /// `delta / distance^{max(2,p)}`.
    pub ratio: f64,
    /// Family-specific distance estimate, when one exists.
    pub distance_proxy: Option<f64>,
}

/// Log-log fits of deficit and distance against the family parameter.
#[derive(Clone, Debug, Serialize)]
pub struct SlopeFit {
    pub family: String,
    pub parameter: String,
    pub points: Vec<FamilyPoint>,
    pub deficit_fit: LineFit,
    pub distance_fit: LineFit,
    pub min_deficit: f64,
    /// Bump position, for the bump family.
    pub x_far: Option<f64>,
}

impl SlopeFit {
    fn from_points(family: &str, parameter: &str, points: Vec<FamilyPoint>, x_far: Option<f64>) -> Result<Self> {
        let lx: Vec<f64> = points.iter().map(|p| p.param.ln()).collect();
        for p in &points {
            if !(p.deficit > 0.0 && p.distance > 0.0) {
                return Err(LabError::Invalid(format!("{family} member {} has deficit {:e} and distance {:e}; cannot fit", p.param, p.deficit, p.distance)));
            }
        }
        let ld: Vec<f64> = points.iter().map(|p| p.deficit.ln()).collect();
        let lr: Vec<f64> = points.iter().map(|p| p.distance.ln()).collect();
        let min_deficit = points.iter().map(|p| p.deficit).fold(f64::INFINITY, f64::min);
        Ok(Self { family: family.into(), parameter: parameter.into(), deficit_fit: fit_line(&lx, &ld), distance_fit: fit_line(&lx, &lr), points, min_deficit, x_far })
    }
}

/// Parameters shared by the families; each reads the ones it needs.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyParams {
    pub i_list: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub x_far: Option<f64>,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self { i_list: vec![4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0], eps_list: log_spaced(1e-1, 1e-4, 10), x_far: None }
    }
}

/// `count` points from `from` to `to`, equally spaced in logarithm.
pub fn log_spaced(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![from];
    }
    let (a, b) = (from.ln(), to.ln());
    (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
}

fn check_span(values: &[f64], what: &str) -> Result<()> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.len() < 5 || !(lo > 0.0) || (hi / lo).log10() < 1.5 {
        return invalid(format!("{what} needs at least 5 positive values spanning 1.5 decades"));
    }
    Ok(())
}

/// A construction approaching the bubble manifold at a known rate.
pub trait SharpnessFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn run(&self, params: &FamilyParams, ctx: &Context) -> Result<SlopeFit>;
}

/// `v(A_i x)` with `A_i = diag(1, ..., 1, 1 + 1/i)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnisotropicFamily;

/// `v + eps phi(x - x_far e_n)` with `phi` a unit bump.
#[derive(Clone, Copy, Debug, Default)]
pub struct BumpFamily;

/// Names accepted by [`sharpness_family`].
pub const FAMILIES: [&str; 2] = ["anisotropic", "bump"];

pub fn sharpness_family(name: &str) -> Result<Box<dyn SharpnessFamily>> {
    match name {
        "anisotropic" => Ok(Box::new(AnisotropicFamily)),
        "bump" => Ok(Box::new(BumpFamily)),
        other => invalid(format!("unknown family '{other}', expected one of {}", FAMILIES.join(", "))),
    }
}

impl SharpnessFamily for AnisotropicFamily {
    fn name(&self) -> &'static str {
        "anisotropic"
    }

    fn run(&self, params: &FamilyParams, ctx: &Context) -> Result<SlopeFit> {
        anisotropic_family(&params.i_list, ctx)
    }
}

impl SharpnessFamily for BumpFamily {
    fn name(&self) -> &'static str {
        "bump"
    }

    fn run(&self, params: &FamilyParams, ctx: &Context) -> Result<SlopeFit> {
        bump_family(&params.eps_list, params.x_far, ctx)
    }
}

/// `max(2, p)`.
pub fn stability_exponent(dim: &Dimension) -> f64 {
    dim.p().max(2.0)
}

/// Projects `u` onto the bubble manifold by gradient distance, polishing
/// from `init` and falling back to a full search when polishing stalls.
pub fn project_near(u: &FieldRef, init: Bubble, ctx: &Context) -> Result<ProjectionResult> {
    let pr = GradientDistanceProjector;
    let polished = pr.project(u, ctx, Some(init), &ProjectionOptions::polish_only())?;
    if polished.converged {
        return Ok(polished);
    }
    pr.project(u, ctx, Some(init), &ProjectionOptions::default())
}

/// Deficit and projected distance of the stretched bubbles for each `i`.
pub fn anisotropic_family(i_list: &[f64], ctx: &Context) -> Result<SlopeFit> {
    check_span(i_list, "i_list")?;
    if let Some(bad) = i_list.iter().find(|i| !(**i >= 4.0 && **i <= 256.0)) {
        return invalid(format!("i must lie in [4, 256], got {bad}"));
    }
    let alpha = stability_exponent(&ctx.dim);
    let points = i_list
        .par_iter()
        .map(|&i| {
            let u = StretchedBubble::shared(Bubble::unit(), ctx.dim, 1.0 + 1.0 / i);
            let d = deficit(&u, ctx)?.deficit;
            let proj = project_near(&u, Bubble::unit(), ctx)?;
            Ok(FamilyPoint { param: i, deficit: d, distance: proj.distance, ratio: d / proj.distance.powf(alpha), distance_proxy: None })
        })
        .collect::<Result<Vec<_>>>()?;
    SlopeFit::from_points("anisotropic", "i", points, None)
}

/// The axial distance where the unit bubble first drops to `level`.
pub fn bubble_level_distance(dim: &Dimension, level: f64) -> Result<f64> {
    let v = Bubble::unit();
    if !(level > 0.0 && level < 1.0) {
        return invalid(format!("level must lie in (0,1), got {level}"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while v.value_at_distance(dim, hi) > level {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return invalid("bubble never reaches the requested level");
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v.value_at_distance(dim, mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Deficit, projected distance and the splitting proxy of `v + eps phi` for
/// each `eps`, with `phi` a unit-radius bump centered at `x_far` on the axis.
pub fn bump_family(eps_list: &[f64], x_far: Option<f64>, ctx: &Context) -> Result<SlopeFit> {
    check_span(eps_list, "eps_list")?;
    if let Some(bad) = eps_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return invalid(format!("eps must lie in (0,1), got {bad}"));
    }
    let dim = ctx.dim;
    let eps_min = eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let x_far = match x_far {
        Some(x) => x,
        None => 1.0 + bubble_level_distance(&dim, AUTO_SEPARATION * eps_min)?,
    };
    let v_far = Bubble::unit().value_at_distance(&dim, x_far);
    let limit = SEPARATION_LIMIT * eps_min;
    if !(v_far < limit) {
        return Err(LabError::ConditionViolated { v_far, limit });
    }
    let alpha = stability_exponent(&dim);
    let vf = BubbleField::shared(Bubble::unit(), dim);
    let bump = FarBump::shared(x_far, 1.0, 1.0);
    let bump_norm = gradient_norm(&bump, ctx)?;
    let points = eps_list
        .par_iter()
        .map(|&eps| {
            let u = combine(1.0, &vf, eps, &bump);
            let rep = deficit(&u, ctx)?;
            let proj = project_near(&u, Bubble::unit(), ctx)?;
            Ok(FamilyPoint {
                param: eps,
                deficit: rep.deficit,
                distance: proj.distance,
                ratio: rep.deficit / proj.distance.powf(alpha),
                distance_proxy: Some(eps * bump_norm / rep.grad_norm),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SlopeFit::from_points("bump", "eps", points, Some(x_far))
}

/// One sample of the stability-ratio scan.
#[derive(Clone, Debug, Serialize)]
pub struct RatioSample {
    /// Position of the field in the scanned list.
    pub index: usize,
    pub label: String,
    pub eps: f64,
    pub deficit: f64,
    pub distance: f64,
    pub ratio: f64,
    /// The projected bubble.
    pub bubble: Bubble,
}

/// Distribution of `delta / dist^{max(2,p)}` over a corpus.
#[derive(Clone, Debug, Serialize)]
pub struct RatioScan {
    pub exponent: f64,
    pub samples: Vec<RatioSample>,
    /// Labels and messages of samples whose projection or quadrature failed.
    pub failures: Vec<(String, String)>,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    /// Index into `samples` of the minimizer.
    pub argmin: usize,
}

/// Amplitude range of the scan perturbations.
pub const SCAN_EPS: (f64, f64) = (1e-3, 1e-1);

/// `u = v + eps phi` for each corpus entry, with `||D phi||_p = 1` and `eps`
/// log-uniform in [`SCAN_EPS`], deterministic in `seed`.
pub fn scan_fields(corpus: &[CorpusEntry], seed: u64, ctx: &Context) -> Result<Vec<(String, f64, FieldRef)>> {
    let vf = BubbleField::shared(Bubble::unit(), ctx.dim);
    corpus
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let mut rng = chunk_rng(seed ^ 0x5ca1_ab1e, i as u64);
            let eps = (rng.gen_range(SCAN_EPS.0.ln()..SCAN_EPS.1.ln())).exp();
            let (phi, _) = normalize_gradient(&entry.field, ctx)?;
            Ok((entry.label.clone(), eps, combine(1.0, &vf, eps, &phi)))
        })
        .collect()
}

/// Deficit over projected distance to the power `max(2,p)` for every field.
pub fn stability_ratio_scan(fields: &[(String, f64, FieldRef)], ctx: &Context) -> Result<RatioScan> {
    stability_ratio_scan_from(fields, &vec![Bubble::unit(); fields.len()], ctx)
}

/// The ratio scan with projections started from `starts[i]` for field `i`.
pub fn stability_ratio_scan_from(fields: &[(String, f64, FieldRef)], starts: &[Bubble], ctx: &Context) -> Result<RatioScan> {
    if starts.len() != fields.len() {
        return invalid(format!("{} starting bubbles for {} fields", starts.len(), fields.len()));
    }
    let alpha = stability_exponent(&ctx.dim);
    let results: Vec<std::result::Result<RatioSample, (String, String)>> = fields
        .par_iter()
        .zip(starts)
        .enumerate()
        .map(|(index, ((label, eps, u), start))| {
            let run = || -> Result<RatioSample> {
                let d = deficit(u, ctx)?.deficit;
                let proj = project_near(u, *start, ctx)?;
                Ok(RatioSample { index, label: label.clone(), eps: *eps, deficit: d, distance: proj.distance, ratio: d / proj.distance.powf(alpha), bubble: proj.bubble })
            };
            run().map_err(|e| (label.clone(), e.to_string()))
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(f) => failures.push(f),
        }
    }
    if samples.is_empty() {
        return invalid("every scan sample failed");
    }
    let mut sorted: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    sorted.sort_by(f64::total_cmp);
    let argmin = samples.iter().enumerate().min_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio)).map(|(i, _)| i).unwrap_or(0);
    Ok(RatioScan { exponent: alpha, min_ratio: sorted[0], median_ratio: sorted[sorted.len() / 2], max_ratio: sorted[sorted.len() - 1], argmin, samples, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::random_corpus;
    use crate::quadrature::GridSpec;

    fn ctx(n: usize, p: f64, nodes: usize, angular: usize) -> Context {
        let dim = Dimension::new(n, p).unwrap();
        Context::new(dim, GridSpec::sized_for(&dim, nodes, angular)).unwrap()
    }

    #[test]
    fn anisotropic_rates() {
        let c = ctx(3, 2.0, 1024, 32);
        let fit = anisotropic_family(&FamilyParams::default().i_list, &c).unwrap();
        assert!((fit.deficit_fit.slope + 2.0).abs() < 0.1, "{:?}", fit.deficit_fit);
        assert!((fit.distance_fit.slope + 1.0).abs() < 0.1, "{:?}", fit.distance_fit);
        assert!(fit.deficit_fit.residual < 0.05);
        assert!(fit.points.last().unwrap().deficit < fit.points[0].deficit);
        let scaled: Vec<f64> = fit.points.iter().map(|p| p.distance * p.param).collect();
        let last = scaled.len() - 1;
        assert!((scaled[last] - scaled[last - 1]).abs() < (scaled[1] - scaled[0]).abs());
    }

    #[test]
    fn bump_rates_and_condition() {
        let c = ctx(3, 2.5, 1024, 16);
        let eps = log_spaced(1e-1, 1e-3, 6);
        let fit = bump_family(&eps, None, &c).unwrap();
        assert!((fit.deficit_fit.slope - 2.5).abs() < 0.1, "{:?}", fit.deficit_fit);
        for p in &fit.points {
            let proxy = p.distance_proxy.unwrap();
            assert!((p.distance - proxy).abs() < 1e-3 * proxy, "{} vs {proxy}", p.distance);
        }
        assert!(matches!(bump_family(&eps, Some(3.0), &c), Err(LabError::ConditionViolated { .. })));
    }

    #[test]
    fn bubble_has_no_deficit_in_the_bump_limit() {
        let c = ctx(3, 2.5, 512, 8);
        let vf = BubbleField::shared(Bubble::unit(), c.dim);
        let bump = FarBump::shared(1e6, 1.0, 1.0);
        assert!(deficit(&combine(1.0, &vf, 0.0, &bump), &c).unwrap().deficit.abs() < 1e-10);
    }

    #[test]
    fn ratio_scan_is_positive() {
        let c = ctx(3, 1.5, 512, 12);
        let corpus = random_corpus(&c.dim, 6, 11);
        let fields = scan_fields(&corpus, 11, &c).unwrap();
        let scan = stability_ratio_scan(&fields, &c).unwrap();
        assert!(scan.failures.is_empty(), "{:?}", scan.failures);
        assert!(scan.min_ratio > 0.0);
        assert!(scan.samples.iter().all(|s| s.deficit > DEFICIT_FLOOR));
        let starts: Vec<Bubble> = scan.samples.iter().map(|s| s.bubble).collect();
        let again = stability_ratio_scan_from(&fields, &starts, &c).unwrap();
        for (a, b) in scan.samples.iter().zip(&again.samples) {
            assert!((a.distance - b.distance).abs() < 1e-6 * a.distance, "{} vs {}", a.distance, b.distance);
        }
        assert!(stability_ratio_scan_from(&fields, &starts[1..], &c).is_err());
    }

    #[test]
    fn registry_lookup() {
        for name in FAMILIES {
            assert_eq!(sharpness_family(name).unwrap().name(), name);
        }
        assert!(sharpness_family("nope").is_err());
        assert!(log_spaced(1e-1, 1e-3, 3).iter().zip([1e-1, 1e-2, 1e-3]).all(|(a, b)| (a - b).abs() < 1e-15));
    }
}
