//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::io::Write;
use std::path::Path;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sobolev_lab::checks::{embedding_constants, hardy_constant, inequality_check, orlicz_constant, CheckSettings};
use sobolev_lab::context::Context;
use sobolev_lab::corpus::{random_corpus, standard_corpus};
use sobolev_lab::deficit::{deficit, expansion_ledger, ChainConstants, PerturbedBubble};
use sobolev_lab::experiments::{anisotropic_family, bump_family, scan_fields, stability_exponent, stability_ratio_scan, stability_ratio_scan_from, FamilyParams};
use sobolev_lab::kernels::{
    search_c0, search_c1, search_interpolation, verify_interpolation, verify_lower_bound, verify_upper_expansion, InterpolationBox, InterpolationConstants,
};
use sobolev_lab::quadrature::{BubbleField, GridSpec};
use sobolev_lab::spectrum::{assemble_sector, solve_sector, spectral_gap, spectral_grid};
use sobolev_lab::{Bubble, Dimension};

const PAIRS: [(usize, f64); 4] = [(3, 1.5), (3, 2.0), (4, 2.5), (5, 1.2)];

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!("acceptance {id:>2} {name}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

fn dim(n: usize, p: f64) -> Dimension {
    Dimension::new(n, p).unwrap()
}

fn ctx(n: usize, p: f64, radial: usize, angular: usize) -> Context {
    let d = dim(n, p);
    Context::new(d, GridSpec::sized_for(&d, radial, angular)).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Sharp Sobolev constant from its Gamma-function closed form.
fn talenti(n: usize, p: f64) -> f64 {
    use statrs::function::gamma::gamma;
    let n = n as f64;
    let k = std::f64::consts::PI.powf(-0.5)
        * n.powf(-1.0 / p)
        * ((p - 1.0) / (n - p)).powf(1.0 - 1.0 / p)
        * (gamma(1.0 + n / 2.0) * gamma(n) / (gamma(n / p) * gamma(1.0 + n - n / p))).powf(1.0 / n);
    1.0 / k
}

#[test]
fn bubbles_have_zero_deficit() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for &(n, p) in &PAIRS {
        let c = ctx(n, p, 2048, 16);
        for _ in 0..10 {
            let a = 10f64.powf(rng.gen_range(-0.7..0.7));
            let b = 10f64.powf(rng.gen_range(-1.0..1.0));
            let x0 = rng.gen_range(-2.0..2.0);
            let d = deficit(&BubbleField::shared(Bubble::new(a, b, x0).unwrap(), c.dim), &c).unwrap().deficit;
            worst = worst.max(d.abs());
        }
    }
    report(1, "extremality", worst < 1e-7, &format!("max |deficit| {worst:.2e} over 40 bubbles"));
}

#[test]
fn pointwise_lower_bound_holds_with_searched_constant() {
    let mut ok = true;
    let mut notes = Vec::new();
    for &p in &[1.2, 1.5, 2.0, 2.5, 3.0] {
        for &kappa in &[0.1, 0.5] {
            let c0 = search_c0(p, kappa, 200_000, 7).unwrap().estimate;
            let v = verify_lower_bound(p, kappa, c0, 1_000_000, 8, 1e-10);
            ok &= c0 > 0.0 && v.violations == 0 && v.samples == 1_000_000;
            if p == 2.0 {
                ok &= rel(c0, kappa) < 0.05;
                notes.push(format!("p=2 kappa={kappa}: c0={c0:.4}"));
            }
            if v.violations > 0 {
                notes.push(format!("p={p} kappa={kappa}: {} violations", v.violations));
            }
        }
    }
    report(2, "vector inequality suite", ok, &notes.join("; "));
}

#[test]
fn upper_expansion_and_interpolation_hold_with_searched_constants() {
    let mut ok = true;
    let mut notes = Vec::new();
    for &(n, p) in &PAIRS {
        let d = dim(n, p);
        for &kappa in &[0.1, 0.5] {
            let c1 = search_c1(&d, kappa).unwrap().c1;
            let v = verify_upper_expansion(&d, kappa, c1, 1_000_000, 21, 1e-10);
            ok &= v.violations == 0 && v.samples == 1_000_000;
            if v.violations > 0 {
                notes.push(format!("({n},{p}) kappa={kappa}: {} upper-expansion violations", v.violations));
            }
        }
    }
    let eps0 = 0.1;
    for &(n, p) in &[(5usize, 1.2f64), (3, 1.2)] {
        let d = dim(n, p);
        let region = InterpolationBox::default();
        let c = search_interpolation(&d, eps0, 200_000, 5, &region).unwrap().estimate;
        let k = InterpolationConstants::balanced(&d, eps0, c);
        ok &= rel(k.zeta.powf(p), eps0 / 3.0) < 1e-12;
        let v = verify_interpolation(&d, &k, 1_000_000, 6, &region, 1e-10).unwrap();
        ok &= v.violations == 0 && v.samples == 1_000_000;
        notes.push(format!("({n},{p}) C={c:.4e} violations={} excluded={}", v.violations, v.excluded));
    }
    report(3, "upper expansion and interpolation suites", ok, &notes.join("; "));
}

#[test]
fn spectrum_recovers_known_modes_and_positive_gap() {
    let mut ok = true;
    let mut notes = Vec::new();
    for &(n, p) in &PAIRS {
        let d = dim(n, p);
        let c = talenti(n, p).powf(p);
        let ps = d.p_star();
        let grid = spectral_grid(&d, 2048).unwrap();
        let radial = solve_sector(&assemble_sector(0, &d, &grid).unwrap(), 2).unwrap();
        let shift = solve_sector(&assemble_sector(1, &d, &grid).unwrap(), 1).unwrap();
        let errs = [rel(radial.eigenvalues[0], (p - 1.0) * c), rel(radial.eigenvalues[1], (ps - 1.0) * c), rel(shift.eigenvalues[0], (ps - 1.0) * c)];
        let worst = errs.iter().copied().fold(0.0, f64::max);
        let l1 = spectral_gap(&d, &grid).unwrap().lambda;
        let l2 = spectral_gap(&d, &spectral_grid(&d, 4096).unwrap()).unwrap().lambda;
        ok &= worst < 1e-3 && l1 > 0.0 && rel(l2, l1) < 1e-3;
        notes.push(format!("({n},{p}) mode err {worst:.1e} lambda {l1:.4e} drift {:.1e}", rel(l2, l1)));
    }
    report(4, "spectrum", ok, &notes.join("; "));
}

#[test]
fn perturbed_gap_inequalities_hold_on_corpus() {
    let mut ok = true;
    let mut notes = Vec::new();
    let check = inequality_check("perturbed-gap").unwrap();
    for &(n, p) in &PAIRS {
        let c = ctx(n, p, 1024, 32);
        let out = check.run(&CheckSettings { samples: Some(50), seed: 3, ..CheckSettings::default() }, &c).unwrap();
        ok &= out.violations == 0 && out.samples == 100;
        notes.push(format!("({n},{p}) {} violations / {}", out.violations, out.samples));
    }
    report(5, "perturbed gap scans", ok, &notes.join("; "));
}

fn drift(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn weighted_inequality_constants_are_grid_stable() {
    let mut ok = true;
    let mut notes = Vec::new();
    for &(n, p) in &PAIRS {
        let coarse = ctx(n, p, 1024, 32);
        let fine = coarse.refined().unwrap();
        let a = embedding_constants(20, 4, &coarse);
        let b = embedding_constants(20, 4, &fine);
        let worst = [drift(a.whole, b.whole), drift(a.small_ball, b.small_ball), drift(a.large_ball, b.large_ball)].into_iter().fold(0.0, f64::max);
        let finite = [a.whole, a.small_ball, a.large_ball, b.whole, b.small_ball, b.large_ball].iter().all(|x| x.is_finite() && *x > 0.0);
        ok &= a.failures.is_empty() && b.failures.is_empty() && finite && worst < 0.1 && a.theta > 0.0 && b.theta > 0.0;
        let (h1, _, f1) = hardy_constant(&coarse.dim, 2048);
        let (h2, _, f2) = hardy_constant(&coarse.dim, 4096);
        ok &= f1.is_empty() && f2.is_empty() && h1.is_finite() && drift(h1, h2) < 0.1;
        notes.push(format!("({n},{p}) embedding drift {worst:.1e} theta {:.3} hardy drift {:.1e}", a.theta.min(b.theta), drift(h1, h2)));
        if coarse.dim.p() <= 2.0 * n as f64 / (n as f64 + 2.0) {
            let (o1, g1) = orlicz_constant(20, 4, &coarse).unwrap();
            let (o2, g2) = orlicz_constant(20, 4, &fine).unwrap();
            ok &= g1.is_empty() && g2.is_empty() && o1.is_finite() && drift(o1, o2) < 0.1;
            notes.push(format!("({n},{p}) orlicz drift {:.1e}", drift(o1, o2)));
        }
    }
    report(6, "weighted inequality ratios", ok, &notes.join("; "));
}

#[test]
fn sharpness_families_show_the_expected_rates() {
    let mut ok = true;
    let mut notes = Vec::new();
    let params = FamilyParams::default();
    for &(n, p) in &[(3usize, 2.0f64), (3, 1.5)] {
        let fit = anisotropic_family(&params.i_list, &ctx(n, p, 1024, 32)).unwrap();
        ok &= (fit.deficit_fit.slope + 2.0).abs() < 0.1;
        notes.push(format!("anisotropic ({n},{p}) slope {:.3}", fit.deficit_fit.slope));
    }
    for &(n, p) in &[(3usize, 2.0f64), (3, 2.5)] {
        let c = ctx(n, p, 1024, 16);
        let fit = bump_family(&params.eps_list, None, &c).unwrap();
        ok &= (fit.deficit_fit.slope - p).abs() < 0.1;
        let weakened = stability_exponent(&c.dim) - 0.5;
        let mut pts = fit.points.clone();
        pts.sort_by(|a, b| b.param.total_cmp(&a.param));
        let ratios: Vec<f64> = pts.iter().map(|q| q.deficit / q.distance.powf(weakened)).collect();
        let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
        let drop = ratios[0] / ratios[ratios.len() - 1];
        ok &= monotone && drop >= 10.0;
        notes.push(format!("bump ({n},{p}) slope {:.3}, weakened-exponent ratio drop {drop:.1}x monotone={monotone}", fit.deficit_fit.slope));
    }
    report(7, "sharpness rates", ok, &notes.join("; "));
}

#[test]
fn stability_ratio_is_positive_and_grid_stable() {
    let mut ok = true;
    let mut notes = Vec::new();
    for &(n, p) in &[(3usize, 1.5f64), (3, 2.0), (4, 3.0)] {
        let coarse = ctx(n, p, 1024, 16);
        let fine = coarse.doubled().unwrap();
        let corpus = random_corpus(&coarse.dim, 200, 17);
        let a = stability_ratio_scan(&scan_fields(&corpus, 17, &coarse).unwrap(), &coarse).unwrap();
        let mut starts = vec![Bubble::unit(); corpus.len()];
        for s in &a.samples {
            starts[s.index] = s.bubble;
        }
        let b = stability_ratio_scan_from(&scan_fields(&corpus, 17, &fine).unwrap(), &starts, &fine).unwrap();
        let d = drift(a.min_ratio, b.min_ratio);
        ok &= a.failures.is_empty() && b.failures.is_empty() && a.samples.len() == 200 && a.min_ratio > 0.0 && b.min_ratio > 0.0 && d < 0.2;
        notes.push(format!("({n},{p}) min ratio {:.4e} / {:.4e} drift {d:.1e} failures {}+{}", a.min_ratio, b.min_ratio, a.failures.len(), b.failures.len()));
    }
    report(8, "stability ratio", ok, &notes.join("; "));
}

fn run_suite(dir: &Path, threads: &str) {
    let exe = env!("CARGO_BIN_EXE_sobolev-lab");
    let out = dir.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec!["deficit", "--n", "3", "--p", "2", "--field", "bubble-annulus", "--grid-N", "512", "--grid-M", "16"],
        vec!["project", "--n", "3", "--p", "1.5", "--field", "stretched", "--projector", "fu", "--grid-N", "512", "--grid-M", "16"],
        vec!["spectrum", "--n", "4", "--p", "2.5", "--k", "2", "--grid-N", "1024", "--grid-M", "8", "--dump-eigenvectors"],
        vec!["inequality-scan", "--n", "3", "--p", "1.5", "--check", "pointwise-lower", "--samples", "20000"],
        vec!["inequality-scan", "--n", "5", "--p", "1.2", "--check", "perturbed-gap", "--samples", "4", "--grid-N", "512", "--grid-M", "16"],
        vec!["sharpness", "--n", "3", "--p", "2", "--family", "bump", "--eps-list", "1e-1,3e-2,1e-2,3e-3,1e-3", "--grid-N", "512", "--grid-M", "16"],
        vec!["ratio-scan", "--n", "3", "--p", "2", "--samples", "8", "--grid-N", "512", "--grid-M", "16"],
        vec!["selftest", "--n", "3", "--p", "2"],
    ];
    for args in runs {
        let status = Command::new(exe).args(&args).args(["--seed", "11", "--out", out]).env("SOBOLEV_LAB_THREADS", threads).output().unwrap();
        assert!(status.status.success(), "{args:?}: {}", String::from_utf8_lossy(&status.stderr));
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let shared = tmp.path().join("run");
    run_suite(&shared, "1");
    std::fs::rename(&shared, a.path().join("run")).unwrap();
    run_suite(&shared, "3");
    std::fs::rename(&shared, b.path().join("run")).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(a.path().join("run")).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let jsons = names.iter().filter(|n| n.ends_with(".json")).count();
    let differing: Vec<&String> =
        names.iter().filter(|n| std::fs::read(a.path().join("run").join(n)).unwrap() != std::fs::read(b.path().join("run").join(n)).ok().unwrap_or_default()).collect();
    report(9, "determinism", jsons == 8 && differing.is_empty(), &format!("{} artifacts ({jsons} JSON), differing: {differing:?}", names.len()));
}

#[test]
fn sobolev_constant_and_first_order_identity_match_oracles() {
    let mut worst_s = 0.0f64;
    for &(n, p) in PAIRS.iter().chain(&[(4usize, 3.0f64), (6, 4.0), (2, 1.3)]) {
        let c = Context::default_for(dim(n, p)).unwrap();
        worst_s = worst_s.max(rel(c.sobolev, talenti(n, p)));
    }
    let mut worst_el = 0.0f64;
    let mut count = 0;
    for &(n, p) in &PAIRS {
        let c = ctx(n, p, 1024, 24);
        let k = ChainConstants { kappa: 0.5, c0: 0.0, c1: 1.0 };
        for e in standard_corpus(&c.dim) {
            let pb = PerturbedBubble::new(Bubble::unit(), 1e-2, &e.field, &c).unwrap();
            worst_el = worst_el.max(expansion_ledger(&pb, k, &c).unwrap().identity.relative_error);
            count += 1;
        }
    }
    report(
        10,
        "cross-check oracles",
        worst_s < 1e-6 && worst_el < 1e-6,
        &format!("Sobolev constant rel err {worst_s:.1e}; first-order identity rel err {worst_el:.1e} over {count} fields"),
    );
}
