//! Command-line front end.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};
use serde::Serialize;

use crate::bubble::Dimension;
use crate::checks::{inequality_check, CheckSettings};
use crate::context::Context;
use crate::corpus::{builtin_field, random_corpus, BUILTIN_FIELDS};
use crate::deficit::deficit;
use crate::error::{invalid, LabError, Result};
use crate::experiments::{scan_fields, sharpness_family, stability_ratio_scan, FamilyParams};
use crate::projection::{projector, ProjectionOptions};
use crate::quadrature::{FieldRef, GriddedField};
use crate::selftest::{run_selftest, DEFAULT_PAIRS};
use crate::spectrum::{assemble_sector, check_sectors, eigenvector_field, solve_sector, spectral_gap, spectral_grid, SectorEigenResult};

use config::{Options, RunConfig};
use report::{write_csv, write_json, Cell};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "SOBOLEV_LAB_THREADS";

/// Default corpus size of the ratio scan.
pub const RATIO_SCAN_SAMPLES: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "sobolev-lab", version, about = "Numerical laboratory for quantitative stability of the p-Sobolev inequality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sobolev deficit of a field.
    Deficit(Options),
    /// Nearest bubble to a field.
    Project(Options),
    /// Sector eigenvalues of the linearized operator and the spectral gap.
    Spectrum(Options),
    /// Sampled check of one inequality with empirical constants.
    InequalityScan(Options),
    /// Deficit and distance rates along a sharpness family.
    Sharpness(Options),
    /// Deficit over distance to the stability exponent across a corpus.
    RatioScan(Options),
    /// Quadrature moments and known eigenpairs.
    Selftest(Options),
}

impl Command {
    fn split(self) -> (&'static str, Options) {
        match self {
            Command::Deficit(o) => ("deficit", o),
            Command::Project(o) => ("project", o),
            Command::Spectrum(o) => ("spectrum", o),
            Command::InequalityScan(o) => ("inequality-scan", o),
            Command::Sharpness(o) => ("sharpness", o),
            Command::RatioScan(o) => ("ratio-scan", o),
            Command::Selftest(o) => ("selftest", o),
        }
    }
}

/// What a command produced: the summary line and whether it passed.
struct Outcome {
    summary: String,
    passed: bool,
}

fn usage() -> String {
    Cli::command().render_usage().to_string()
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on invalid input, 2 on numerical failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (command, options) = cli.command.split();
    match execute(command, options) {
        Ok(out) => {
            println!("{}", out.summary);
            if out.passed {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 1 {
                eprintln!("{}", usage());
            }
            e.exit_code()
        }
    }
}

fn thread_pool(limit: Option<&str>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(v) = limit {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| LabError::Invalid(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| LabError::Invalid(format!("cannot start worker pool: {e}")))
}

fn execute(command: &str, options: Options) -> Result<Outcome> {
    let options = options.resolve_file()?;
    let cfg = RunConfig::resolve(command, options, command == "selftest")?;
    thread_pool(std::env::var(THREADS_VAR).ok().as_deref())?.install(|| match command {
        "deficit" => run_deficit(&cfg),
        "project" => run_project(&cfg),
        "spectrum" => run_spectrum(&cfg),
        "inequality-scan" => run_inequality_scan(&cfg),
        "sharpness" => run_sharpness(&cfg),
        "ratio-scan" => run_ratio_scan(&cfg),
        "selftest" => run_selftest_command(&cfg),
        other => invalid(format!("unknown command '{other}'")),
    })
}

fn context(cfg: &RunConfig) -> Result<Context> {
    let spec = cfg.grid_spec().ok_or_else(|| LabError::Invalid(format!("{} needs both --n and --p", cfg.command)))?;
    Context::new(cfg.dimension()?, spec)
}

/// A built-in field on the configured grid, or a fixture on its own grid.
fn load_field(cfg: &RunConfig) -> Result<(FieldRef, Context)> {
    let dim = cfg.dimension()?;
    if BUILTIN_FIELDS.contains(&cfg.field.as_str()) {
        return Ok((builtin_field(&cfg.field, &dim)?, context(cfg)?));
    }
    let path = Path::new(&cfg.field);
    if !path.exists() {
        return invalid(format!("field '{}' is neither a built-in ({}) nor an existing file", cfg.field, BUILTIN_FIELDS.join(", ")));
    }
    let fixture = GriddedField::read_from(path)?;
    if fixture.dimension() != dim.n() {
        return Err(LabError::GridMismatch(format!("fixture is for n={}, run is for n={}", fixture.dimension(), dim.n())));
    }
    let ctx = Context::new(dim, fixture.spec().clone())?;
    Ok((fixture.shared(), ctx))
}

fn run_deficit(cfg: &RunConfig) -> Result<Outcome> {
    let (u, ctx) = load_field(cfg)?;
    let r = deficit(&u, &ctx)?;
    let path = write_json(&cfg.out, "deficit.json", cfg, Some(ctx.grid_summary()), &r)?;
    Ok(Outcome { summary: format!("deficit {:.6e} for {} -> {}", r.deficit, cfg.field, path.display()), passed: true })
}

fn run_project(cfg: &RunConfig) -> Result<Outcome> {
    let (u, ctx) = load_field(cfg)?;
    let r = projector(&cfg.projector)?.project(&u, &ctx, None, &ProjectionOptions::default())?;
    let path = write_json(&cfg.out, "project.json", cfg, Some(ctx.grid_summary()), &r)?;
    Ok(Outcome {
        summary: format!(
            "{} projection of {}: a={:.6e} b={:.6e} x0={:.6e} distance {:.6e} -> {}",
            r.method,
            cfg.field,
            r.bubble.a,
            r.bubble.b,
            r.bubble.x0,
            r.distance,
            path.display()
        ),
        passed: true,
    })
}

#[derive(Serialize)]
struct GapSummary {
    lambda: f64,
    mu_perp: f64,
    tangent_eigenvalue: f64,
    eigen_scale: f64,
}

#[derive(Serialize)]
struct SpectrumResult {
    s_min: f64,
    s_max: f64,
    radial_nodes: usize,
    sectors: Vec<SectorEigenResult>,
    gap: GapSummary,
    eigenvector_files: Vec<PathBuf>,
}

fn run_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    check_sectors(&cfg.sectors)?;
    let dim = cfg.dimension()?;
    let grid = spectral_grid(&dim, cfg.radial_nodes)?;
    let problems = cfg.sectors.iter().map(|&ell| assemble_sector(ell, &dim, &grid)).collect::<Result<Vec<_>>>()?;
    let sectors = problems.iter().map(|prob| solve_sector(prob, cfg.k)).collect::<Result<Vec<_>>>()?;
    let gap = spectral_gap(&dim, &grid)?;
    let mut eigenvector_files = Vec::new();
    if cfg.dump_eigenvectors {
        let ctx = context(cfg)?;
        std::fs::create_dir_all(&cfg.out)?;
        for (prob, res) in problems.iter().zip(&sectors) {
            for (j, f) in res.eigenvectors.iter().enumerate() {
                let path = cfg.out.join(format!("spectrum-l{}-k{j}.field", prob.ell));
                eigenvector_field(prob, f, &ctx.quad)?.write_to(&path)?;
                eigenvector_files.push(path);
            }
        }
    }
    let rows: Vec<Vec<Cell>> = sectors
        .iter()
        .flat_map(|s| s.eigenvalues.iter().zip(&s.residuals).enumerate().map(move |(j, (mu, res))| vec![Cell::Int(s.ell), Cell::Int(j), Cell::Num(*mu), Cell::Num(*res)]))
        .collect();
    write_csv(&cfg.out, "spectrum.csv", &["ell", "index", "eigenvalue", "residual"], &rows)?;
    let s = grid.log_nodes();
    let result = SpectrumResult {
        s_min: s[0],
        s_max: s[s.len() - 1],
        radial_nodes: grid.len(),
        sectors,
        gap: GapSummary { lambda: gap.lambda, mu_perp: gap.mu_perp, tangent_eigenvalue: gap.tangent_eigenvalue, eigen_scale: gap.eigen_scale },
        eigenvector_files,
    };
    let path = write_json(&cfg.out, "spectrum.json", cfg, None, &result)?;
    Ok(Outcome { summary: format!("spectral gap lambda {:.6e} (mu_perp {:.6e}) -> {}", result.gap.lambda, result.gap.mu_perp, path.display()), passed: true })
}

fn run_inequality_scan(cfg: &RunConfig) -> Result<Outcome> {
    let Some(name) = cfg.check.as_deref() else {
        return invalid(format!("inequality-scan needs --check, one of {}", crate::checks::CHECKS.join(", ")));
    };
    let check = inequality_check(name)?;
    let ctx = context(cfg)?;
    let settings = CheckSettings { kappa: cfg.kappa, eps0: cfg.eps0, samples: cfg.samples, seed: cfg.seed, tolerance: cfg.tolerance };
    let r = check.run(&settings, &ctx)?;
    let path = write_json(&cfg.out, &format!("inequality-scan-{name}.json"), cfg, Some(ctx.grid_summary()), &r)?;
    Ok(Outcome { summary: format!("{name}: {} violations in {} samples -> {}", r.violations, r.samples, path.display()), passed: r.passed() })
}

fn run_sharpness(cfg: &RunConfig) -> Result<Outcome> {
    let family = sharpness_family(&cfg.family)?;
    let ctx = context(cfg)?;
    let defaults = FamilyParams::default();
    let params = FamilyParams { i_list: cfg.i_list.clone().unwrap_or(defaults.i_list), eps_list: cfg.eps_list.clone().unwrap_or(defaults.eps_list), x_far: cfg.x_far };
    let fit = family.run(&params, &ctx)?;
    let rows: Vec<Vec<Cell>> = fit.points.iter().map(|p| vec![Cell::Num(p.param), Cell::Num(p.deficit), Cell::Num(p.distance), Cell::Num(p.ratio)]).collect();
    let name = format!("sharpness-{}", fit.family);
    write_csv(&cfg.out, &format!("{name}.csv"), &["param", "deficit", "distance", "ratio"], &rows)?;
    let path = write_json(&cfg.out, &format!("{name}.json"), cfg, Some(ctx.grid_summary()), &fit)?;
    Ok(Outcome {
        summary: format!(
            "{} family: deficit slope {:.4} (residual {:.2e}), distance slope {:.4} -> {}",
            fit.family,
            fit.deficit_fit.slope,
            fit.deficit_fit.residual,
            fit.distance_fit.slope,
            path.display()
        ),
        passed: true,
    })
}

fn run_ratio_scan(cfg: &RunConfig) -> Result<Outcome> {
    let ctx = context(cfg)?;
    let corpus = random_corpus(&ctx.dim, cfg.samples.unwrap_or(RATIO_SCAN_SAMPLES), cfg.seed);
    let scan = stability_ratio_scan(&scan_fields(&corpus, cfg.seed, &ctx)?, &ctx)?;
    let rows: Vec<Vec<Cell>> = scan.samples.iter().map(|s| vec![Cell::Num(s.eps), Cell::Num(s.deficit), Cell::Num(s.distance), Cell::Num(s.ratio)]).collect();
    write_csv(&cfg.out, "ratio-scan.csv", &["param", "deficit", "distance", "ratio"], &rows)?;
    let path = write_json(&cfg.out, "ratio-scan.json", cfg, Some(ctx.grid_summary()), &scan)?;
    let passed = scan.failures.is_empty() && scan.min_ratio > 0.0;
    Ok(Outcome {
        summary: format!(
            "ratio scan over {} fields ({} failed): min {:.6e}, median {:.6e} -> {}",
            scan.samples.len(),
            scan.failures.len(),
            scan.min_ratio,
            scan.median_ratio,
            path.display()
        ),
        passed,
    })
}

fn run_selftest_command(cfg: &RunConfig) -> Result<Outcome> {
    let pairs: Vec<(usize, f64)> = match (cfg.n, cfg.p) {
        (Some(n), Some(p)) => vec![(n, p)],
        _ => DEFAULT_PAIRS.to_vec(),
    };
    let contexts = pairs
        .iter()
        .map(|&(n, p)| {
            let dim = Dimension::new(n, p)?;
            Context::new(dim, crate::quadrature::GridSpec::sized_for(&dim, cfg.radial_nodes, cfg.angular_nodes))
        })
        .collect::<Result<Vec<_>>>()?;
    let checks = run_selftest(&contexts)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let path = write_json(&cfg.out, "selftest.json", cfg, None, &checks)?;
    Ok(Outcome { summary: format!("selftest: {} of {} checks passed -> {}", checks.len() - failed, checks.len(), path.display()), passed: failed == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Vec<String> {
        std::iter::once("sobolev-lab").chain(extra.iter().copied()).map(String::from).collect()
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(args(&["deficit", "--n", "3", "--bogus"])), 1);
        assert_eq!(run(args(&["frobnicate"])), 1);
        assert_eq!(run(args(&[])), 1);
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(args(&["deficit", "--n", "3", "--out", out])), 1);
        assert_eq!(run(args(&["deficit", "--n", "3", "--p", "3", "--out", out])), 1);
        assert_eq!(run(args(&["deficit", "--n", "3", "--p", "2", "--field", "nope", "--out", out])), 1);
        assert_eq!(run(args(&["inequality-scan", "--n", "3", "--p", "2", "--out", out])), 1);
    }

    #[test]
    fn deficit_of_bubble_is_zero_and_reports_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let a = args(&["deficit", "--n", "3", "--p", "2", "--field", "bubble", "--grid-N", "512", "--grid-M", "8", "--out", out]);
        assert_eq!(run(a.clone()), 0);
        let first = std::fs::read(dir.path().join("deficit.json")).unwrap();
        assert_eq!(run(a), 0);
        assert_eq!(first, std::fs::read(dir.path().join("deficit.json")).unwrap());
        let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
        assert!(v["result"]["deficit"].as_f64().unwrap().abs() < 1e-7);
        assert_eq!(v["config"]["n"], 3);
        assert_eq!(v["grid"]["radial_nodes"], 512);
        assert!(v["version"].as_str().unwrap().starts_with("sobolev-lab"));
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let conf = dir.path().join("run.conf");
        std::fs::write(&conf, format!("n = 3\np = 1.5\ngrid-N = 512\ngrid-M = 8\nout = {}\nfield = stretched\n", dir.path().display())).unwrap();
        assert_eq!(run(args(&["deficit", "--config", conf.to_str().unwrap(), "--p", "2"])), 0);
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("deficit.json")).unwrap()).unwrap();
        assert_eq!(v["config"]["p"], 2.0);
        assert_eq!(v["config"]["field"], "stretched");
        assert!(v["result"]["deficit"].as_f64().unwrap() > 1e-6);
    }

    #[test]
    fn fixture_fields_are_loaded_on_their_grid() {
        let dir = tempfile::tempdir().unwrap();
        let dim = Dimension::new(3, 2.0).unwrap();
        let ctx = Context::new(dim, crate::quadrature::GridSpec::sized_for(&dim, 512, 8)).unwrap();
        let path = dir.path().join("u.field");
        GriddedField::sample(&builtin_field("stretched", &dim).unwrap(), &ctx.quad, 0.0).write_to(&path).unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(args(&["deficit", "--n", "3", "--p", "2", "--field", path.to_str().unwrap(), "--out", out])), 0);
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("deficit.json")).unwrap()).unwrap();
        assert_eq!(v["grid"]["radial_nodes"], 512);
        assert_eq!(run(args(&["deficit", "--n", "4", "--p", "2", "--field", path.to_str().unwrap(), "--out", out])), 2);
    }

    #[test]
    fn spectrum_writes_ladder_and_eigenvectors() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run(args(&["spectrum", "--n", "3", "--p", "2", "--sectors", "0,1", "--k", "2", "--grid-N", "1024", "--grid-M", "8", "--dump-eigenvectors", "--out", out]));
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("spectrum.json")).unwrap()).unwrap();
        assert_eq!(v["result"]["sectors"].as_array().unwrap().len(), 2);
        assert!(v["result"]["gap"]["lambda"].as_f64().unwrap() > 0.0);
        let f = GriddedField::read_from(&dir.path().join("spectrum-l1-k0.field")).unwrap();
        assert_eq!(f.values().len(), 1024 * 8);
        let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(run(args(&["spectrum", "--n", "3", "--p", "2", "--sectors", "4", "--out", out])), 1);
    }

    #[test]
    fn thread_variable_is_validated() {
        assert!(thread_pool(Some("zero")).is_err());
        assert!(thread_pool(Some("0")).is_err());
        assert_eq!(thread_pool(Some("1")).unwrap().current_num_threads(), 1);
    }
}
