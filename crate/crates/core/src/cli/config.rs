//! Run configuration: command-line flags layered over a key=value file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::bubble::Dimension;
use crate::error::{invalid, LabError, Result};
use crate::quadrature::GridSpec;

/// Default output directory.
pub const DEFAULT_OUT: &str = "sobolev-lab-out";

/// Options accepted both as flags and as config-file keys.
#[derive(Args, Clone, Debug, Default)]
pub struct Options {
    /// Space dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Integrability exponent, 1 < p < n.
    #[arg(long)]
    pub p: Option<f64>,
    /// Radial grid nodes.
    #[arg(long = "grid-N")]
    pub grid_n: Option<usize>,
    /// Angular grid nodes.
    #[arg(long = "grid-M")]
    pub grid_m: Option<usize>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for JSON and CSV artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file of key=value lines; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Violation tolerance of sampled checks.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Weight fraction kappa of the pointwise inequalities.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Absorbed fraction eps0 of the interpolation bound.
    #[arg(long)]
    pub eps0: Option<f64>,
    /// Sample count (check or corpus size).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Comma-separated zonal sectors.
    #[arg(long, value_delimiter = ',')]
    pub sectors: Option<Vec<usize>>,
    /// Eigenpairs per sector.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated bump amplitudes.
    #[arg(long = "eps-list", value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Comma-separated stretch indices.
    #[arg(long = "i-list", value_delimiter = ',')]
    pub i_list: Option<Vec<f64>>,
    /// Distance of the far bump from the origin.
    #[arg(long = "x-far")]
    pub x_far: Option<f64>,
    /// Built-in field name or path to a gridded field container.
    #[arg(long)]
    pub field: Option<String>,
    /// Projection rule.
    #[arg(long)]
    pub projector: Option<String>,
    /// Sharpness family.
    #[arg(long)]
    pub family: Option<String>,
    /// Inequality check.
    #[arg(long)]
    pub check: Option<String>,
    /// Write eigenvectors as gridded field containers.
    #[arg(long = "dump-eigenvectors")]
    pub dump_eigenvectors: bool,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| LabError::Invalid(format!("config key '{key}': cannot parse '{value}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl Options {
    /// Set one option from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = Some(parse(key, value)?),
            "p" => self.p = Some(parse(key, value)?),
            "grid-N" => self.grid_n = Some(parse(key, value)?),
            "grid-M" => self.grid_m = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "tolerance" => self.tolerance = Some(parse(key, value)?),
            "kappa" => self.kappa = Some(parse(key, value)?),
            "eps0" => self.eps0 = Some(parse(key, value)?),
            "samples" => self.samples = Some(parse(key, value)?),
            "sectors" => self.sectors = Some(parse_list(key, value)?),
            "k" => self.k = Some(parse(key, value)?),
            "eps-list" => self.eps_list = Some(parse_list(key, value)?),
            "i-list" => self.i_list = Some(parse_list(key, value)?),
            "x-far" => self.x_far = Some(parse(key, value)?),
            "field" => self.field = Some(value.to_string()),
            "projector" => self.projector = Some(value.to_string()),
            "family" => self.family = Some(value.to_string()),
            "check" => self.check = Some(value.to_string()),
            "dump-eigenvectors" => self.dump_eigenvectors = parse(key, value)?,
            other => return invalid(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    /// Parse `key = value` lines; `#` starts a comment.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return invalid(format!("config line {}: expected key=value, got '{line}'", i + 1));
            };
            out.set(key.trim(), value.trim())?;
        }
        Ok(out)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_config_text(&text)
    }

    /// Options set here win over those in `base`.
    pub fn over(self, base: Options) -> Options {
        Options {
            n: self.n.or(base.n),
            p: self.p.or(base.p),
            grid_n: self.grid_n.or(base.grid_n),
            grid_m: self.grid_m.or(base.grid_m),
            seed: self.seed.or(base.seed),
            out: self.out.or(base.out),
            config: self.config.or(base.config),
            tolerance: self.tolerance.or(base.tolerance),
            kappa: self.kappa.or(base.kappa),
            eps0: self.eps0.or(base.eps0),
            samples: self.samples.or(base.samples),
            sectors: self.sectors.or(base.sectors),
            k: self.k.or(base.k),
            eps_list: self.eps_list.or(base.eps_list),
            i_list: self.i_list.or(base.i_list),
            x_far: self.x_far.or(base.x_far),
            field: self.field.or(base.field),
            projector: self.projector.or(base.projector),
            family: self.family.or(base.family),
            check: self.check.or(base.check),
            dump_eigenvectors: self.dump_eigenvectors || base.dump_eigenvectors,
        }
    }

    /// Flags layered over the config file they name, if any.
    pub fn resolve_file(self) -> Result<Options> {
        match self.config.clone() {
            Some(path) => Ok(self.over(Options::from_config_file(&path)?)),
            None => Ok(self),
        }
    }
}

/// Fully resolved settings of one run, embedded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub config_file: Option<PathBuf>,
    pub tolerance: f64,
    pub kappa: f64,
    pub eps0: f64,
    pub samples: Option<usize>,
    pub sectors: Vec<usize>,
    pub k: usize,
    pub eps_list: Option<Vec<f64>>,
    pub i_list: Option<Vec<f64>>,
    pub x_far: Option<f64>,
    pub field: String,
    pub projector: String,
    pub family: String,
    pub check: Option<String>,
    pub dump_eigenvectors: bool,
}

impl RunConfig {
    /// Apply defaults and validate. `n` and `p` are required unless
    /// `dimension_optional` is set, and must satisfy `1 < p < n` when given.
    pub fn resolve(command: &str, o: Options, dimension_optional: bool) -> Result<Self> {
        match (o.n, o.p) {
            (Some(n), Some(p)) => {
                Dimension::new(n, p)?;
            }
            (None, None) if dimension_optional => {}
            _ => return invalid(format!("{command} needs both --n and --p")),
        }
        let cfg = Self {
            command: command.into(),
            n: o.n,
            p: o.p,
            radial_nodes: o.grid_n.unwrap_or(2048),
            angular_nodes: o.grid_m.unwrap_or(64),
            seed: o.seed.unwrap_or(1),
            out: o.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            config_file: o.config,
            tolerance: o.tolerance.unwrap_or(1e-10),
            kappa: o.kappa.unwrap_or(0.5),
            eps0: o.eps0.unwrap_or(0.1),
            samples: o.samples,
            sectors: o.sectors.unwrap_or_else(|| vec![0, 1, 2, 3]),
            k: o.k.unwrap_or(3),
            eps_list: o.eps_list,
            i_list: o.i_list,
            x_far: o.x_far,
            field: o.field.unwrap_or_else(|| "bubble".into()),
            projector: o.projector.unwrap_or_else(|| "gradient-distance".into()),
            family: o.family.unwrap_or_else(|| "anisotropic".into()),
            check: o.check,
            dump_eigenvectors: o.dump_eigenvectors,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if let Some(spec) = self.grid_spec() {
            spec.validate()?;
        }
        if !(self.tolerance >= 0.0) {
            return invalid(format!("tolerance must be nonnegative, got {}", self.tolerance));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return invalid(format!("kappa must lie in (0,1), got {}", self.kappa));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return invalid(format!("eps0 must lie in (0,1), got {}", self.eps0));
        }
        if self.samples == Some(0) {
            return invalid("samples must be positive");
        }
        if self.k == 0 {
            return invalid("k must be positive");
        }
        for (name, list) in [("eps-list", &self.eps_list), ("i-list", &self.i_list)] {
            if let Some(l) = list {
                if l.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return invalid(format!("{name} entries must be positive"));
                }
            }
        }
        if let Some(x) = self.x_far {
            if !(x.is_finite() && x > 1.0) {
                return invalid(format!("x-far must exceed 1, got {x}"));
            }
        }
        Ok(())
    }

    pub fn dimension(&self) -> Result<Dimension> {
        match (self.n, self.p) {
            (Some(n), Some(p)) => Dimension::new(n, p),
            _ => invalid(format!("{} needs both --n and --p", self.command)),
        }
    }

    /// Quadrature grid for the configured dimension.
    pub fn grid_spec(&self) -> Option<GridSpec> {
        let dim = self.dimension().ok()?;
        Some(GridSpec::sized_for(&dim, self.radial_nodes, self.angular_nodes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_parses_and_rejects_unknown_keys() {
        let o = Options::from_config_text("# comment\nn = 3\np=2.5 # trailing\n\nsectors = 0, 2\neps-list=0.1,0.01\n").unwrap();
        assert_eq!(o.n, Some(3));
        assert_eq!(o.p, Some(2.5));
        assert_eq!(o.sectors, Some(vec![0, 2]));
        assert_eq!(o.eps_list, Some(vec![0.1, 0.01]));
        assert!(Options::from_config_text("bogus = 1").is_err());
        assert!(Options::from_config_text("n 3").is_err());
        assert!(Options::from_config_text("n = three").is_err());
    }

    #[test]
    fn flags_take_precedence() {
        let file = Options::from_config_text("n = 3\np = 2\nseed = 5").unwrap();
        let flags = Options { p: Some(1.5), ..Options::default() };
        let o = flags.over(file);
        assert_eq!((o.n, o.p, o.seed), (Some(3), Some(1.5), Some(5)));
    }

    #[test]
    fn resolve_enforces_exponent_range() {
        let o = |n, p| Options { n: Some(n), p: Some(p), ..Options::default() };
        assert!(RunConfig::resolve("deficit", o(3, 2.0), false).is_ok());
        assert!(RunConfig::resolve("deficit", o(3, 3.0), false).is_err());
        assert!(RunConfig::resolve("deficit", o(3, 1.0), false).is_err());
        assert!(RunConfig::resolve("deficit", Options { n: Some(3), ..Options::default() }, false).is_err());
        assert!(RunConfig::resolve("selftest", Options::default(), true).is_ok());
    }
}
