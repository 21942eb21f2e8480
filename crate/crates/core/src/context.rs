//! Dimension, quadrature and Sobolev constant bundled for repeated use.

use serde::Serialize;

use crate::bubble::{sobolev_constant, Dimension};
use crate::error::Result;
use crate::quadrature::{GridSpec, Quadrature};

/// Everything an integral-bearing computation needs for one `(n, p)`.
#[derive(Clone, Debug)]
pub struct Context {
    pub dim: Dimension,
    pub quad: Quadrature,
    /// Optimal Sobolev constant computed on the same radial grid.
    pub sobolev: f64,
}

/// Grid description embedded in reports.
#[derive(Clone, Debug, Serialize)]
pub struct GridSummary {
    pub s_min: f64,
    pub s_max: f64,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
}

impl Context {
    pub fn new(dim: Dimension, spec: GridSpec) -> Result<Self> {
        let quad = Quadrature::new(&dim, spec)?;
        let sobolev = sobolev_constant(&dim, quad.radial())?;
        Ok(Self { dim, quad, sobolev })
    }

    pub fn default_for(dim: Dimension) -> Result<Self> {
        Self::new(dim, GridSpec::default_for(&dim))
    }

    /// The same problem on a grid with twice the nodes in each direction.
    pub fn doubled(&self) -> Result<Self> {
        Self::new(self.dim, self.quad.spec().doubled())
    }

    /// [`doubled`](Self::doubled), with the local patch grids doubled too.
    pub fn refined(&self) -> Result<Self> {
        let (panels, angular) = self.quad.patch_resolution();
        let mut out = self.doubled()?;
        out.quad = out.quad.with_patch_resolution(2 * panels, 2 * angular)?;
        Ok(out)
    }

    pub fn grid_summary(&self) -> GridSummary {
        let s = self.quad.spec();
        GridSummary { s_min: s.s_min, s_max: s.s_max, radial_nodes: s.radial_nodes, angular_nodes: s.angular_nodes }
    }
}
