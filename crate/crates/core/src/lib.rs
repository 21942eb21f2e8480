//! Numerical laboratory for quantitative stability of the p-Sobolev inequality.
//!
//! The crate evaluates Talenti bubbles, Sobolev deficits and their expansion
//! terms, projects functions onto the bubble manifold, computes spectral gaps
//! of the linearized p-Laplacian, verifies the pointwise vector inequalities
//! with empirical constants, and runs the sharpness experiments.

pub mod bubble;
pub mod checks;
pub mod cli;
pub mod context;
pub mod corpus;
pub mod deficit;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod optim;
pub mod projection;
pub mod quadrature;
pub mod reduce;
pub mod selftest;
pub mod special;
pub mod spectrum;
pub mod tangent;

pub use bubble::{Bubble, Dimension, Regime};
pub use error::{LabError, Result};
