//! Quadrature on R^n for axisymmetric integrands.

pub mod field;
pub mod grid;
pub mod gridded;
pub mod integrate;
pub mod seminorm;

pub use field::{
    base_or_self, combine, scale, AxisymField, BubbleField, Combination, FarBump, FieldRef, Jet, Node, Patch, Point, RadialShape, StretchedBubble, TangentDirection, TangentField,
    Zero, ZonalProfile,
};
pub use grid::{AngularGrid, GridSpec, Integral, RadialGrid};
pub use gridded::GriddedField;
pub use integrate::{Quadrature, RowIntegral};
pub use seminorm::{weighted_seminorm, SeminormWeight};
