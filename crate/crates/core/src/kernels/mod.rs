//! Pointwise vector and scalar inequalities with searched constants.

pub mod interpolation;
pub mod search;
pub mod sobol;
pub mod upper_expansion;
pub mod vector;

pub use interpolation::{interpolation_gap, interpolation_terms, InterpolationConstants, InterpolationForm, InterpolationPoint, InterpolationTerms};
pub use search::{
    search_c0, search_c1, search_interpolation, verify_interpolation, verify_lower_bound, verify_upper_expansion, C1Search, ConstantSearch, InterpolationBox, Verification,
};
pub use upper_expansion::{upper_expansion_gap, UpperBranch};
pub use vector::{lower_bound_gap, quad_form_g, weight_w, InequalityGapSample, WeightBranch};
