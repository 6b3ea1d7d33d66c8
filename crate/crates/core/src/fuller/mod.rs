//! Fuller order of scattered subsets of ℝ: exact calculus on finitely
//! described sets and an ε-scale estimator for finite samples of switch times.

mod generate;
mod sample;
mod set;

pub use generate::{make_cascade, DEPTH_BOUND};
pub use sample::{sample_strata, SampleSet};
pub use set::{derived, difference, fuller_order, strata, subset, CascadeSet, Decision, Geometry, MAX_NESTING, Q};
