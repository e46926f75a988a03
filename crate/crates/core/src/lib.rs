//! Calibrated five-point relative pose from the Cayley parameterization of
//! rotations.
//!
//! Given five bearing-vector correspondences between two calibrated cameras,
//! the solver builds ten quartic constraints in the Cayley parameters
//! `(u, v, w)`, eliminates `u` and `v` to a degree-20 polynomial in `w` that
//! folds to a degree-10 polynomial in `w - 1/w`, and recovers rotation and
//! translation from each real root. The [`bench`] module reproduces the
//! synthetic accuracy experiments for the solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
mod dd;
pub mod error;
pub mod geometry;
pub mod normalization;
pub mod poly;
pub mod polysystem;
pub mod recovery;
pub mod roots;
pub mod tolerance;

pub use error::{Error, Result, Stage};
pub use geometry::{
    CayleyVector, Correspondence, EssentialMatrix, Mat3, RelativePose, Rotation3,
    UnitTranslation, Vec3,
};
pub use recovery::{solve_relative_pose, SolutionCandidate, SolveOptions, SolveOutput};
pub use tolerance::Tolerances;
