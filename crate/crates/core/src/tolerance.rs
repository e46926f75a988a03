//! Numerical thresholds shared by the solver pipeline.
//!
//! Every comparison against a fixed threshold reads its value from a
//! [`Tolerances`] record so callers and tests can tighten or loosen them in
//! one place.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|trace(R) + 1|` below this means the Cayley form does not exist.
    pub angle_near_pi: f64,
    /// `|delta|` at or below this rejects the twisted Cayley transform.
    pub twisted_delta: f64,
    /// Householder vectors shorter than this are replaced by the identity.
    pub zero_reflector: f64,
    /// Minimum accepted norm of an input bearing.
    pub min_column_norm: f64,
    /// Relative remainder allowed by exact polynomial division.
    pub exact_division: f64,
    /// Relative pivot magnitude below which an elimination column is treated as empty.
    pub elimination_pivot: f64,
    /// Relative deviation from the `w -> -1/w` symmetry that aborts the fold.
    pub symmetry: f64,
    /// Relative magnitude below which leading coefficients are trimmed.
    pub leading_trim: f64,
    /// Smallest bracket width Sturm isolation will split, relative to `1 + |lo|`.
    pub isolation_width: f64,
    /// Ridders stops once the bracket is narrower than this, relative to `1 + |x|`.
    pub ridders_width: f64,
    pub ridders_max_iter: usize,
    /// Critical points of `W̃` where `|W̃|` is below this fraction of
    /// `Σ |cᵢ xⁱ|` count as double roots.
    pub double_root_residual: f64,
    /// Double roots within this distance of an isolated root, relative to
    /// `1 + |x|`, are not added again.
    pub double_root_separation: f64,
    /// Candidates from a possibly multiple root are kept only when their
    /// largest epipolar residual is below this.
    pub double_root_epipolar: f64,
    /// `C(w0)` counts as full rank when its last pivot ratio exceeds this.
    pub full_rank_c: f64,
    /// `C(w0)` counts as rank two when its second smallest singular value,
    /// relative to the largest, is below this.
    pub rank_two_c: f64,
    /// Smallest admissible last entry of the `C(w0)` null vector.
    pub rescale_floor: f64,
    /// Relative pivot below which the translation system is rank deficient.
    pub translation_rank: f64,
    /// Components below this are ignored when fixing the sign of `t`.
    pub translation_sign: f64,
}

impl Tolerances {
    pub const STANDARD: Tolerances = Tolerances {
        angle_near_pi: 1e-9,
        twisted_delta: 1e-12,
        zero_reflector: 1e-12,
        min_column_norm: 1e-12,
        exact_division: 1e-9,
        elimination_pivot: 1e-14,
        symmetry: 1e-6,
        leading_trim: 0.0,
        isolation_width: 1e-12,
        ridders_width: 1e-15,
        ridders_max_iter: 100,
        double_root_residual: 1e-10,
        double_root_separation: 1e-6,
        double_root_epipolar: 1e-9,
        full_rank_c: 1e-6,
        rank_two_c: 1e-6,
        rescale_floor: 1e-12,
        translation_rank: 1e-10,
        translation_sign: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::STANDARD
    }
}
