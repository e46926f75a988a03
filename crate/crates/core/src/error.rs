use std::fmt;

/// Pipeline stage that rejected an input, attached to [`Error::DegenerateInput`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Normalization,
    Constraints,
    Elimination,
    Determinant,
    Fold,
    Roots,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Normalization => "normalization",
            Stage::Constraints => "constraints",
            Stage::Elimination => "elimination",
            Stage::Determinant => "determinant",
            Stage::Fold => "fold",
            Stage::Roots => "roots",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("rotation angle is too close to pi for a Cayley vector (|trace + 1| = {0:e})")]
    AngleNearPi(f64),
    #[error("twisted Cayley transform undefined: delta = {0:e}")]
    DegenerateDelta(f64),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("observation column {column} has norm {norm:e}")]
    DegenerateObservation { column: usize, norm: f64 },
    #[error("polynomial product degree {0} exceeds the supported maximum")]
    DegreeOverflow(usize),
    #[error("polynomial division left remainder {remainder:e} (scale {scale:e})")]
    InexactDivision { remainder: f64, scale: f64 },
    #[error("coefficient matrix B has only {0} pivots among the pure quartic columns")]
    RankDeficientB(usize),
    #[error("unexpected pivot pattern at row {row}")]
    UnexpectedPivotPattern { row: usize },
    #[error("degree-20 polynomial is not symmetric (deviation {0:e})")]
    SymmetryViolation(f64),
    #[error("polynomial is identically zero")]
    DegenerateZeroPolynomial,
    #[error("root refinement did not converge; best estimate {best}")]
    NoConvergence { best: f64 },
    #[error("C(w) is not singular at w = {w} (pivot ratio {ratio:e})")]
    FullRankC { w: f64, ratio: f64 },
    #[error("null vector of C(w) is at infinity (last entry {0:e})")]
    RescaleFailure(f64),
    #[error("epipolar matrix S has rank below 2")]
    RankBelow2,
    #[error("angle interval [{lo}, {hi}] crosses a pole of cot")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("scene sampling exhausted after {0} attempts")]
    SamplingExhausted(usize),
    #[error("degenerate input at {stage} stage: {source}")]
    DegenerateInput {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::DegenerateInput { .. } => e,
            e => Error::DegenerateInput {
                stage,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
