use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: residual {residual:e} exceeds tolerance {tol:e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositive { eigenvalue: f64 },

    #[error("Sylvester operator is singular: eigenvalue pair sum {sum:e}")]
    SingularPair { sum: f64 },

    #[error("propagator is numerically singular at t = {t} (condition number {condition:e})")]
    SingularPropagator { t: f64, condition: f64 },

    #[error("metric lost positivity at t = {t}: min eigenvalue of M - I is {min_excess:e}")]
    PositivityLost { t: f64, min_excess: f64 },

    #[error("post-selected ancilla branch has vanishing norm {norm:e}")]
    ZeroBranch { norm: f64 },

    #[error("B coefficients do not vanish: max|B| / max|A| = {ratio:e}")]
    BNonVanishing { ratio: f64 },

    #[error("time grid too coarse for the carrier: {cycles_per_step} cycles per step (limit 0.02)")]
    GridTooCoarse { cycles_per_step: f64 },

    #[error("calibration system is rank deficient at electron polarization {p_e}")]
    RankDeficient { p_e: f64 },

    #[error("readout matrix is singular (condition number {condition:e})")]
    SingularReadout { condition: f64 },

    #[error("selected nuclear branch is empty: denominator {denominator:e}")]
    ZeroSelectionBranch { denominator: f64 },

    #[error("fit objective has non-positive curvature {curvature:e} at the minimum")]
    DegenerateCurvature { curvature: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NotPositive { .. } => "NotPositive",
            Error::SingularPair { .. } => "SingularPair",
            Error::SingularPropagator { .. } => "SingularPropagator",
            Error::PositivityLost { .. } => "PositivityLost",
            Error::ZeroBranch { .. } => "ZeroBranch",
            Error::BNonVanishing { .. } => "BNonVanishing",
            Error::GridTooCoarse { .. } => "GridTooCoarse",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::SingularReadout { .. } => "SingularReadout",
            Error::ZeroSelectionBranch { .. } => "ZeroSelectionBranch",
            Error::DegenerateCurvature { .. } => "DegenerateCurvature",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidParameter(_) => "InvalidParameter",
        }
    }
}
