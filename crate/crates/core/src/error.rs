//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the analysis routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Input contained NaN or infinite entries, or was otherwise malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Operand shapes are incompatible.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A weight matrix fed to a weighted adjoint is not Hermitian positive definite.
    #[error("invalid weight matrix: {0}")]
    InvalidWeight(String),

    /// I + dT*T^+ (or a similar hypothesis operator) is numerically singular,
    /// so the perturbation formulas do not apply.
    #[error("operator is numerically singular (sigma_min = {sigma_min:.3e})")]
    NotInvertible { sigma_min: f64 },

    /// A middle factor of a closed-form inverse formula is numerically singular.
    /// This signals an invalid input bundle rather than a rounding accident.
    #[error("formula breakdown: {factor} is numerically singular (condition estimate {cond:.3e})")]
    FormulaBreakdown { factor: String, cond: f64 },

    /// A routine that requires a stable perturbation was called on an
    /// unstable (or indeterminate) instance.
    #[error("perturbation is not stable: {0}")]
    NotStable(String),

    /// Randomized construction failed repeatedly (degenerate draws).
    #[error("construction failed after {attempts} attempts: {reason}")]
    ConstructionFailed { attempts: u32, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
