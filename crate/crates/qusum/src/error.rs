//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix expected to be Hermitian failed the symmetry check.
    #[error("matrix is not Hermitian: asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },

    /// Iterative eigensolver failed to converge.
    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    ConvergenceFailure { dim: usize },

    /// A tensor/Kronecker product would exceed the configured dimension cap.
    #[error("dimension {dim} exceeds the configured maximum {max_dim}")]
    DimensionOverflow { dim: usize, max_dim: usize },

    /// Operands have incompatible dimensions.
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    /// Two vectors have different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// Fock-space tail mass still exceeds the tolerance at the maximum cutoff.
    #[error("tail mass {tail:.3e} exceeds tolerance {tol:.3e} at maximum cutoff {max_dim}")]
    CutoffTooSmall { tail: f64, tol: f64, max_dim: usize },

    /// A state specification is malformed.
    #[error("bad state spec: {0}")]
    BadSpec(String),

    /// POVM element probabilities stopped summing to one.
    #[error("outcome probabilities sum to {sum} (deviation beyond repair threshold)")]
    NormalizationBroken { sum: f64 },

    /// Invalid dimensions for a channel construction.
    #[error("bad channel dimensions: sub-dimension {sub} must satisfy 1 <= sub < {full}")]
    BadDims { sub: usize, full: usize },

    /// The POVM-parametrization normalizer is numerically singular.
    #[error("singular normalizer: min eigenvalue ratio {ratio:.3e}")]
    SingularNormalizer { ratio: f64 },

    /// CUSUM detector stepped after it already stopped.
    #[error("detector already stopped at step {step}")]
    AlreadyStopped { step: u64 },

    /// Change point is not aligned with the block length.
    #[error("change point {nu} is not a multiple of block length {block_l}")]
    MisalignedChangePoint { nu: u64, block_l: usize },

    /// Trial horizon must be positive.
    #[error("horizon must be positive")]
    HorizonNonpositive,

    /// False-alarm estimates did not span enough decades for a slope fit.
    #[error("false-alarm times span {decades:.2} decades; at least 2 required")]
    InsufficientSpread { decades: f64 },

    /// A precondition on an operation's inputs was violated.
    #[error("{0}")]
    Precondition(String),

    /// Relative entropy is infinite where a finite value is required.
    #[error("relative entropy is infinite (support violation)")]
    InfiniteRelativeEntropy,

    /// File or serialization problem.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization problem.
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
