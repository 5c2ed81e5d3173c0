use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `u^[1]` (or `v^{1}`) jumps at `x`: the function is not in the
    /// domain of the expression there.
    #[error("quasi-derivative is discontinuous at x = {x} (jump {jump:e})")]
    DiscontinuousQuasiDerivative { x: f64, jump: f64 },

    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepUnderflow { x: f64, h: f64 },

    #[error("bracket needs one direct-side and one adjoint-side state")]
    SideMismatch,

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("test function {index} has zero norm")]
    ZeroNorm { index: usize },

    #[error("weight function is not real-valued near x = {x}")]
    NonRealM { x: f64 },

    #[error("function must be real-valued: {0}")]
    ComplexValued(String),

    #[error("bad interval scheme: {0}")]
    BadScheme(String),

    #[error("no convergence from seed {seed}: {reason}")]
    NoConvergence { seed: String, reason: String },

    #[error("log-scale bookkeeping could not renormalize: {0}")]
    OverflowUnrecoverable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
