use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the core crate can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A distribution description violates its invariants.
    InvalidSpec(String),
    /// Estimator or experiment parameters are out of range.
    InvalidConfig(String),
    /// `N > log(1/delta)`, `0 < delta <= 1/2` or `r > 0` does not hold.
    InvalidClipParams { n: usize, delta: f64, r: f64 },
    /// The density at `x` is below the representable floor, so the score is undefined.
    DensityUnderflow { x: f64, density: f64 },
    /// Adaptive quadrature ran out of subdivisions before meeting its tolerance.
    QuadratureNotConverged { estimate: f64, error: f64, tolerance: f64 },
    /// `|E[g']|` is too small for the Cramér-Rao ratio to be meaningful.
    DegenerateTestFunction { mean_derivative: f64 },
    /// The symmetrized score was requested before a symmetrization point was set.
    SymPointUnset,
    /// An estimator needs more samples than it was given.
    TooFewSamples { needed: usize, got: usize },
    /// The global estimator cannot split its input into three valid stages.
    InsufficientSamples { n: usize, required: usize },
    /// The stage-2 Fisher information estimate is too small to divide by.
    DegenerateFisher { value: f64 },
    /// A list of seeds was required but empty.
    EmptySeedList,
}

impl Error {
    /// True for failures caused by the inputs rather than by numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpec(_)
                | Error::InvalidConfig(_)
                | Error::InvalidClipParams { .. }
                | Error::SymPointUnset
                | Error::TooFewSamples { .. }
                | Error::InsufficientSamples { .. }
                | Error::EmptySeedList
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidSpec(msg) => write!(f, "invalid distribution spec: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidClipParams { n, delta, r } => write!(
                f,
                "invalid clip parameters: need N > log(1/delta), 0 < delta <= 1/2, r > 0 (N = {n}, delta = {delta}, r = {r})"
            ),
            Error::DensityUnderflow { x, density } => {
                write!(f, "density underflow at x = {x} (density {density:e})")
            }
            Error::QuadratureNotConverged { estimate, error, tolerance } => write!(
                f,
                "quadrature did not converge: estimate {estimate}, error {error:e} > tolerance {tolerance:e}"
            ),
            Error::DegenerateTestFunction { mean_derivative } => {
                write!(f, "degenerate test function: |E[g']| = {mean_derivative:e}")
            }
            Error::SymPointUnset => write!(f, "symmetrization point is not set"),
            Error::TooFewSamples { needed, got } => {
                write!(f, "too few samples: need at least {needed}, got {got}")
            }
            Error::InsufficientSamples { n, required } => write!(
                f,
                "insufficient samples: n = {n}, the three-stage split needs n >= {required}"
            ),
            Error::DegenerateFisher { value } => {
                write!(f, "degenerate Fisher information estimate {value:e}")
            }
            Error::EmptySeedList => write!(f, "seed list is empty"),
        }
    }
}

impl core::error::Error for Error {}
