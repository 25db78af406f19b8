use thiserror::Error;

/// Diagnostic payload attached to a failed backtracking search so the
/// offending iterate can be inspected.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktrackFailure {
    pub iteration: usize,
    pub psi: Vec<f64>,
    pub masses: Vec<f64>,
    pub gradient: Vec<f64>,
    pub direction: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("cell {index} carries mass {mass:.3e}, below the floor {floor:.3e}")]
    Conditioning { index: usize, mass: f64, floor: f64 },

    #[error("{method} jacobian is not available for this problem: {reason}")]
    JacobianUnavailable {
        method: &'static str,
        reason: &'static str,
    },

    #[error("infeasible fee: lower bounds sum to {lower}, upper bounds sum to {upper}; they must bracket 1")]
    InfeasibleFee { lower: f64, upper: f64 },

    #[error("could not bracket the multiplier root after {expansions} expansions")]
    RootBracket { expansions: usize },

    #[error("conjugate maximizer coordinate {index} = {value} sits on the domain boundary; regularize the fee")]
    ClampedCoordinate { index: usize, value: f64 },

    #[error("fee part {index} has curvature {curvature} at {value}; the Hessian formula needs f'' > 0")]
    DegenerateCurvature {
        index: usize,
        value: f64,
        curvature: f64,
    },

    #[error("shuffle could not place cell {index} mass into [{lo:.3e}, {hi:.3e}] (density plateau or jump)")]
    ShuffleBisection { index: usize, lo: f64, hi: f64 },

    #[error("shuffle exceeded {cap} coordinate moves")]
    ShuffleIterationCap { cap: usize },

    #[error("backtracking exhausted at Newton iteration {}", .0.iteration)]
    BacktrackExhausted(Box<BacktrackFailure>),

    #[error("Newton iteration stopped after {iterations} steps with residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("Newton system is singular on the mean-zero subspace")]
    SingularHessian,

    #[error("brute-force oracle supports at most {max} sites, got {got}")]
    TooManySites { max: usize, got: usize },

    #[error("no grid point of the simplex has finite objective")]
    EmptyFeasibleGrid,

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
