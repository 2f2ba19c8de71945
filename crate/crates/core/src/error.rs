use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown control system `{0}`")]
    UnknownSystem(String),

    #[error("field index {index} out of range for a system with {count} fields")]
    FieldIndex { index: usize, count: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Hamiltonian integration blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("trajectory carries no covector data")]
    MissingCovectors,

    #[error("trajectory too coarse: {samples} samples, at least 3 required")]
    TooCoarse { samples: usize },

    #[error("shooting did not converge; best boundary error {best_error:e}")]
    NoConvergence { best_error: f64 },

    #[error("shooting failed for pair ({i}, {j}): best boundary error {best_error:e}")]
    PairNoConvergence { i: usize, j: usize, best_error: f64 },

    #[error("search budget exceeded: {required} evaluations per sweep, limit {limit}")]
    BudgetExceeded { required: usize, limit: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("infeasible marginals: total masses {mu} and {nu} differ")]
    InfeasibleMarginals { mu: f64, nu: f64 },

    #[error("no feasible transport plan with finite cost")]
    NoFinitePlan,

    #[error("cost matrix entry ({i}, {j}) is not a number")]
    NanCost { i: usize, j: usize },

    #[error("network simplex exceeded {0} pivots")]
    SolverStalled(usize),

    #[error("closed-form cost unavailable for system `{0}` and these supports")]
    BackendUnavailable(String),

    #[error("point lies outside the potential grid")]
    OutsideGrid,

    #[error("potential is not finite at grid node {0}")]
    NonFinitePotential(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure is numerical (non-convergence, blow-up) rather than
    /// a malformed request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::NoConvergence { .. }
                | Error::PairNoConvergence { .. }
                | Error::SolverStalled(_)
                | Error::NoFinitePlan
                | Error::NonFinitePotential(_)
        )
    }
}
