use thiserror::Error;

use crate::enumerate::NondominatedSet;
use crate::regret::RegretSolution;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid discount factor {0}: the generalized E matrix needs 0 < gamma < 1")]
    InvalidDiscount(f64),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(&'static str),

    #[error("reward polytope is infeasible")]
    InfeasiblePolytope,

    #[error("reward polytope has empty interior (Chebyshev radius {0:e})")]
    DegeneratePolytope(f64),

    #[error("reward polytope is unbounded")]
    UnboundedPolytope,

    #[error("invalid reward model: {0}")]
    InvalidRewardModel(String),

    #[error("LP solver numerical failure: {0}")]
    LpNumericalFailure(String),

    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("enumeration budget exceeded after {} policies", partial.len())]
    BudgetExceeded { partial: Box<NondominatedSet> },

    #[error("instance too large for brute force: {policies} policies (limit {limit})")]
    InstanceTooLarge { policies: f64, limit: usize },

    #[error("nondominated set is empty")]
    EmptyGamma,

    #[error("constraint generation hit the iteration cap ({} iterations)", best.iterations)]
    IterationCap { best: Box<RegretSolution> },

    #[error("malformed file: {0}")]
    MalformedFile(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(what: &'static str, expected: usize, got: usize) -> Self {
        Error::ShapeMismatch {
            what,
            expected,
            got,
        }
    }
}
