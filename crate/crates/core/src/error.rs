use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is not connected: vertex `{0}` is unreachable")]
    DisconnectedGraph(String),
    #[error("edge `{0}` has non-positive or non-finite length")]
    NonPositiveLength(String),
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(String),
    #[error("duplicate edge id `{0}`")]
    DuplicateEdgeId(String),
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertexId(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("unknown edge `{0}`")]
    UnknownEdge(String),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("point is not on the graph: {0}")]
    PointNotOnGraph(String),
    #[error("parameter {name} = {value} is out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("measure is not a probability measure (total mass {0})")]
    NotProbability(f64),
    #[error("measure has negative or non-finite entries")]
    NegativeMass,
    #[error("measure lives on a different grid")]
    GridMismatch,
    #[error("interaction kernel is not symmetric (defect {0:e})")]
    AsymmetricKernel(f64),
    #[error("regularisation width too large: 2*eps = {two_eps} >= min edge length {min_length}")]
    EpsilonTooLarge { two_eps: f64, min_length: f64 },
    #[error("measure carries an atom at vertex `{0}`")]
    AtomPresent(String),

    #[error("source and target masses differ ({0} vs {1})")]
    UnbalancedMasses(f64, f64),
    #[error("plan marginals do not match the given measures (defect {0:e})")]
    PlanMarginalMismatch(f64),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("transport solver exceeded {0} pivots")]
    SolverStalled(usize),

    #[error("solver did not converge after {iterations} iterations (relative change {relative_change:e}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        relative_change: f64,
        residual: f64,
    },
    #[error("linear system is singular")]
    SingularSystem,
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("dissipation is infinite")]
    InfiniteDissipation,
    #[error("free energy is infinite")]
    InfiniteEnergy,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
