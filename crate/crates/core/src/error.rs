use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("customer count {requested} out of range 1..={available}")]
    CustomerCount { requested: usize, available: usize },
    #[error("instance needs a depot and at least one customer")]
    EmptyInstance,
    #[error("node ids must be 0..={expected_last} in order, found {found} at position {position}")]
    NodeIds {
        position: usize,
        found: usize,
        expected_last: usize,
    },
    #[error("unknown customer id {0}")]
    UnknownCustomer(usize),
    #[error("customer {0} is not routed")]
    NotRouted(usize),
    #[error("customer {0} is not in the removal list")]
    NotRemoved(usize),
    #[error("customer {customer} appears more than once")]
    DuplicateCustomer { customer: usize },
    #[error("customer {customer} demand {demand} exceeds vehicle capacity {capacity}")]
    DemandExceedsCapacity {
        customer: usize,
        demand: u32,
        capacity: u32,
    },
    #[error("inserting into tour {tour} would exceed capacity")]
    CapacityExceeded { tour: usize },
    #[error("position {position} is not valid for tour {tour}")]
    InvalidPosition { tour: usize, position: usize },
    #[error("portfolio size {0} out of range 2..=12")]
    PortfolioSize(usize),
    #[error("operator {0} has the wrong kind for this call")]
    WrongOperatorKind(&'static str),
    #[error("operator {0} is not part of the portfolio")]
    NotInPortfolio(&'static str),
    #[error("destroy scale {d} out of range 1..={routed}")]
    DestroyScale { d: usize, routed: usize },
    #[error("solution is not complete and feasible ({0} violations)")]
    InfeasibleStart(usize),
    #[error("action {0} is not valid in the current phase")]
    InvalidAction(&'static str),
    #[error("episode has already terminated")]
    EpisodeTerminated,
    #[error("empty action set")]
    EmptyActionSet,
    #[error("roulette weight {0} is not positive")]
    NonPositiveWeight(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("checkpoint format `{found}` is not supported (expected version {expected})")]
    CheckpointVersion { found: String, expected: u32 },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}
