use thiserror::Error;

/// Errors raised while building models or solving stopping problems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("horizon must be >= 1 (got {0})")]
    HorizonTooSmall(usize),

    #[error("node `{node}`: children probabilities sum to {sum}, expected 1")]
    ProbabilitySum { node: String, sum: f64 },

    #[error("node `{node}`: edge probability {prob} is not in [0, 1]")]
    InvalidProbability { node: String, prob: f64 },

    #[error("node `{node}`: parent `{parent}` does not exist")]
    DanglingParent { node: String, parent: String },

    #[error("node `{0}` is declared more than once")]
    DuplicateNode(String),

    #[error("model has no root node (a node without parent at time 0)")]
    MissingRoot,

    #[error("model has more than one root: `{0}` and `{1}`")]
    MultipleRoots(String, String),

    #[error("node `{node}`: time {time} is inconsistent with its parent (expected {expected})")]
    TimeMismatch {
        node: String,
        time: usize,
        expected: usize,
    },

    #[error("node `{node}`: leaf at time {time} before horizon {horizon}")]
    LeafBeforeHorizon {
        node: String,
        time: usize,
        horizon: usize,
    },

    #[error("node `{node}`: time {time} exceeds horizon {horizon}")]
    BeyondHorizon {
        node: String,
        time: usize,
        horizon: usize,
    },

    #[error("node `{0}` is not reachable from the root")]
    Unreachable(String),

    #[error("node `{0}`: path probability is not strictly positive")]
    NonPositivePathProbability(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("process `{process}`: node `{node}` has invalid value {value} (must be finite and >= 0)")]
    InvalidValue {
        process: String,
        node: String,
        value: f64,
    },

    #[error("process `{process}`: no value for node `{node}`")]
    MissingValue { process: String, node: String },

    #[error("process has {got} values but the model has {expected} nodes")]
    ProcessLength { expected: usize, got: usize },

    #[error("objects belong to different models")]
    ModelMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node `{0}` is a leaf")]
    LeafNode(String),

    #[error("node `{node}` is not in the subtree of `{start}`")]
    NotInSubtree { node: String, start: String },

    #[error("stop set does not form an exact cut below `{start}`: {reason}")]
    NotACut { start: String, reason: String },

    #[error("enumeration count {count} exceeds cap {cap}")]
    CapExceeded { count: String, cap: u128 },

    #[error("wall-clock budget of {budget_secs} s exceeded")]
    TimeBudgetExceeded { budget_secs: f64 },

    #[error("infeasible instance: d={d}, delta={delta}, start time {start_time}, horizon T={horizon}")]
    Infeasible {
        d: usize,
        delta: usize,
        start_time: usize,
        horizon: usize,
    },

    #[error("constraint admits no stopping tuple from `{0}`")]
    EmptyFeasibleSet(String),

    #[error("reward has dimension {expected}, got {got} times")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fixed assignment is inconsistent: {0}")]
    InvalidAssignment(String),

    #[error("no free index remains in the assignment")]
    NoFreeIndex,

    #[error("reward is not flagged symmetric")]
    NotSymmetric,

    #[error("reward returned invalid value {value} at node `{node}`")]
    InvalidReward { node: String, value: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
