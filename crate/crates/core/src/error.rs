use thiserror::Error;

/// Errors produced by the inference library.
#[derive(Debug, Error)]
pub enum BctError {
    #[error("alphabet must have at least 2 symbols, got {0}")]
    AlphabetTooSmall(usize),

    #[error("alphabet has {0} symbols; at most 256 are supported")]
    AlphabetTooLarge(usize),

    #[error("duplicate alphabet label {0:?}")]
    DuplicateLabel(String),

    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("insufficient initial context: need {needed} symbols, have {available}")]
    InsufficientContext { needed: usize, available: usize },

    #[error("maximum depth {0} exceeds the supported limit of 65535")]
    DepthTooLarge(usize),

    #[error("node budget of {cap} nodes exceeded")]
    NodeBudgetExceeded { cap: usize },

    #[error("beta must lie in (0, 1), got {0}")]
    InvalidBeta(f64),

    #[error("beta must be at least 1/2 for MAP and top-k model search, got {0}")]
    BetaBelowHalf(f64),

    #[error("model has depth {model_depth}, deeper than the maximum depth {max_depth}")]
    ModelTooDeep {
        model_depth: usize,
        max_depth: usize,
    },

    #[error("improper tree model: {0}")]
    ImproperModel(String),

    #[error("context of length {len} does not reach a leaf of the model")]
    ContextTooShort { len: usize },

    #[error("enumeration infeasible: {count} models exceed the cap of {cap}")]
    EnumerationInfeasible { count: String, cap: u64 },

    #[error("Dirichlet hyperparameters must be positive, got {0}")]
    InvalidHyperparameter(f64),

    #[error("hyperparameter vector has length {got}, expected {expected}")]
    HyperLength { got: usize, expected: usize },

    #[error("no parameters given for leaf {0:?}")]
    MissingParameters(Vec<u8>),

    #[error("invalid probability vector for leaf {context:?}: {reason}")]
    InvalidParameters { context: Vec<u8>, reason: String },

    #[error("k must be at least 1")]
    ZeroK,

    #[error("top-k search needs an estimated {estimate} units of work, above the cap of {cap}")]
    WorkCapExceeded { estimate: u64, cap: u64 },

    #[error("jump probability must lie in (0, 1), got {0}")]
    InvalidJumpProbability(f64),

    #[error("the jump sampler needs a nonempty set of top models")]
    EmptyTopSet,

    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    InvalidBurnIn(f64),

    #[error("empty trace")]
    EmptyTrace,

    #[error("training length {train_len} exceeds series length {n}")]
    TrainLengthOutOfRange { train_len: usize, n: usize },

    #[error("{0}")]
    Ingest(String),

    #[error("malformed tree document at {location}: {message}")]
    TreeFormat { location: String, message: String },

    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BctError {
    /// True for errors raised by resource caps (node budget, enumeration, top-k work).
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self,
            BctError::NodeBudgetExceeded { .. }
                | BctError::EnumerationInfeasible { .. }
                | BctError::WorkCapExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, BctError>;
