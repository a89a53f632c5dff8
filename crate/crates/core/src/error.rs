use core::fmt;

/// Everything that can go wrong inside the compression kernels.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A key row has (numerically) zero Euclidean norm.
    ZeroRow {
        index: usize,
    },
    /// Shapes or lengths that must agree do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A matrix or vector contains NaN or an infinity.
    NonFiniteValue {
        index: usize,
    },
    /// An attention score is negative.
    NegativeAttention {
        index: usize,
    },
    /// An attention vector has no strictly positive entry.
    NoPositiveAttention,
    EmptyInput,
    InvalidQuantile,
    InvalidConfig(&'static str),
    /// More samples were requested than there are tokens with nonzero probability.
    InsufficientSupport {
        requested: usize,
        available: usize,
    },
    IndexOutOfRange {
        index: usize,
        len: usize,
    },
    EmptyRetention,
    NeighborCountExceedsTokens {
        knn_k: usize,
        n_tokens: usize,
    },
    GlobalImageRejected,
    MultipleGlobalImages {
        first: usize,
        second: usize,
    },
    GridMismatch {
        rows: usize,
        cols: usize,
        n_tokens: usize,
    },
    EmptyCorpus,
}

impl Error {
    /// Stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroRow { .. } => "ZeroRow",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::NegativeAttention { .. } => "NegativeAttention",
            Error::NoPositiveAttention => "NoPositiveAttention",
            Error::EmptyInput => "EmptyInput",
            Error::InvalidQuantile => "InvalidQuantile",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InsufficientSupport { .. } => "InsufficientSupport",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::EmptyRetention => "EmptyRetention",
            Error::NeighborCountExceedsTokens { .. } => "NeighborCountExceedsTokens",
            Error::GlobalImageRejected => "GlobalImageRejected",
            Error::MultipleGlobalImages { .. } => "MultipleGlobalImages",
            Error::GridMismatch { .. } => "GridMismatch",
            Error::EmptyCorpus => "EmptyCorpus",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroRow { index } => write!(f, "row {index} has zero norm"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected {expected}, found {found}"),
            Error::NonFiniteValue { index } => write!(f, "non-finite value at flat index {index}"),
            Error::NegativeAttention { index } => {
                write!(f, "negative attention score at index {index}")
            }
            Error::NoPositiveAttention => f.write_str("attention vector has no positive entry"),
            Error::EmptyInput => f.write_str("empty input"),
            Error::InvalidQuantile => f.write_str("quantile level must lie in [0, 1]"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InsufficientSupport {
                requested,
                available,
            } => write!(
                f,
                "cannot draw {requested} tokens without replacement from {available} with positive probability"
            ),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} tokens")
            }
            Error::EmptyRetention => f.write_str("retained index set is empty"),
            Error::NeighborCountExceedsTokens { knn_k, n_tokens } => write!(
                f,
                "knn_k = {knn_k} exceeds the {} other tokens available",
                n_tokens.saturating_sub(1)
            ),
            Error::GlobalImageRejected => {
                f.write_str("the global image is passed through and never compressed")
            }
            Error::MultipleGlobalImages { first, second } => {
                write!(f, "bundles {first} and {second} are both marked global")
            }
            Error::GridMismatch {
                rows,
                cols,
                n_tokens,
            } => write!(f, "grid {rows}x{cols} does not cover {n_tokens} tokens"),
            Error::EmptyCorpus => f.write_str("no compression results to summarize"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
