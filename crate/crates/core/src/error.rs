use alloc::string::String;

/// Errors raised by validation, estimation, testing and model enumeration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("basket table is empty")]
    EmptyTable,
    #[error("basket `{label}`: responders {y} outside [0, {n}]")]
    InvalidCount { label: String, y: u64, n: u64 },
    #[error("basket `{label}`: sample size must be positive")]
    InvalidSampleSize { label: String },
    #[error("basket `{label}`: null rate {pi0} outside (0, 1)")]
    InvalidNullRate { label: String, pi0: f64 },
    #[error("basket `{label}`: weight {weight} must be positive and finite")]
    InvalidWeight { label: String, weight: f64 },
    #[error("duplicate basket label `{0}`")]
    DuplicateLabel(String),
    #[error("basket `{0}` has no weight but the weight policy requires supplied weights")]
    MissingWeight(String),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("subclass {0} has no members")]
    EmptySubclass(usize),
    #[error("partition label {label} outside 1..={classes}")]
    InvalidPartition { label: usize, classes: usize },

    #[error("Mantel-Haenszel denominator is zero")]
    DegenerateDenominator,
    #[error("basket `{0}` has a single patient; variance requires n >= 2")]
    SingletonBasket(String),
    #[error("fitted rate for basket `{label}` is {rate}, outside (0, 1)")]
    DegenerateFit { label: String, rate: f64 },
    #[error("at least {required} baskets are required, got {got}")]
    TooFewBaskets { required: usize, got: usize },

    #[error(
        "exact null distribution needs {needed} lattice points (limit {limit}); use Monte Carlo"
    )]
    LatticeOverflow { needed: u128, limit: u64 },
    #[error("{models} candidate models exceed the limit of {limit}; restrict the strategy")]
    CombinatorialLimit { models: u128, limit: u64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
