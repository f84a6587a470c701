use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("offspring law puts mass on 0 children")]
    ZeroKey,
    #[error("offspring mean {mean} is not larger than 1")]
    Subcritical { mean: f64 },
    #[error("invalid offspring pmf: {0}")]
    BadPmf(String),
    #[error("density {0} outside [0, 1)")]
    BadDensity(f64),
    #[error("invalid fugacity {0}")]
    BadAlpha(f64),
    #[error("invalid horizon {0}")]
    BadHorizon(f64),
    #[error("invalid radius {0}")]
    BadRadius(u32),
    #[error("node {0} does not belong to this tree")]
    UnknownNode(u32),
    #[error("site {0} is not occupied")]
    UnoccupiedSite(u32),
    #[error("occupancy law does not match the {0} model")]
    InconsistentLaw(&'static str),
    #[error("budget of {limit} resolution steps exceeded")]
    BudgetExceeded { limit: u64 },
    #[error("finite tree with {n} vertices exceeds the cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("invalid finite tree: {0}")]
    BadTree(String),
    #[error("conservation sector splits into {components} components")]
    SingularSector { components: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {needed} replicas, got {got}")]
    TooFewReplicas { needed: usize, got: usize },
    #[error("need at least {needed} complete blocks, got {got}")]
    TooFewBlocks { needed: usize, got: usize },
    #[error("chi-square test has {bins} usable bins after pooling")]
    DegenerateBins { bins: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
