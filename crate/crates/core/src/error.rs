use thiserror::Error;

use crate::lattice::SitePoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("empty support")]
    EmptySupport,
    #[error("unknown name: {0}")]
    UnknownName(String),
    #[error("chart overflow")]
    ChartOverflow,
    #[error("outside injectivity radius")]
    OutsideInjectivity,
    #[error("sections not chart-compatible at site ({}, {})", .0.it, .0.ix)]
    NotChartCompatible(SitePoint),
    #[error("chart overflow at site ({}, {})", .0.it, .0.ix)]
    ChartOverflowAt(SitePoint),
    #[error("mismatched lattices")]
    MismatchedLattice,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("supports not disjoint")]
    SupportsNotDisjoint,
    #[error("cutoff too small")]
    CutoffTooSmall,
    #[error("operator not normally hyperbolic")]
    NotNormallyHyperbolic,
    #[error("unstable discretization")]
    UnstableDiscretization,
    #[error("singular time coupling at site ({}, {})", .0.it, .0.ix)]
    SingularTimeCoupling(SitePoint),
    #[error("dense assembly refused: {sites} sites exceeds limit {limit}")]
    DenseTooLarge { sites: usize, limit: usize },
    #[error("missing kernel: {0}")]
    MissingKernel(&'static str),
    #[error("density couples y_t and y_x; only diagonal spacetime metrics are supported")]
    MixedJetCoupling,
    #[error("unsupported jet order {0}")]
    UnsupportedOrder(u8),
    #[error("modification window overlaps the causal hull")]
    ModificationOverlapsHull,
    #[error("non-nested resolutions")]
    NonNestedResolutions,
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}
