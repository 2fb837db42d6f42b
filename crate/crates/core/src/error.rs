use thiserror::Error;

use crate::enumerate::EnumerationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("step set is empty")]
    EmptyStepSet,
    #[error("lattice dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("step set contains the zero vector")]
    ZeroStep,
    #[error("step set is not closed under lattice symmetries: {missing:?} is missing")]
    NotSymmetric { missing: Vec<i32> },
    #[error("mixed dimensions: expected {expected}, found {found}")]
    MixedDimension { expected: usize, found: usize },
    #[error("duplicate step {0:?}")]
    DuplicateStep(Vec<i32>),
    #[error("invalid walk: {0}")]
    InvalidWalk(String),
    #[error("invalid jump distribution: {0}")]
    InvalidDistribution(String),
    #[error("potential must vanish at 0 and 1")]
    NonzeroBase,
    #[error("potential is not superadditive: phi({a}+{b}) < phi({a}) + phi({b})")]
    NotSuperadditive { a: usize, b: usize },
    #[error("potential is decreasing at {0}")]
    NotMonotone(usize),
    #[error("potential table has {given} values, cap {cap} needs {needed}")]
    TableTooShort {
        given: usize,
        cap: usize,
        needed: usize,
    },
    #[error("a vertex is visited {visits} times, beyond the tabulated cap {cap}")]
    CapExceeded { visits: usize, cap: usize },
    #[error("enumeration budget of {limit} nodes exceeded")]
    BudgetExceeded {
        limit: u64,
        partial: Option<Box<EnumerationReport>>,
    },
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("walk is not a bridge")]
    NotABridge,
    #[error("({i}, {j}) is not a zigzag of the walk")]
    NotAZigzag { i: usize, j: usize },
    #[error("{0} is not a diamond time of the walk")]
    NotDiamond(usize),
    #[error("irreducible-bridge sum {0} is not below one")]
    SNotBelowOne(f64),
    #[error("no irreducible bridge within the truncation length")]
    EmptyTruncation,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by an invalid model description.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyStepSet
                | Error::DimensionTooSmall(_)
                | Error::ZeroStep
                | Error::NotSymmetric { .. }
                | Error::MixedDimension { .. }
                | Error::DuplicateStep(_)
                | Error::InvalidDistribution(_)
                | Error::NonzeroBase
                | Error::NotSuperadditive { .. }
                | Error::NotMonotone(_)
                | Error::TableTooShort { .. }
        )
    }
}
