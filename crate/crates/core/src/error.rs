use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid rank-one recipe: {0}")]
    InvalidRecipe(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("point {0} lies outside [0, 1)")]
    Domain(f64),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("elementary interval count {count} exceeds the cap of {cap}")]
    SizeCap { count: usize, cap: usize },
    #[error("{what} is not available for {system}")]
    Unsupported { what: &'static str, system: &'static str },
    #[error(
        "family member {member} keeps h_j >= 1/{j} up to L = {cap} on partition {partition} \
         (best h_j = {best})"
    )]
    PositiveEntropyWitness {
        /// 1-based.
        member: usize,
        j: u64,
        /// 1-based.
        partition: usize,
        cap: u64,
        best: f64,
    },
    #[error("linear program failed: {0}")]
    Solver(String),
}

impl Error {
    /// Stable machine-readable code for reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSystem(_) => "invalid_system",
            Error::InvalidPartition(_) => "invalid_partition",
            Error::InvalidRecipe(_) => "invalid_recipe",
            Error::InvalidSet(_) => "invalid_set",
            Error::Domain(_) => "domain",
            Error::Validation(_) => "validation",
            Error::SizeCap { .. } => "size_cap",
            Error::Unsupported { .. } => "unsupported",
            Error::PositiveEntropyWitness { .. } => "cap_exhausted",
            Error::Solver(_) => "solver",
        }
    }

    /// Whether the error comes from a computation hitting a configured cap.
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::SizeCap { .. } | Error::PositiveEntropyWitness { .. })
    }
}
