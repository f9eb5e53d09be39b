use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("all {0} thread slots are registered")]
    RegistryFull(usize),
    /// Completing the update needs a bucket split beyond the configured maximum depth.
    #[error("table is at its maximum directory depth ({0})")]
    TableAtMaxDepth(u8),
    #[error("bucket depth {depth} would exceed the maximum depth {max}")]
    DepthOverflow { depth: u8, max: u8 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
