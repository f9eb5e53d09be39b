#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Table(#[from] wfext::Error),
    #[error("post-run audit failed: {0}")]
    Audit(String),
    #[error("history search exceeded {0} steps")]
    CheckTimeout(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
