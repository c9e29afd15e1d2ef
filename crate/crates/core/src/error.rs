//! Crate-wide error type.

use crate::storage::FileId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown file {0}")]
    UnknownFile(FileId),

    #[error("file {file} is already in tier {tier}")]
    AlreadyInTier { file: FileId, tier: usize },

    #[error("tier {tier} cannot hold {needed} more units ({free} free)")]
    CapacityExceeded { tier: usize, needed: u64, free: u64 },

    #[error("metadata inconsistency: {0}")]
    Inconsistent(String),

    #[error("sample of {requested} files exceeds population of {population}")]
    SampleExceedsPopulation { requested: usize, population: usize },

    #[error("injection batch of {batch} units does not fit in any tier")]
    InjectionOverflow { batch: u64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
