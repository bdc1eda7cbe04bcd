use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("attribute `{attribute}` is single-valued but got `{first}` and `{second}`")]
    SingleValuedConflict {
        attribute: String,
        first: String,
        second: String,
    },

    #[error("item dictionary is frozen")]
    FrozenDictionary,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("field mapping is missing mandatory field `{0}`")]
    BadMapping(String),

    #[error("{0} window is empty")]
    EmptyWindow(&'static str),

    #[error("no users are active in both windows")]
    NoCommonUsers,

    #[error("both datasets are empty")]
    EmptyInput,

    #[error("oracle supports at most {limit} distinct items, got {actual}")]
    OracleLimit { limit: usize, actual: usize },

    #[error("user `{0}` is not in the label set")]
    UnknownUser(String),

    #[error("pattern has no behavioural items")]
    EmptyBehaviour,

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
