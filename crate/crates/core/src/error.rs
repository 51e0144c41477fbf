use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("unknown entity: {0}")]
    UnknownEntity(String),
    #[error("unknown relation: {0}")]
    UnknownRelation(String),
    #[error("unresolved labels: {}", .0.join(", "))]
    UnresolvedLabels(Vec<String>),
    #[error("unknown abstract node id {0}")]
    UnknownAbstractNode(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("encoder: {0}")]
    Encoder(String),
    #[error("encoder request failed after {attempts} attempts: {msg}")]
    RemoteEncoder { attempts: usize, msg: String },
    #[error("element {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("missing embedding for key {0:?}")]
    MissingEmbedding(String),
    #[error("encoder is frozen or not trainable")]
    NotTrainable,
    #[error("kl divergence undefined: prediction is zero at index {0} where the target is positive")]
    KlSupport(usize),
    #[error("no trainable instances: {0}")]
    NoTrainableInstances(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("infeasible synthetic dataset: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
