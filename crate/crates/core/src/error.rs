use thiserror::Error;

use crate::model::{ResourceId, TaskId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown task id {0}")]
    UnknownTask(TaskId),
    #[error("unknown resource id {0}")]
    UnknownResource(ResourceId),
    #[error("task {task} does not access resource {resource}")]
    NotAccessed { task: TaskId, resource: ResourceId },
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("malformed system JSON: {0}")]
    Json(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("uunifast needs at least one task")]
    NoTasks,
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
    #[error("search space bound exceeded after {0} states")]
    SearchSpaceExceeded(usize),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("nothing to plot: {0}")]
    EmptyPlot(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
