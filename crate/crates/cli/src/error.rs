use std::path::PathBuf;

use thiserror::Error;
use topicwise::corpus::CorpusError;
use topicwise::eval::EvalError;
use topicwise::features::FeatureError;
use topicwise::model::ModelError;
use topicwise::select::SelectError;
use topicwise::synth::SynthError;
use topicwise::topic::TopicError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Pipeline(String),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Pipeline(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<TopicError> for CliError {
    fn from(e: TopicError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::EmptySegment | FeatureError::LayoutMismatch { .. } => CliError::Pipeline(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SelectError> for CliError {
    fn from(e: SelectError) -> Self {
        CliError::Pipeline(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidSpec(m) => CliError::Usage(m),
            other => CliError::Pipeline(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Table { .. } => CliError::Input(e.to_string()),
            EvalError::Model(m) => m.into(),
            other => CliError::Pipeline(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { path, source } => CliError::Io { path, source },
            other => CliError::Input(other.to_string()),
        }
    }
}
