use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: face {face} has zero area")]
    DegenerateFace { face: usize },

    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("blended skinning matrix at vertex {vertex} is singular (condition number {condition:.3e})")]
    SingularBlend { vertex: usize, condition: f64 },

    #[error("training diverged at step {step}: loss is {loss}")]
    Divergence { step: usize, loss: f64 },

    #[error("sampling starvation: {category} needed {wanted} samples, accepted {accepted} of {attempts} candidates")]
    SamplingStarvation {
        category: &'static str,
        wanted: usize,
        accepted: usize,
        attempts: usize,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("stage `{stage}` failed{}: {source}", layer.map(|k| format!(" on layer {k}")).unwrap_or_default())]
    Stage {
        stage: String,
        layer: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("manifest is invalid:{}", issues.iter().map(|i| format!("\n  {i}")).collect::<String>())]
    InvalidManifest { issues: Vec<crate::pipeline::ManifestIssue> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
