use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image format error in {field}: {reason}")]
    Format { field: &'static str, reason: String },

    #[error("invalid image dimensions {width}x{height}")]
    Dimensions { width: usize, height: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Mismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: String, reason: String },

    #[error("no leaf found ({labels} watershed regions examined)")]
    NoLeafFound { labels: usize },

    #[error("degenerate histogram: {0}")]
    DegenerateHistogram(String),

    #[error("empty GLCM: no co-occurring pixel pairs inside the mask")]
    EmptyGlcm,

    #[error("empty mask")]
    EmptyMask,

    #[error("SMO did not converge after {iterations} sweeps and steps (worst KKT violation {worst_violation:.3e})")]
    NonConvergence { iterations: usize, worst_violation: f64 },

    #[error("training failed for class pair ({a}, {b}): {source}")]
    PairTraining {
        a: String,
        b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("evaluation failed for feature set {features:?}: {source}")]
    Evaluation {
        features: Vec<String>,
        #[source]
        source: Box<Error>,
    },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("empty confusion matrix")]
    EmptyConfusion,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("missing artifact {path}: run `{producer}` first")]
    MissingArtifact { path: String, producer: &'static str },

    #[error("config error at line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
