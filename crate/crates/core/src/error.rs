use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// [`Error::exit_code`] groups them into the process exit codes used by the
/// command line tool: data/validation problems map to 2, numeric problems to 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("alignment error in {file}: missing ids [{}]{}", missing.join(", "), unexpected_suffix(unexpected))]
    Alignment {
        file: String,
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("duplicate id `{id}` in {file}")]
    Duplicate { file: String, id: String },

    #[error("{file}: row {row}: value {value} outside [0, 1]")]
    Range { file: String, row: usize, value: f64 },

    #[error("invalid label {value} for id `{id}` (expected 0 or 1)")]
    Label { id: String, value: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("undefined cosine similarity{}", chunk.map(|c| format!(" at chunk {c}")).unwrap_or_default())]
    UndefinedSimilarity { chunk: Option<usize> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("no candidates for combination {0}")]
    MissingCandidates(String),

    #[error("incomplete committee: {0}")]
    IncompleteCommittee(String),

    #[error("unusable ensemble: all weights are zero")]
    UnusableEnsemble,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Wav { path: PathBuf, message: String },
}

fn unexpected_suffix(unexpected: &[String]) -> String {
    if unexpected.is_empty() {
        String::new()
    } else {
        format!(", unexpected ids [{}]", unexpected.join(", "))
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::EmptyInput(_) => "empty_input",
            Error::Alignment { .. } => "alignment",
            Error::Duplicate { .. } => "duplicate",
            Error::Range { .. } => "range",
            Error::Label { .. } => "label",
            Error::Numeric(_) => "numeric",
            Error::UndefinedSimilarity { .. } => "undefined_similarity",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Dimension(_) => "dimension",
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::DegenerateLabels(_) => "degenerate_labels",
            Error::MissingCandidates(_) => "missing_candidates",
            Error::IncompleteCommittee(_) => "incomplete_committee",
            Error::UnusableEnsemble => "unusable_ensemble",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Wav { .. } => "wav",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::UndefinedSimilarity { .. } | Error::UnusableEnsemble => 3,
            _ => 2,
        }
    }
}
