use std::path::PathBuf;

/// Errors of the pipeline and its file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] teamcoach_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("{}: row {row}: {reason}", path.display())]
    Csv { path: PathBuf, row: u64, reason: String },

    #[error("config {}: {source}", path.display())]
    ConfigSyntax {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },

    #[error("{}: {details}", path.display())]
    InvalidArtifact { path: PathBuf, details: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("stage {stage} has not been run in {}", dir.display())]
    StageNotRun { stage: &'static str, dir: PathBuf },

    #[error("stage {stage}: artifact {path} is missing (expected sha256 {expected})")]
    MissingArtifact {
        stage: &'static str,
        path: String,
        expected: String,
    },

    #[error("stage {stage}: artifact {path} has sha256 {found}, manifest expects {expected}")]
    StaleArtifact {
        stage: &'static str,
        path: String,
        expected: String,
        found: String,
    },

    #[error("stage {stage} was run with different inputs (expected input hash {expected}, have {found}); rerun it")]
    StaleStage {
        stage: &'static str,
        expected: String,
        found: String,
    },

    #[error("{}: row {row}: objective {found} differs from reward - cost * interventions = {expected}", path.display())]
    ObjectiveMismatch {
        path: PathBuf,
        row: u64,
        found: f64,
        expected: f64,
    },
}

impl Error {
    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
