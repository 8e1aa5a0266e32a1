use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report schema version {found} is not supported (this build reads version {expected})")]
    SchemaVersion { found: u64, expected: u64 },
    #[error("malformed report: {0}")]
    Malformed(String),
    #[error(transparent)]
    Core(#[from] gplb_core::Error),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: everything that stops a run before a property
    /// verdict is a configuration problem (2).
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
