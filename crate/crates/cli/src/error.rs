use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}line {line}: {msg}", file.as_ref().map(|f| format!("{}: ", f.display())).unwrap_or_default())]
    Parse {
        file: Option<PathBuf>,
        line: usize,
        msg: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Divergence(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn parse(line: usize, msg: String) -> Self {
        Self::Parse { file: None, line, msg }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            Self::Parse { line, msg, .. } => Self::Parse {
                file: Some(path.to_path_buf()),
                line,
                msg,
            },
            other => other,
        }
    }

    /// 1 configuration, 2 divergence, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Config(_) => 1,
            Self::Divergence(_) => 2,
            Self::Io { .. } => 3,
        }
    }
}

impl From<spicl::Error> for CliError {
    fn from(e: spicl::Error) -> Self {
        match e {
            spicl::Error::Divergence { .. } | spicl::Error::ProjectionViolation { .. } => {
                Self::Divergence(e.to_string())
            }
            other => Self::Config(other.to_string()),
        }
    }
}
