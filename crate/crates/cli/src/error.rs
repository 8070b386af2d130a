use thiserror::Error;

/// Problem in a scenario file, located as precisely as the parser allows.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{origin}{}: {field}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct ConfigError {
    /// File path or `<string>`.
    pub origin: String,
    /// 1-based line, when known.
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] swipt_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit code: 1 bad configuration, 2 infeasible, 3 numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(swipt_core::Error::Infeasible(_)) => 2,
            CliError::Core(swipt_core::Error::Convergence { .. }) => 3,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
