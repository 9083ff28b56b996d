use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("numerical failure at step {step}{}: {what}", expert_suffix(.expert))]
    Numerical {
        step: usize,
        expert: Option<usize>,
        what: String,
    },

    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("ingestion error at row {row}{}: {msg}", column_suffix(.column))]
    Ingest {
        row: usize,
        column: Option<String>,
        msg: String,
    },

    #[error("reporting error: {0}")]
    Report(String),

    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    #[error("cannot access {}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config render: {0}")]
    TomlRender(#[from] toml::ser::Error),
}

fn expert_suffix(expert: &Option<usize>) -> String {
    match expert {
        Some(k) => format!(" (EWLS expert {k})"),
        None => String::new(),
    }
}

fn column_suffix(column: &Option<String>) -> String {
    match column {
        Some(c) => format!(", column '{c}'"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach an expert index to a numerical failure.
    pub(crate) fn with_expert(self, k: usize) -> Self {
        match self {
            Error::Numerical { step, what, .. } => Error::Numerical {
                step,
                expert: Some(k),
                what,
            },
            other => other,
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
