use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or invalid configuration; `line` is 1-based when known.
    #[error("{}: {message}", location(path, *line, *column))]
    Config {
        path: Option<PathBuf>,
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    /// Unparseable data file; `row`/`column` are 1-based positions in the file.
    #[error("{}: row {row}, column {column}: {message}", path.display())]
    Data {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure in {module}::{operation}: {message}")]
    Numerical {
        module: &'static str,
        operation: &'static str,
        message: String,
    },
}

fn location(path: &Option<PathBuf>, line: Option<usize>, column: Option<usize>) -> String {
    let mut out = match path {
        Some(p) => p.display().to_string(),
        None => "configuration".to_string(),
    };
    if let Some(l) = line {
        out.push_str(&format!(":{l}"));
        if let Some(c) = column {
            out.push_str(&format!(":{c}"));
        }
    }
    out
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical { .. } => EXIT_NUMERICAL,
            _ => EXIT_CONFIG,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            path: None,
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Maps a library error into [`CliError::Numerical`] tagged with its origin.
pub fn numerical<E: std::fmt::Display>(module: &'static str, operation: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Numerical {
        module,
        operation,
        message: e.to_string(),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
