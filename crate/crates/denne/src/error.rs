use std::io;

/// Crate-wide error type. `category()` yields the stable one-word tag the
/// CLI prints on failure.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node id {id} out of range (n = {n})")]
    NodeRange { id: u32, n: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::NodeRange { .. } => "range",
            Error::Shape(_) => "shape",
            Error::Spec(_) => "spec",
            Error::Config(_) => "config",
            Error::Capacity(_) => "capacity",
            Error::Sampling(_) => "sampling",
            Error::Domain(_) => "domain",
            Error::Mode(_) => "mode",
            Error::Data(_) => "data",
            Error::Training(_) => "training",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
