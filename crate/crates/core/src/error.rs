use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("gate {0} cannot be conjugated through a Pauli frame")]
    UnsupportedGate(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid code spec: {0}")]
    Spec(String),

    #[error("noise injection rejected: {0}")]
    Noise(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("decoding infeasible: {0}")]
    Infeasible(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("curves for distances {small} and {large} never cross within the grid")]
    NoCrossing { small: u32, large: u32 },

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
