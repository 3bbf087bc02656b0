use std::path::PathBuf;

use thiserror::Error;

use crate::topology::QubitId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("{what} needs {n} variables but the limit is {cap}")]
    SizeLimit { what: &'static str, n: usize, cap: usize },

    #[error("unknown or inactive qubit {0}")]
    UnknownQubit(QubitId),

    #[error(transparent)]
    Embedding(#[from] EmbeddingError),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{param} = {value} is outside the allowed range [{lo}, {hi}]")]
    Range { param: String, value: f64, lo: f64, hi: f64 },

    #[error("unsupported format version `{0}`")]
    Version(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

/// Validation failures of a chain layout against a hardware graph.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("qubit {qubit} is used by chains {first} and {second}")]
    Overlap { qubit: QubitId, first: usize, second: usize },

    #[error("chain {chain} does not induce a connected subgraph")]
    Disconnected { chain: usize },

    #[error("chain {chain} uses broken qubit {qubit}")]
    BrokenQubit { chain: usize, qubit: QubitId },

    #[error("chain {chain} uses qubit {qubit}, outside the graph")]
    OutOfRange { chain: usize, qubit: QubitId },

    #[error("chain {chain} is empty")]
    EmptyChain { chain: usize },

    #[error("chains must be numbered 0..n in order, found chain {found} at position {expected}")]
    ChainOrder { expected: usize, found: usize },

    #[error("{n} logical variables do not fit: {reason}")]
    TooLarge { n: usize, reason: String },

    #[error("the clique layout needs an ideal graph, {0} qubits are broken")]
    BrokenGraph(usize),
}
