use thiserror::Error;

use crate::protocol::{KnowledgeTest, ProgramLocation};

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing knowledge input {test} at round {round}")]
    MissingKnowledgeInput { test: KnowledgeTest, round: usize },

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("run {run} is not quiescent by horizon {horizon}")]
    HorizonExceeded { run: usize, horizon: usize },

    #[error("syntax error at column {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown atom `{0}`")]
    UnknownAtom(String),

    #[error("location {location} of `{name}` is never reached at rounds {rounds:?}")]
    InfeasibleObligation {
        name: String,
        location: ProgramLocation,
        rounds: Vec<usize>,
    },

    #[error("predicate `{name}` reads `{atom}`, which agent {agent} cannot observe")]
    ObservabilityViolation {
        name: String,
        atom: String,
        agent: String,
    },

    #[error("goal never reached within horizon {horizon}")]
    BoundUnreachable { horizon: usize },

    #[error("malformed {what} at line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Variant name, used as a stable prefix in CLI diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MissingKnowledgeInput { .. } => "MissingKnowledgeInput",
            Error::ConfigInvalid(_) => "ConfigInvalid",
            Error::HorizonExceeded { .. } => "HorizonExceeded",
            Error::Syntax { .. } => "SyntaxError",
            Error::UnknownAtom(_) => "UnknownAtom",
            Error::InfeasibleObligation { .. } => "InfeasibleObligation",
            Error::ObservabilityViolation { .. } => "ObservabilityViolation",
            Error::BoundUnreachable { .. } => "BoundUnreachable",
            Error::Format { .. } => "FormatError",
            Error::Io(_) => "IoError",
        }
    }
}
