use thiserror::Error;

/// Errors raised while reading or transforming a program.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("{line}: invalid program: {message}")]
    Validation { line: u32, message: String },

    #[error("program is already instrumented")]
    AlreadyInstrumented,

    #[error("operation requires an instrumented program")]
    NotInstrumented,
}

impl ProgramError {
    pub(crate) fn syntax(line: u32, column: u32, message: impl Into<String>) -> Self {
        ProgramError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn validation(line: u32, message: impl Into<String>) -> Self {
        ProgramError::Validation {
            line,
            message: message.into(),
        }
    }
}

/// Errors raised when assembling a digest configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown digest `{0}`")]
    UnknownDigest(String),

    #[error("digest `join` requires digest `tid` to be active")]
    JoinWithoutTid,

    #[error("digest tuples have mismatched arity ({left} vs {right})")]
    ArityMismatch { left: usize, right: usize },
}

/// Errors raised by the fixpoint solver.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("fixpoint iteration exceeded {cap} constraint evaluations")]
    Divergence { cap: usize },

    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Errors raised by an end-to-end analysis run.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Program(#[from] ProgramError),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Errors raised by the conformance suites.
#[derive(Debug, Error)]
pub enum ConformanceError {
    #[error("case `{case}`: enumeration truncated at depth {depth}, width {width}")]
    InconclusiveBounds {
        case: String,
        depth: usize,
        width: usize,
    },

    #[error("case `{case}`: {source}")]
    Program {
        case: String,
        #[source]
        source: ProgramError,
    },

    #[error("case `{case}`: {source}")]
    Solver {
        case: String,
        #[source]
        source: SolverError,
    },

    #[error("corpus i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("corpus case `{case}`: malformed expectation: {source}")]
    Expectation {
        case: String,
        #[source]
        source: serde_json::Error,
    },
}
