//! Thread-modular static data race detection.

pub mod conformance;
pub mod detector;
pub mod digest;
pub mod digests;
mod error;
pub mod oracle;
pub mod program;
pub mod solver;

pub use error::{AnalysisError, ConfigError, ConformanceError, ProgramError, SolverError};
