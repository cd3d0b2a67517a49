//! Crate-wide error types.

use thiserror::Error;

/// Errors raised while ingesting a notebook file.
#[derive(Debug, Error)]
pub enum NotebookError {
    #[error("malformed notebook JSON at byte {offset} (line {line}, column {column}): {message}")]
    Malformed {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported notebook format version {major}.{minor} (expected 4.x)")]
    UnsupportedVersion { major: i64, minor: i64 },
    #[error("notebook has no `cells` array")]
    MissingCells,
    #[error("duplicate execution count {count} (cells {first} and {second})")]
    DuplicateExecutionCount {
        count: u64,
        first: usize,
        second: usize,
    },
    #[error("cell {index}: {message}")]
    BadCell { index: usize, message: String },
}

/// Errors raised by the static symbol analysis of a cell.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Errors raised while loading configuration data files.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("unknown summary field `{0}` has no category assignment")]
    UnknownField(String),
    #[error("unknown token counter `{0}`")]
    UnknownCounter(String),
    #[error("unknown context configuration `{0}`")]
    UnknownConfig(String),
    #[error("{0}")]
    Invalid(String),
}

/// Errors raised by prompt assembly.
#[derive(Debug, Error)]
pub enum PromptError {
    #[error("target cell is empty")]
    EmptyTarget,
}

/// Errors raised by the LLM gateway.
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("provider `{provider}`: transport failed after {attempts} attempt(s): {log:?}")]
    Transport {
        provider: String,
        attempts: u32,
        log: Vec<String>,
    },
    #[error("provider `{provider}`: missing credential variable {variable}")]
    MissingCredential { provider: String, variable: String },
    #[error("provider profile: {0}")]
    Profile(String),
    #[error("vote {index} failed: {source}; {completed} instance(s) completed before the failure")]
    Vote {
        index: usize,
        completed: usize,
        #[source]
        source: Box<GatewayError>,
    },
    #[error("votes must be odd and >= 1, got {0}")]
    BadVoteCount(usize),
}

/// Errors raised by the evaluation harness.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest line {line}: case `{case_id}`: {message}")]
    BadCase {
        line: usize,
        case_id: String,
        message: String,
    },
    #[error("record line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("judgment required for case `{0}` (crash predicted on a buggy case) but none was supplied")]
    MissingJudgment(String),
    #[error("label sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("cannot compute metrics over zero cases")]
    EmptyInput,
    #[error("sample target {target} exceeds population {population}")]
    SampleTooLarge { target: usize, population: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Errors raised by the end-to-end pipeline.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("replay failed in executed cell {cell_index} (execution count {execution_count}): {message}")]
    Replay {
        cell_index: usize,
        execution_count: u64,
        message: String,
    },
    #[error("kernel acquisition: {0}")]
    Kernel(String),
    #[error(transparent)]
    Notebook(#[from] NotebookError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("target cell index {0} not found in notebook")]
    NoSuchCell(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
