use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the numeric core, models, energies, and samplers.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    /// Two operands (or an operand and a declared shape) do not compose.
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    /// A non-finite value appeared while recording or evaluating.
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    /// An input that must be nonzero / non-degenerate was not.
    #[error("degenerate input to {op}: {detail}")]
    DegenerateInput { op: &'static str, detail: String },

    /// A vector that must lie on the probability simplex does not.
    #[error("input to {op} is not on the probability simplex (sum = {sum})")]
    NotSimplex { op: &'static str, sum: f64 },

    /// A batch or sample collection that must be nonempty was empty.
    #[error("empty input to {op}")]
    EmptyInput { op: &'static str },

    /// An invalid configuration value.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Training produced a non-finite loss.
    #[error("training aborted: non-finite loss {value} at epoch {epoch}, batch {batch}")]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        value: f64,
    },

    /// A training gate (e.g. a required accuracy bar) was not reached.
    #[error("training failure: {detail}")]
    TrainingFailure { detail: String },

    /// A Langevin chain escaped the divergence guard.
    #[error("chain diverged at step {step}: |z| = {norm:.3e}")]
    ChainDiverged { step: usize, norm: f64 },

    /// Checkpoint payload checksum does not match the envelope.
    #[error("checksum mismatch: expected {expected}, got {got}")]
    ChecksumMismatch { expected: String, got: String },

    /// Checkpoint format version is not supported.
    #[error("unsupported checkpoint version {got} (supported: {supported})")]
    VersionMismatch { got: u32, supported: u32 },

    /// Checkpoint holds a different kind of model than requested.
    #[error("checkpoint kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    /// Malformed checkpoint or dataset file.
    #[error("malformed file: {0}")]
    MalformedFile(String),

    /// A grid oracle's bounds do not cover the effective support.
    #[error("grid too small: boundary cells carry mass {boundary_mass:.3e}")]
    GridTooSmall { boundary_mass: f64 },

    /// I/O failure while persisting or loading artifacts.
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
