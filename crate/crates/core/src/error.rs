use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Variants are grouped so the command-line front end can map them onto
/// exit codes (validation, numerical failure, I/O).
#[derive(Debug, Error)]
pub enum Error {
    #[error("(s={s}, x={x}) lies outside the profile domain: {detail}")]
    OutOfDomain { s: f64, x: f64, detail: String },

    #[error("h_s vanishes at (s={s}, x={x}); the ratio h_x/h_s is singular")]
    SingularRatio { s: f64, x: f64 },

    #[error("(s={s}, t={t}) lies outside the triangle a <= t <= s")]
    MuDomain { s: f64, t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("ill-conditioned system (condition estimate {condition:.3e}): {detail}")]
    IllConditioned { condition: f64, detail: String },

    #[error("iteration diverged at step {iteration}: residual grew from {previous:.6e} to {current:.6e}")]
    Diverged {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    #[error("frequency xi = {0} is excluded from cone recovery")]
    ExcludedFrequency(f64),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {detail}")]
    Format { path: String, detail: String },
}

impl Error {
    /// Process exit code for this error: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OutOfDomain { .. }
            | Error::MuDomain { .. }
            | Error::Config(_)
            | Error::Precondition(_)
            | Error::Shape { .. }
            | Error::ExcludedFrequency(_) => 2,
            Error::SingularRatio { .. }
            | Error::IllConditioned { .. }
            | Error::Diverged { .. }
            | Error::UndefinedMetric(_) => 3,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
