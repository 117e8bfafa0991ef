use thiserror::Error;

/// Failure modes of the numerical pipeline.
///
/// Variants that come from a numerical guard carry the module that raised
/// them so front ends can report provenance.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: domain error: {detail}")]
    Domain { module: &'static str, detail: String },

    #[error("spectrum: critical parameter mu = {mu}: the potential requires mu < 1/4")]
    CriticalParameter { mu: String },

    #[error("{module}: precision exhausted ({detail}); rerun with at least {needed_bits} mantissa bits")]
    Precision {
        module: &'static str,
        detail: String,
        needed_bits: u32,
    },

    #[error("specfun: zero j_(nu,{k}) = {value} escapes its bracket [{lo}, {hi}]")]
    Bracket {
        k: usize,
        value: String,
        lo: String,
        hi: String,
    },

    #[error("{module}: consistency check failed: {detail}")]
    Consistency { module: &'static str, detail: String },

    #[error("control: target mode {k} is unreachable at this horizon (log magnitude {log_magnitude:.1} exceeds the budget of 700)")]
    Unreachable { k: usize, log_magnitude: f64 },

    #[error("{module}: mismatch: {detail}")]
    Mismatch { module: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn consistency(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Consistency {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn precision(module: &'static str, detail: impl Into<String>, needed_bits: u32) -> Self {
        Error::Precision {
            module,
            detail: detail.into(),
            needed_bits,
        }
    }

    /// Module that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Domain { module, .. }
            | Error::Precision { module, .. }
            | Error::Consistency { module, .. }
            | Error::Mismatch { module, .. } => module,
            Error::CriticalParameter { .. } => "spectrum",
            Error::Bracket { .. } => "specfun",
            Error::Unreachable { .. } => "control",
            Error::Config(_) => "config",
            Error::Io(_) | Error::Json(_) => "io",
        }
    }

    /// True for input validation problems, false for numerical guards and I/O.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::CriticalParameter { .. } | Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
