use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {wavelength_nm:.3} nm outside the dispersion model window [{min_nm}, {max_nm}] nm")]
    Domain {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },

    #[error("no guided LP01 mode at {wavelength_nm:.3} nm (V = {v_number:.4})")]
    ModeCutoff { wavelength_nm: f64, v_number: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("only {found} fringe peaks detected, at least 3 required")]
    InsufficientFringes { found: usize },

    #[error("phase-mismatch gradient vanishes; contour angle undefined")]
    DegenerateGradient,

    #[error("joint spectrum is identically zero")]
    DegenerateInput,

    #[error("{quantity} undefined: {reason}")]
    UndefinedRatio {
        quantity: &'static str,
        reason: &'static str,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("calibration failed: missing measured seed wavelength for setpoints {setpoints:?}")]
    Calibration { setpoints: Vec<f64> },

    #[error("scans do not overlap: {0}")]
    IncompatibleScans(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    /// Coarse classification used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. } | Error::Parse { .. } => ErrorKind::Config,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Computation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Computation,
    Io,
}

pub type Result<T> = std::result::Result<T, Error>;
