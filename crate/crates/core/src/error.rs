use std::io;

use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Extents, ranks or channel counts that do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// A backend, encoding or activation cannot supply what a task needs.
    #[error("capability error: {0}")]
    Capability(String),

    /// Bad input values (non-finite coordinates, out-of-range targets, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Contract violations such as calling backward on a non-scalar node.
    #[error("contract error: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    /// Non-finite loss or a metric that cannot be computed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed FTNR dumps or checkpoints.
    #[error("format error: {0}")]
    Format(String),

    #[error("version mismatch: expected {expected}, found {found}")]
    Version { expected: u16, found: u16 },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the `finr` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) | Error::Image(_) | Error::Input(_) => 2,
            Error::Capability(_) => 3,
            Error::Numeric(_) => 4,
            Error::Shape(_)
            | Error::Contract(_)
            | Error::Format(_)
            | Error::Version { .. } => 2,
        }
    }
}

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Shape(format!($($arg)*))
    };
}
pub(crate) use shape_err;
