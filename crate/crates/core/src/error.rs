use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("({u}, {v}) lies outside the domain of the {chart} chart")]
    Domain { chart: String, u: f64, v: f64 },

    #[error("{chart} chart is degenerate at ({u}, {v}): |f_u x f_v| = {cross:e}")]
    DegenerateChart {
        chart: String,
        u: f64,
        v: f64,
        cross: f64,
    },

    #[error("sigma profile is singular at t = {t}: sigma = {sigma:e}")]
    SingularProfile { t: f64, sigma: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("integration failed at t = {t}: {source}")]
    Integration {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trajectory has {len} samples, at least {min} are required")]
    TooFewSamples { len: usize, min: usize },

    #[error("zero-speed curve sample at index {index}")]
    ZeroSpeed { index: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid scenario field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Context { source, .. } => source.is_validation(),
            e => matches!(
                e,
                Error::InvalidParameter { .. } | Error::Parse(_) | Error::Validation { .. } | Error::Io { .. }
            ),
        }
    }

    /// Prefix the error with a description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Wrap `self` with the time at which an integration step failed.
    /// Already-wrapped errors keep their original time.
    pub(crate) fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::Integration { .. } => e,
            e @ Error::NonFinite { .. } => e,
            e => Error::Integration {
                t,
                source: Box::new(e),
            },
        }
    }
}
