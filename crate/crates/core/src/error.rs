use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A function was evaluated outside the interval it is defined on.
    #[error("domain error: {what} is undefined at {at}")]
    Domain { what: String, at: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {estimate}, error {abs_err}")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        abs_err: f64,
    },

    #[error("derivative check failed at {at}: closed form {closed}, central difference {numeric}")]
    DerivativeMismatch { at: f64, closed: f64, numeric: f64 },
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>, at: f64) -> Self {
        Error::Domain {
            what: what.into(),
            at,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
