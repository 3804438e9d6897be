use thiserror::Error;

/// Errors raised by the simulator, the oracles and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape mismatch, bad parameter).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Name lookup in one of the catalogs failed.
    #[error("unknown {kind} `{name}`; known: {known}")]
    Unknown {
        kind: &'static str,
        name: String,
        known: String,
    },

    /// Argument outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A symbol evaluated to a non-finite value on the grid.
    #[error("symbol `{name}` is not finite at xi = {xi}")]
    NonFiniteSymbol { name: String, xi: f64 },

    /// Time stepping produced non-finite values.
    #[error("numerical blow-up at t = {t}: {what}")]
    BlowUp { t: f64, what: String },

    /// An iterative method or limit detection failed.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A config file could not be parsed or failed a semantic check.
    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    /// A file on disk does not follow the expected format.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code for this error class: 1 config, 2 numerical, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Unknown { .. } | Error::Contract(_) => 1,
            Error::Domain(_)
            | Error::NonFiniteSymbol { .. }
            | Error::BlowUp { .. }
            | Error::NoConvergence(_) => 2,
            Error::Format(_) | Error::Io(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
