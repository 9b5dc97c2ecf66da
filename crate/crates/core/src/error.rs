use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is valid but the requested quantity is undefined for it
    /// (zero variance, empty herald slice, zero singles rate, ...).
    #[error("degenerate condition: {0}")]
    Degenerate(String),

    #[error("ill-conditioned detector model: {0}")]
    Conditioning(String),

    /// More photon numbers were requested than the click space can resolve.
    #[error("truncation n_max = {n_max} exceeds the number of time bins K = {bins}")]
    Truncation { n_max: usize, bins: usize },

    #[error("{bins} time bins exceed the subset-enumeration limit of {limit}")]
    Complexity { bins: usize, limit: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("data error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<usize>, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn data(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Data {
            line,
            message: message.into(),
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Data { .. } | Error::Io { .. } => 3,
            Error::Domain(_) => 2,
            Error::Degenerate(_)
            | Error::Conditioning(_)
            | Error::Truncation { .. }
            | Error::Complexity { .. }
            | Error::Numerical(_) => 4,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Degenerate(_) => "degenerate",
            Error::Conditioning(_) => "conditioning",
            Error::Truncation { .. } => "truncation",
            Error::Complexity { .. } => "complexity",
            Error::Numerical(_) => "numerical",
            Error::Config { .. } => "config",
            Error::Data { .. } => "data",
            Error::Io { .. } => "io",
        }
    }
}
