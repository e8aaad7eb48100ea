use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input parameter is outside its allowed range.
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: String, reason: String },

    /// A node, module or tuple type name that does not exist.
    #[error("unknown {what} `{name}`")]
    Lookup { what: &'static str, name: String },

    /// Declared structure disagrees with itself (e.g. a loop over a missing edge).
    #[error("inconsistent model: {0}")]
    Inconsistency(String),

    #[error("infeasible placement: node `{node}` load {load} MIPS exceeds capacity {capacity} MIPS")]
    Infeasible {
        node: String,
        load: f64,
        capacity: f64,
    },

    /// Inputs are individually valid but cannot be simulated together.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A bookkeeping invariant of the simulator failed.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn lookup(what: &'static str, name: impl Into<String>) -> Self {
        Error::Lookup {
            what,
            name: name.into(),
        }
    }

    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter { .. } => "parameter",
            Error::Lookup { .. } => "lookup",
            Error::Inconsistency(_) => "inconsistency",
            Error::Infeasible { .. } => "infeasible",
            Error::Configuration(_) => "configuration",
            Error::Internal(_) => "internal",
        }
    }
}
