use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    /// Two relay-to-destination rates coincide, so the partial-fraction
    /// expansion has a repeated root.
    #[error(
        "relays {first} and {second} have equal relay-to-destination rates; \
         use RelaySumMethod::Perturbed or RelaySumMethod::Numerical"
    )]
    RateTie { first: usize, second: usize },

    #[error("closed-form subset enumeration refused for {relays} relays (limit {limit})")]
    TooManyRelays { relays: usize, limit: usize },

    #[error("conditioning event has zero probability: {0}")]
    ImpossibleConditioning(String),

    #[error("outage probability {0} makes the slot cost diverge")]
    Divergence(f64),

    #[error("stationary solver did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
