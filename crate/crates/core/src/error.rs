use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the {side} m network area")]
    OutOfArea { x: f64, y: f64, side: f64 },

    #[error("cell index {index} out of range (grid has {cells} cells)")]
    InvalidCell { index: usize, cells: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("drone speed must be positive to derive a turning angle, got {0}")]
    ZeroSpeed(f64),

    #[error("action set size must be odd and at least 3, got {0}")]
    InvalidActionCount(usize),

    #[error("user {0} already has a pending packet session")]
    SessionPending(usize),

    #[error("packet session of user {0} has not completed")]
    SessionIncomplete(usize),

    #[error("packet session of user {0} completed in zero time")]
    ZeroTransmissionTime(usize),

    #[error("no drone base stations to associate with")]
    NoDrones,

    #[error("drone {0} has no active users")]
    IdlePlayer(usize),

    #[error("empty sample set")]
    EmptySamples,

    #[error("no completed packets in the selected cells")]
    NoPackets,

    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
