use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid episode config: {0}")]
    Invalid(String),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error("episode already finished; reset before stepping")]
    Finished,
    #[error("elapsed time must be non-negative, got {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ActionError {
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("action `{0}` requires x and y")]
    MissingCoordinates(String),
    #[error("action `{name}` coordinates ({x}, {y}) out of range")]
    OutOfRange { name: String, x: i64, y: i64 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown {role} agent `{name}` (known: {known})")]
pub struct UnknownAgent {
    pub role: &'static str,
    pub name: String,
    pub known: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("l_x / a = {0} is not an integer")]
    NonIntegralBlocks(f64),
    #[error("invalid search grid: {0}")]
    InvalidGrid(String),
    #[error("{evaders} evaders exceed {blocks} blocks; capture probability would exceed 1")]
    TooManyEvaders { evaders: u64, blocks: u64 },
    #[error("probability {0} outside (0, 1]")]
    InvalidProbability(f64),
    #[error("kill time {kill_time:.3} s is not shorter than the episode ({t_final} s)")]
    KillTimeExceedsEpisode { kill_time: f64, t_final: f64 },
    #[error("invalid theory input: {0}")]
    InvalidInput(String),
}
