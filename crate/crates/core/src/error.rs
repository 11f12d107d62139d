use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("level {level} is outside the tabulated range (max supported level {max})")]
    LevelOutOfRange { level: u32, max: u32 },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid condition parameters: {0}")]
    InvalidParams(String),

    #[error("distribution kind `{0}` cannot be sampled bit by bit")]
    UnsupportedSampling(&'static str),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid clique chain spec: {0}")]
    InvalidSpec(String),

    #[error("profile covers {profile} agents but the graph has {graph}")]
    ProfileMismatch { profile: usize, graph: usize },

    #[error(
        "bit budget of {budget} positions exhausted comparing agents {a} and {b} in round {round}"
    )]
    BitBudgetExceeded {
        budget: u32,
        a: usize,
        b: usize,
        round: u64,
    },

    #[error("level search for agent {agent} passed the limit {limit}; the condition (U) decay is violated")]
    LevelSearchOverflow { agent: usize, limit: u32 },

    #[error("oracle supports at most {cap} active agents, got {got}")]
    TooLarge { cap: usize, got: usize },

    #[error("winner rule `max` is only defined for all-fair-bits profiles")]
    WinnerRule,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
