use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gain out of range for {pair}: pathloss {pathloss_db:.2} dB gives a gain above 1")]
    GainOutOfRange { pair: String, pathloss_db: f64 },

    #[error(
        "state space exceeds the cap of {cap} states on channel {channel}; use maximal-only mode"
    )]
    StateSpaceOverflow { channel: usize, cap: usize },

    #[error("state lists do not align: {rates} rate entries vs {states} chain states")]
    MismatchedStates { rates: usize, states: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {inner}")]
    Stage { stage: &'static str, inner: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Innermost error, looking through stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { inner, .. } => inner.root(),
            other => other,
        }
    }
}

/// Labels an error with the pipeline stage that produced it.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage, inner: Box::new(e) })
    }
}
