use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid pulse instant at index {index}: {reason}")]
    InvalidSequence { index: usize, reason: String },

    #[error("thermal weight diverges at omega = 0 for temperature {temperature}")]
    DivergentWeight { temperature: f64 },

    #[error("closed form has a pole at z = {z} (n = {n})")]
    Pole { n: usize, z: f64 },

    #[error(
        "quadrature did not converge within {panels} panels: estimate {estimate:e}, error bound {error_bound:e}"
    )]
    Quadrature {
        estimate: f64,
        error_bound: f64,
        panels: usize,
    },

    #[error("error stays below {epsilon:e} over [{t_min:e}, {t_max:e}]; upper end of the scan range reached")]
    RangeExhausted {
        epsilon: f64,
        t_min: f64,
        t_max: f64,
    },

    #[error("pulse-count search exhausted at n = {n_max} without reaching the target")]
    SearchExhausted { n_max: usize },

    #[error("time step {dt} aliases the spectrum (need dt <= {limit})")]
    Aliasing { dt: f64, limit: f64 },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips `AtTime` context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
