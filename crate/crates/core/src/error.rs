use thiserror::Error;

use crate::lattice::{Interval, StepIndex};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("truncation not converged: lowest {kept} levels moved by {drift:.3e} between raw dimensions {raw} and {raw_plus}")]
    Truncation {
        kept: usize,
        raw: usize,
        raw_plus: usize,
        drift: f64,
    },

    #[error("gap collapse at step {step}: compressed gap {gap:.6e}")]
    GapCollapse { step: StepIndex, gap: f64 },

    #[error("series divergence at step {step}: order {order}, last term norm {norm:.3e}")]
    SeriesDivergence {
        step: StepIndex,
        order: usize,
        norm: f64,
    },

    #[error("ad-series on {interval} did not converge at step {step} within {order} terms")]
    AdSeriesDivergence {
        step: StepIndex,
        interval: Interval,
        order: usize,
    },

    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: StepIndex, what: String },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the flow itself (the run completed enough to say
    /// "not certified"), as opposed to bad input.
    pub fn is_certification_failure(&self) -> bool {
        matches!(
            self,
            Error::GapCollapse { .. }
                | Error::SeriesDivergence { .. }
                | Error::AdSeriesDivergence { .. }
                | Error::Invariant { .. }
        )
    }
}
