use thiserror::Error;

use crate::environment::ValidationReport;

pub type Result<T, E = ZrpError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ZrpError {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("environment failed validation: {0}")]
    Validation(ValidationReport),

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("series diverges: fugacity {phi} is not below the radius bound {phi_star}")]
    Divergence { phi: f64, phi_star: f64 },

    #[error("value {value} outside the supported range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },

    #[error("state space too large: {states} states exceeds the limit {limit}")]
    StateSpace { states: u128, limit: u128 },

    #[error("distribution not normalised: total mass {0}")]
    Normalization(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver configuration error: {0}")]
    Config(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<ZrpError>,
    },
}

impl ZrpError {
    /// Wraps an error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        ZrpError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            ZrpError::Divergence { .. }
            | ZrpError::Solver(_)
            | ZrpError::Singularity(_)
            | ZrpError::StateSpace { .. } => true,
            ZrpError::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
