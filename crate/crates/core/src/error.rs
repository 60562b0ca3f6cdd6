//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while evaluating a protocol.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A covariance matrix violates the uncertainty principle.
    #[error("non-physical state: minimum symplectic eigenvalue {min_nu} < 1")]
    NonPhysicalState { min_nu: f64 },

    /// An iterative numerical routine failed to converge.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// An argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Conditioning on a quadrature whose variance is numerically zero.
    #[error("singular conditioning: measured quadrature variance below threshold")]
    SingularConditioning,

    /// Adaptive quadrature exhausted its budget before reaching tolerance.
    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    /// The requested NLA gain drives the effective channel out of its
    /// physical ranges.
    #[error("unphysical effective channel: {0}")]
    UnphysicalEffectiveChannel(String),

    /// No (eta, T_B, N_B) triple reproduces the target covariance matrix
    /// within the allowed ranges.
    #[error("no feasible Bob-station solution: {0}")]
    NoFeasibleSolution(String),

    /// A failure inside a composite pipeline, annotated with the stage that
    /// produced it.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
