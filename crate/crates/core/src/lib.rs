//! Security analysis for continuous-variable QKD with Gaussian post-selection.
//!
//! The crate computes asymptotic secret-key rates (direct and reverse
//! reconciliation) for coherent-state homodyne protocols over noisy Gaussian
//! channels. Post-selection is handled through its equivalent
//! entanglement-based circuit: a virtual noiseless linear amplifier followed
//! by a two-mode squeezer and an EPR-ancilla beamsplitter inside Bob's
//! station, all solved from the measured covariance matrices.
//!
//! Everything numerical is generic over the scalar type (`f32`/`f64`); the
//! `*64` aliases at the crate root are the concrete types the CLI uses.

pub mod error;
pub mod filter;
pub mod gaussian;
pub mod keyrate;
mod linalg;
pub mod montecarlo;
pub mod nla;
pub mod optim;
pub mod protocol;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 covariance matrix.
pub type CovarianceMatrix64 = gaussian::CovarianceMatrix<f64>;
/// f64 symmetric two-mode state.
pub type TwoModeSymmetricCM64 = gaussian::TwoModeSymmetricCM<f64>;
/// f64 Gaussian channel.
pub type GaussianChannel64 = protocol::GaussianChannel<f64>;
/// f64 protocol parameters.
pub type ProtocolParams64 = protocol::ProtocolParams<f64>;
/// f64 post-selection filter.
pub type PostSelectionFilter64 = filter::PostSelectionFilter<f64>;
/// f64 joint distribution.
pub type JointDistribution64 = filter::JointDistribution<f64>;
/// f64 key-rate result.
pub type KeyRateResult64 = keyrate::KeyRateResult<f64>;
/// f64 search space.
pub type SearchSpace64 = keyrate::SearchSpace<f64>;
