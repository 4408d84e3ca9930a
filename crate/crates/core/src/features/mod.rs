//! Per-bar estimators consumed by the signal families.

pub mod gmm;
pub mod hurst;
pub mod kalman;
pub mod markov;
pub mod ou;
pub mod rolling;

pub use gmm::{gmm_fit, regime_labels, RegimeFeatures, RegimeModel};
pub use hurst::hurst_exponent;
pub use kalman::{kalman_velocity, velocity_zscore, KalmanState};
pub use markov::markov_transition_prob;
pub use ou::{ou_fit, ou_zscore, OuFit};
pub use rolling::{
    quantile, rolling_stat, true_range, volume_zscore, RollingSpec, RollingStatistic,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("window {0} is below the minimum")]
    WindowTooSmall(usize),
    #[error("series too short: need {need}, have {have}")]
    TooShort { need: usize, have: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite input")]
    NonFinite,
    #[error("series has zero dispersion")]
    ZeroDispersion,
    #[error("half-life undefined: process not mean reverting")]
    UndefinedHalfLife,
    #[error("mixture component collapsed in {attempts} attempts")]
    VarianceCollapse { attempts: u64 },
}
