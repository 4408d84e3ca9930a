//! Trade statistics, the five-criteria gate, placement permutation test and
//! the expanding-window walk-forward driver.

pub mod gate;
pub mod metrics;
pub mod permutation;
pub mod walkforward;

pub use gate::{
    validate, validate_inputs, year_stability, Criterion, GateConfig, GateInputs, Verdict,
};
pub use metrics::{summary_metrics, t_statistic, EvalMetrics, YearMetrics};
pub use permutation::{permutation_test, permutation_test_grouped, PermutationGroup};
pub use walkforward::{
    plan_folds, select_grid_point, walk_forward, Fold, Phase, WalkForwardPlan, WalkForwardResult,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("need at least two calendar years, have {0}")]
    TooFewYears(usize),
    #[error("permutation test needs at least {min} iterations, got {got}")]
    TooFewIterations { min: usize, got: usize },
    #[error("no observed trades to permute")]
    NoTrades,
    #[error("no admissible placements for exit {0}")]
    NoPlacements(String),
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("{0}")]
    Evaluation(String),
}
