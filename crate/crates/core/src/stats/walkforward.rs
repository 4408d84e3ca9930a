//! Expanding-window walk-forward by calendar year.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::t_statistic;
use super::StatsError;
use crate::execution::TradeRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_years: Vec<i32>,
    pub test_year: i32,
}

impl Fold {
    pub fn years(&self, phase: Phase) -> Vec<i32> {
        match phase {
            Phase::Train => self.train_years.clone(),
            Phase::Test => vec![self.test_year],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardPlan {
    pub folds: Vec<Fold>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

/// Train on all years before each test year, from the second year on.
pub fn plan_folds(years: &[i32]) -> Result<WalkForwardPlan, StatsError> {
    let ys: Vec<i32> = years
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ys.len() < 2 {
        return Err(StatsError::TooFewYears(ys.len()));
    }
    Ok(WalkForwardPlan {
        folds: (1..ys.len())
            .map(|k| Fold {
                train_years: ys[..k].to_vec(),
                test_year: ys[k],
            })
            .collect(),
    })
}

/// Training score of a grid point: (t of net points, trade count).
pub type Score = (Option<f64>, usize);

pub fn score(trades: &[TradeRecord]) -> Score {
    let nets: Vec<f64> = trades.iter().map(|t| t.net_pts()).collect();
    (t_statistic(&nets), nets.len())
}

/// Highest t; ties go to the larger n, then to the earlier grid point.
/// Undefined t ranks below every defined t.
pub fn select_grid_point(scores: &[Score]) -> Option<usize> {
    let key = |s: &Score| (s.0.unwrap_or(f64::NEG_INFINITY), s.1);
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) => {
                let (bt, bn) = key(&scores[b]);
                let (t, n) = key(s);
                if t > bt || (t == bt && n > bn) {
                    best = Some(i);
                }
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkForwardResult {
    pub plan: WalkForwardPlan,
    /// Chosen grid index per fold.
    pub chosen: Vec<usize>,
    pub train_scores: Vec<Vec<Score>>,
    /// Test-year trades per fold under the chosen point.
    pub fold_trades: Vec<Vec<TradeRecord>>,
}

impl WalkForwardResult {
    pub fn oos_trades(&self) -> Vec<TradeRecord> {
        self.fold_trades.iter().flatten().cloned().collect()
    }
}

/// Runs every grid point on each fold's training years, picks one with
/// [`select_grid_point`], and only then evaluates the chosen point on the
/// test year. `eval(fold, grid_index, phase)` must only read data of the
/// years `fold.years(phase)`.
pub fn walk_forward<F>(
    years: &[i32],
    grid_len: usize,
    eval: F,
) -> Result<WalkForwardResult, StatsError>
where
    F: Fn(&Fold, usize, Phase) -> Result<Vec<TradeRecord>, StatsError> + Sync,
{
    if grid_len == 0 {
        return Err(StatsError::EmptyGrid);
    }
    let plan = plan_folds(years)?;
    let mut chosen = Vec::new();
    let mut train_scores = Vec::new();
    let mut fold_trades = Vec::new();
    for fold in &plan.folds {
        let scores: Vec<Score> = (0..grid_len)
            .into_par_iter()
            .map(|g| eval(fold, g, Phase::Train).map(|t| score(&t)))
            .collect::<Result<_, _>>()?;
        let g = select_grid_point(&scores).expect("non-empty grid");
        fold_trades.push(eval(fold, g, Phase::Test)?);
        chosen.push(g);
        train_scores.push(scores);
    }
    Ok(WalkForwardResult {
        plan,
        chosen,
        train_scores,
        fold_trades,
    })
}
