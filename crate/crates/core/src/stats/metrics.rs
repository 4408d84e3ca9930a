//! Per-trade summary statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::execution::{aggregate_by_year, TradeRecord};

/// One-sample t of the mean against zero with the n−1 sample deviation;
/// `None` for n < 2 or zero variance.
pub fn t_statistic(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let sd = (ss / (n as f64 - 1.0)).sqrt();
    (sd > 0.0).then(|| m / (sd / (n as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearMetrics {
    pub n: usize,
    pub mean_net: Option<f64>,
    pub t_stat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub mean_gross: Option<f64>,
    pub mean_net: Option<f64>,
    pub t_stat: Option<f64>,
    pub win_rate: Option<f64>,
    /// Σ winning nets / |Σ losing nets|; `None` without losing trades.
    pub profit_factor: Option<f64>,
    /// Per-trade mean / std of nets.
    pub sharpe: Option<f64>,
    pub per_year: BTreeMap<i32, YearMetrics>,
    pub permutation_p: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn summary_metrics(trades: &[TradeRecord]) -> EvalMetrics {
    let nets: Vec<f64> = trades.iter().map(|t| t.net_pts()).collect();
    let gross: Vec<f64> = trades.iter().map(|t| t.gross_pts()).collect();
    let n = trades.len();
    let wins: f64 = nets.iter().filter(|&&x| x > 0.0).sum();
    let losses: f64 = nets.iter().filter(|&&x| x < 0.0).sum();
    let sharpe = if n >= 2 {
        let m = mean(&nets).unwrap();
        let sd = (nets.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        (sd > 0.0).then(|| m / sd)
    } else {
        None
    };
    let per_year = aggregate_by_year(trades)
        .into_iter()
        .map(|(y, ts)| {
            let ys: Vec<f64> = ts.iter().map(|t| t.net_pts()).collect();
            (
                y,
                YearMetrics {
                    n: ys.len(),
                    mean_net: mean(&ys),
                    t_stat: t_statistic(&ys),
                },
            )
        })
        .collect();
    EvalMetrics {
        n,
        mean_gross: mean(&gross),
        mean_net: mean(&nets),
        t_stat: t_statistic(&nets),
        win_rate: (n > 0).then(|| nets.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64),
        profit_factor: (losses < 0.0).then(|| wins / -losses),
        sharpe,
        per_year,
        permutation_p: None,
    }
}
