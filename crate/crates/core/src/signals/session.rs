//! Bar-shape families: Asia expansion bars, liquidity grabs, and volume
//! spikes / dry-ups.

use serde::{Deserialize, Serialize};

use super::{Direction, Family, SignalError, SignalEvent};
use crate::features::rolling::{mean, quantile};
use crate::features::{rolling_stat, RollingSpec, RollingStatistic};
use crate::market::{Price, TradingDay};

/// Bars whose range exceeds `multiple` × the prior `window`-bar mean range,
/// traded in the bar's own direction. Doji bars are skipped.
pub fn asia_expansion_signals(
    day: &TradingDay,
    multiple: f64,
    window: usize,
) -> Result<Vec<SignalEvent>, SignalError> {
    let spec = RollingSpec::new(RollingStatistic::MeanRange, window);
    let mr = rolling_stat(&day.bars, spec, day.tick)
        .map_err(|e| SignalError::Insufficient(e.to_string()))?;
    let mut out = Vec::new();
    for i in 0..day.last_index() {
        let Some(m) = mr[i] else { continue };
        let b = &day.bars[i];
        let range = day.pts(b.range());
        if range > multiple * m {
            if let Some(dir) = Direction::of_bar(b.direction()) {
                out.push(
                    SignalEvent::new(Family::AsiaExpansion, day.date, i, dir)
                        .with("range", range)
                        .with("mean_range", m)
                        .with("multiple", multiple),
                );
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Lookback {
    SessionExtreme,
    Bars(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GrabMode {
    Fade,
    Continuation,
}

/// A bar that pierces the prior extreme and closes back inside it. FADE
/// trades against the pierce, CONTINUATION with it. Both sides are checked
/// on every bar.
pub fn liquidity_grab_signals(
    day: &TradingDay,
    lookback: Lookback,
    mode: GrabMode,
) -> Vec<SignalEvent> {
    let family = match mode {
        GrabMode::Fade => Family::LiquidityGrabFade,
        GrabMode::Continuation => Family::LiquidityGrabCont,
    };
    let bars = &day.bars;
    let mut out = Vec::new();
    for i in 1..day.last_index() {
        let from = match lookback {
            Lookback::SessionExtreme => 0,
            Lookback::Bars(n) if n >= 1 && i >= n => i - n,
            Lookback::Bars(_) => continue,
        };
        let prior = &bars[from..i];
        let pmax = prior.iter().map(|b| b.high).max().unwrap();
        let pmin = prior.iter().map(|b| b.low).min().unwrap();
        let b = &bars[i];
        // Pierce direction is the side that was swept.
        let mut push = |pierce: Direction, level: Price| {
            let dir = match mode {
                GrabMode::Fade => pierce.flip(),
                GrabMode::Continuation => pierce,
            };
            out.push(SignalEvent::new(family, day.date, i, dir).with("level", day.pts(level)));
        };
        if b.high > pmax && b.close < pmax {
            push(Direction::Long, pmax);
        }
        if b.low < pmin && b.close > pmin {
            push(Direction::Short, pmin);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VolumeKind {
    Spike,
    Dryup,
}

/// Volume-ratio cutoffs frozen on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeCutoffs {
    pub high: f64,
    pub low: f64,
}

/// Bar volume over the mean of the prior `window` volumes of the same day.
pub fn volume_ratios(day: &TradingDay, window: usize) -> Vec<Option<f64>> {
    let vols: Vec<f64> = day.bars.iter().map(|b| b.volume as f64).collect();
    (0..vols.len())
        .map(|i| {
            if i < window || window == 0 {
                return None;
            }
            let m = mean(&vols[i - window..i]);
            (m > 0.0).then(|| vols[i] / m)
        })
        .collect()
}

/// Quantile cutoffs of the volume ratio pooled over `days`.
pub fn volume_ratio_cutoffs(
    days: &[&TradingDay],
    window: usize,
    high_q: f64,
    low_q: f64,
) -> Option<VolumeCutoffs> {
    let mut all: Vec<f64> = days
        .iter()
        .flat_map(|d| volume_ratios(d, window))
        .flatten()
        .collect();
    if all.is_empty() {
        return None;
    }
    all.sort_by(f64::total_cmp);
    Some(VolumeCutoffs {
        high: quantile(&all, high_q),
        low: quantile(&all, low_q),
    })
}

/// SPIKE: ratio strictly above the high cutoff, in the bar's direction.
/// DRYUP: ratio strictly below the low cutoff, against the bar's direction.
pub fn volume_signature_signals(
    day: &TradingDay,
    kind: VolumeKind,
    window: usize,
    cutoffs: VolumeCutoffs,
) -> Vec<SignalEvent> {
    let ratios = volume_ratios(day, window);
    let mut out = Vec::new();
    for i in 0..day.last_index() {
        let Some(r) = ratios[i] else { continue };
        let Some(bar_dir) = Direction::of_bar(day.bars[i].direction()) else {
            continue;
        };
        let ev = match kind {
            VolumeKind::Spike if r > cutoffs.high => {
                SignalEvent::new(Family::VolSpike, day.date, i, bar_dir)
            }
            VolumeKind::Dryup if r < cutoffs.low => {
                SignalEvent::new(Family::VolDryup, day.date, i, bar_dir.flip())
            }
            _ => continue,
        };
        out.push(ev.with("ratio", r));
    }
    out
}
