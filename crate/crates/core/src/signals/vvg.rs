//! Volatility-volume-gap day classifier and its directional strategies.

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use super::{Direction, Family, SignalError, SignalEvent};
use crate::features::rolling::quantile;
use crate::market::{day_primitives, DayPrimitives, TradingDay, OPENING_RANGE_BARS};

/// Pre-market observables for one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VvgMetrics {
    pub abs_first30: f64,
    pub abs_gap: f64,
    /// |first-bar volume − baseline| / baseline, baseline = mean first-bar
    /// volume of the prior days.
    pub volume_dev: f64,
}

/// Upper-tercile boundaries fixed on training days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VvgTerciles {
    pub first30: f64,
    pub gap: f64,
    pub volume: f64,
}

/// Metrics per day; `None` without a gap or without `baseline_days` prior days.
pub fn vvg_metrics(days: &[TradingDay], baseline_days: usize) -> Vec<Option<VvgMetrics>> {
    let firsts: Vec<f64> = days
        .iter()
        .map(|d| d.bars.first().map_or(0.0, |b| b.volume as f64))
        .collect();
    days.iter()
        .enumerate()
        .map(|(k, d)| {
            if k < baseline_days || baseline_days == 0 {
                return None;
            }
            let base = firsts[k - baseline_days..k].iter().sum::<f64>() / baseline_days as f64;
            let p = day_primitives(d).ok()?;
            let gap = p.overnight_gap?;
            (base > 0.0).then(|| VvgMetrics {
                abs_first30: d.pts(p.first30_return.abs()),
                abs_gap: d.pts(gap.abs()),
                volume_dev: (firsts[k] - base).abs() / base,
            })
        })
        .collect()
}

pub fn vvg_terciles(metrics: &[VvgMetrics]) -> Option<VvgTerciles> {
    if metrics.is_empty() {
        return None;
    }
    let cut = |f: fn(&VvgMetrics) -> f64| {
        let mut xs: Vec<f64> = metrics.iter().map(f).collect();
        xs.sort_by(f64::total_cmp);
        quantile(&xs, 2.0 / 3.0)
    };
    Some(VvgTerciles {
        first30: cut(|m| m.abs_first30),
        gap: cut(|m| m.abs_gap),
        volume: cut(|m| m.volume_dev),
    })
}

/// Flag iff all three metrics are strictly above their boundaries.
pub fn vvg_flags(metrics: &[Option<VvgMetrics>], t: &VvgTerciles) -> Vec<bool> {
    metrics
        .iter()
        .map(|m| {
            m.is_some_and(|m| {
                m.abs_first30 > t.first30 && m.abs_gap > t.gap && m.volume_dev > t.volume
            })
        })
        .collect()
}

pub const MIN_CLASSIFY_DAYS: usize = 30;

/// In-sample classification of `days`: terciles from the same days.
pub fn vvg_classify(
    days: &[TradingDay],
    baseline_days: usize,
) -> Result<(Vec<bool>, VvgTerciles), SignalError> {
    let metrics = vvg_metrics(days, baseline_days);
    let known: Vec<VvgMetrics> = metrics.iter().flatten().copied().collect();
    if known.len() < MIN_CLASSIFY_DAYS {
        return Err(SignalError::Insufficient(format!(
            "{} days with a {baseline_days}-day baseline, need {MIN_CLASSIFY_DAYS}",
            known.len()
        )));
    }
    let t = vvg_terciles(&known).expect("non-empty");
    Ok((vvg_flags(&metrics, &t), t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VvgMode {
    Reversal,
    Continuation,
    CloseFade,
}

/// CONTINUATION: every bar after the opening range that closes in the
/// first-30-minute direction. REVERSAL: every such bar that makes a new
/// session extreme in that direction and closes against it, traded against
/// the move. CLOSE_FADE: one event at `close_fade_time` against the move
/// since the open.
pub fn vvg_strategy_signals(
    day: &TradingDay,
    flagged: bool,
    prims: &DayPrimitives,
    mode: VvgMode,
    close_fade_time: NaiveTime,
) -> Result<Vec<SignalEvent>, SignalError> {
    if !flagged {
        return Ok(vec![]);
    }
    let last = day.last_index();
    if mode == VvgMode::CloseFade {
        let i = day
            .index_at(close_fade_time)
            .filter(|&i| i < last)
            .ok_or(SignalError::EntryTimeOutsideSession(close_fade_time))?;
        let so_far = day.bars[i].close - day.bars[0].open;
        return Ok(Direction::of(so_far)
            .map(|d| {
                vec![
                    SignalEvent::new(Family::VvgCloseFade, day.date, i, d.flip())
                        .with("move", day.pts(so_far)),
                ]
            })
            .unwrap_or_default());
    }
    let Some(dir) = Direction::of(prims.first30_return) else {
        return Ok(vec![]);
    };
    let first30 = day.pts(prims.first30_return);
    let mut out = Vec::new();
    for i in OPENING_RANGE_BARS..last {
        let b = &day.bars[i];
        let Some(bar_dir) = Direction::of_bar(b.direction()) else {
            continue;
        };
        let ev = match mode {
            VvgMode::Continuation if bar_dir == dir => {
                SignalEvent::new(Family::VvgContinuation, day.date, i, dir)
            }
            VvgMode::Reversal if bar_dir != dir => {
                let new_extreme = match dir {
                    Direction::Long => b.high > prims.session_high_so_far[i - 1],
                    Direction::Short => b.low < prims.session_low_so_far[i - 1],
                };
                if !new_extreme {
                    continue;
                }
                SignalEvent::new(Family::VvgReversal, day.date, i, dir.flip())
            }
            _ => continue,
        };
        out.push(ev.with("first30", first30));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{day_primitives, Price, SessionKind};
    use crate::signals::testutil::day_from;
    use rand::{Rng, SeedableRng};

    #[test]
    fn independent_uniform_metrics_activate_about_one_in_27() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m: Vec<Option<VvgMetrics>> = (0..10_000)
            .map(|_| {
                Some(VvgMetrics {
                    abs_first30: rng.random(),
                    abs_gap: rng.random(),
                    volume_dev: rng.random(),
                })
            })
            .collect();
        let known: Vec<VvgMetrics> = m.iter().flatten().copied().collect();
        let t = vvg_terciles(&known).unwrap();
        let rate = vvg_flags(&m, &t).iter().filter(|&&f| f).count() as f64 / 10_000.0;
        assert!((rate - 1.0 / 27.0).abs() < 0.005, "{rate}");
    }

    #[test]
    fn identical_metrics_flag_nothing() {
        let m = vec![
            Some(VvgMetrics {
                abs_first30: 5.0,
                abs_gap: 3.0,
                volume_dev: 0.2
            });
            100
        ];
        let t = vvg_terciles(&m.iter().flatten().copied().collect::<Vec<_>>()).unwrap();
        assert!(vvg_flags(&m, &t).iter().all(|f| !f));
    }

    #[test]
    fn single_jointly_extreme_day_flagged() {
        // Metric ranks are arranged so each metric's top third is a different
        // block of days except day 77, which tops all three.
        let m: Vec<Option<VvgMetrics>> = (0..100)
            .map(|i| {
                let f = i as f64;
                Some(if i == 77 {
                    VvgMetrics {
                        abs_first30: 1000.0,
                        abs_gap: 1000.0,
                        volume_dev: 1000.0,
                    }
                } else {
                    VvgMetrics {
                        abs_first30: f,
                        abs_gap: ((i + 33) % 100) as f64,
                        volume_dev: ((i + 66) % 100) as f64,
                    }
                })
            })
            .collect();
        let t = vvg_terciles(&m.iter().flatten().copied().collect::<Vec<_>>()).unwrap();
        let flags = vvg_flags(&m, &t);
        let flagged: Vec<usize> = flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(flagged, vec![77]);
    }

    #[test]
    fn classify_needs_thirty_days() {
        let days: Vec<TradingDay> = (0..40)
            .map(|_| crate::signals::testutil::flat(SessionKind::Rth, 78))
            .collect();
        assert!(vvg_classify(&days, 20).is_err());
    }

    /// Up 12 over the range, then an up bar and a rejection from a new high.
    fn up_day() -> TradingDay {
        let mut bars: Vec<(i64, i64, i64, i64)> = (0..6)
            .map(|i| (100 + 2 * i, 102 + 2 * i, 99 + 2 * i, 102 + 2 * i))
            .collect();
        bars.push((112, 114, 111, 113)); // 6: new high, up close
        bars.push((113, 118, 110, 111)); // 7: new high, closes down
        bars.extend(vec![(111, 112, 110, 111); 70]);
        day_from(SessionKind::Rth, &bars)
    }

    #[test]
    fn continuation_and_reversal_directions() {
        let d = up_day();
        let p = day_primitives(&d).unwrap();
        assert_eq!(p.first30_return, Price(12));
        let t = NaiveTime::from_hms_opt(15, 30, 0).unwrap();
        let c = vvg_strategy_signals(&d, true, &p, VvgMode::Continuation, t).unwrap();
        assert_eq!(
            c.iter()
                .map(|e| (e.bar_index, e.direction))
                .collect::<Vec<_>>(),
            vec![(6, Direction::Long)]
        );
        let r = vvg_strategy_signals(&d, true, &p, VvgMode::Reversal, t).unwrap();
        assert_eq!(
            r.iter()
                .map(|e| (e.bar_index, e.direction))
                .collect::<Vec<_>>(),
            vec![(7, Direction::Short)]
        );
        assert!(
            vvg_strategy_signals(&d, false, &p, VvgMode::Continuation, t)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn close_fade_against_up_day() {
        let mut bars = vec![(100, 101, 99, 100); 78];
        bars[72] = (100, 141, 100, 140);
        let d = day_from(SessionKind::Rth, &bars);
        let p = day_primitives(&d).unwrap();
        let t = NaiveTime::from_hms_opt(15, 30, 0).unwrap();
        let ev = vvg_strategy_signals(&d, true, &p, VvgMode::CloseFade, t).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].bar_index, ev[0].direction), (72, Direction::Short));
        assert_eq!(ev[0].meta["move"], 40.0);
    }
}
