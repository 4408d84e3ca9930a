//! Overnight gap families: fade toward the prior close, or short
//! continuation of a gap-down confirmed by overnight Kalman velocity.

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};

use super::{Direction, Family, SignalError, SignalEvent};
use crate::market::{DayPrimitives, Price, TradingDay};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GapVariant {
    FillFade,
    ContShort,
}

/// The signal bar is the bar opening at `entry_time`. FILL_FADE needs
/// |gap| ≥ `min_gap`; CONT_SHORT needs a negative gap and |velocity| above
/// the threshold.
pub fn gap_signals(
    day: &TradingDay,
    prims: &DayPrimitives,
    variant: GapVariant,
    entry_time: NaiveTime,
    kalman_v: Option<f64>,
    kalman_threshold: f64,
    min_gap: Price,
) -> Result<Vec<SignalEvent>, SignalError> {
    let idx = day
        .index_at(entry_time)
        .filter(|&i| i < day.last_index())
        .ok_or(SignalError::EntryTimeOutsideSession(entry_time))?;
    let Some(gap) = prims.overnight_gap else {
        return Ok(vec![]);
    };
    let ev = match variant {
        GapVariant::FillFade => {
            let Some(dir) = Direction::of(gap) else {
                return Ok(vec![]);
            };
            if gap.abs() < min_gap {
                return Ok(vec![]);
            }
            SignalEvent::new(Family::GapFillFade, day.date, idx, dir.flip())
        }
        GapVariant::ContShort => {
            let Some(v) = kalman_v else { return Ok(vec![]) };
            if !(gap < Price::ZERO && v.abs() > kalman_threshold) {
                return Ok(vec![]);
            }
            SignalEvent::new(Family::GapContShort, day.date, idx, Direction::Short)
                .with("kalman_v", v)
        }
    };
    Ok(vec![ev.with("gap", day.pts(gap))])
}
