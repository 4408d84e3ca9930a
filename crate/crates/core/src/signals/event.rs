//! Post-release drift on high-impact economic events.

use super::{Direction, Family, SignalError, SignalEvent};
use crate::market::{EconEvent, TradingDay};

/// Bars 1–5 after a release hold the spike; measurement starts at bar 6.
pub const MIN_EVENT_OFFSET: usize = 6;
pub const RELEASE_BARS: usize = 5;

/// For each release inside the session, the release bar `r` is the first
/// bar opening at or after the release. The direction is the sign of
/// close(r+4) − open(r); the signal bar is `r + offset`.
pub fn event_drift_signals(
    day: &TradingDay,
    events: &[EconEvent],
    offset: usize,
) -> Result<Vec<SignalEvent>, SignalError> {
    if offset < MIN_EVENT_OFFSET {
        return Err(SignalError::OffsetTooSmall(offset));
    }
    let last = day.last_index();
    let mut out = Vec::new();
    for ev in events {
        let Some(r) = day.bars.iter().position(|b| b.ts >= ev.ts) else {
            continue;
        };
        if ev.ts < day.bars[0].ts {
            continue;
        }
        let s = r + offset;
        if s >= last {
            continue;
        }
        let mv = day.bars[r + RELEASE_BARS - 1].close - day.bars[r].open;
        let Some(dir) = Direction::of(mv) else {
            continue;
        };
        out.push(
            SignalEvent::new(Family::EventDrift, day.date, s, dir)
                .with("release_bar", r as f64)
                .with("release_move", day.pts(mv)),
        );
    }
    out.sort_by_key(|e| e.bar_index);
    Ok(out)
}
