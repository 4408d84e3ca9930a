//! Mean reversion on the OU z-score of closes.

use super::{Direction, Family, SignalEvent};
use crate::features::{ou_zscore, OuFit};
use crate::market::TradingDay;

#[derive(Debug, Clone, PartialEq)]
pub struct OuOutcome {
    pub events: Vec<SignalEvent>,
    /// Set when the fit cannot produce z-scores and the day is skipped.
    pub warning: Option<String>,
}

/// z ≤ −threshold → LONG, z ≥ threshold → SHORT. After an event no new one
/// fires until |z| drops below `rearm`.
pub fn ou_reversion_signals(
    day: &TradingDay,
    fit: &OuFit,
    threshold: f64,
    rearm: f64,
) -> OuOutcome {
    let z = match ou_zscore(&day.closes_pts(), fit) {
        Ok(z) => z,
        Err(e) => {
            return OuOutcome {
                events: vec![],
                warning: Some(format!("{}: {e}", day.date)),
            }
        }
    };
    let mut armed = true;
    let mut events = Vec::new();
    for (i, &zi) in z.iter().enumerate().take(day.last_index()) {
        if !armed {
            armed = zi.abs() < rearm;
            continue;
        }
        let dir = if zi <= -threshold {
            Direction::Long
        } else if zi >= threshold {
            Direction::Short
        } else {
            continue;
        };
        events.push(SignalEvent::new(Family::OuReversion, day.date, i, dir).with("z", zi));
        armed = false;
    }
    OuOutcome {
        events,
        warning: None,
    }
}
