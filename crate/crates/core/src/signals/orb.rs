//! Opening-range breakout: close beyond the 09:30–09:55 range.

use serde::{Deserialize, Serialize};

use super::{Direction, Family, SignalEvent};
use crate::market::{DayPrimitives, Price, TradingDay, OPENING_RANGE_BARS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrbVariant {
    Immediate,
    Pullback,
}

/// First close beyond the range on each side after the range is set.
fn breakouts(day: &TradingDay, prims: &DayPrimitives) -> (Option<usize>, Option<usize>) {
    let last = day.last_index();
    let mut up = None;
    let mut down = None;
    for i in OPENING_RANGE_BARS..last {
        let c = day.bars[i].close;
        if up.is_none() && c > prims.opening_range_high {
            up = Some(i);
        }
        if down.is_none() && c < prims.opening_range_low {
            down = Some(i);
        }
    }
    (up, down)
}

/// IMMEDIATE yields at most one ORB_LONG and one ORB_SHORT per day at the
/// breakout bars. PULLBACK arms on a breakout and fires ORB_PULLBACK on the
/// first later bar that trades back within `pullback` of the broken level;
/// `stop_points` is carried as metadata.
pub fn orb_signals(
    day: &TradingDay,
    prims: &DayPrimitives,
    variant: OrbVariant,
    pullback: Price,
    stop_points: f64,
) -> Vec<SignalEvent> {
    let (up, down) = breakouts(day, prims);
    let last = day.last_index();
    let mut out = Vec::new();
    match variant {
        OrbVariant::Immediate => {
            if let Some(i) = up {
                out.push(
                    SignalEvent::new(Family::OrbLong, day.date, i, Direction::Long)
                        .with("or_high", day.pts(prims.opening_range_high)),
                );
            }
            if let Some(i) = down {
                out.push(
                    SignalEvent::new(Family::OrbShort, day.date, i, Direction::Short)
                        .with("or_low", day.pts(prims.opening_range_low)),
                );
            }
        }
        OrbVariant::Pullback => {
            if let Some(b) = up {
                let level = prims.opening_range_high;
                if let Some(j) = (b + 1..last).find(|&j| day.bars[j].low <= level + pullback) {
                    out.push(
                        SignalEvent::new(Family::OrbPullback, day.date, j, Direction::Long)
                            .with("armed_at", b as f64)
                            .with("level", day.pts(level))
                            .with("stop", stop_points),
                    );
                }
            }
            if let Some(b) = down {
                let level = prims.opening_range_low;
                if let Some(j) = (b + 1..last).find(|&j| day.bars[j].high >= level - pullback) {
                    out.push(
                        SignalEvent::new(Family::OrbPullback, day.date, j, Direction::Short)
                            .with("armed_at", b as f64)
                            .with("level", day.pts(level))
                            .with("stop", stop_points),
                    );
                }
            }
        }
    }
    out.sort_by_key(|e| e.bar_index);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{day_primitives, SessionKind};
    use crate::signals::testutil::{day_from, flat, negate};

    #[test]
    fn no_breakout_no_events() {
        let d = flat(SessionKind::Rth, 78);
        let p = day_primitives(&d).unwrap();
        assert!(orb_signals(&d, &p, OrbVariant::Immediate, Price(5), 20.0).is_empty());
        assert!(orb_signals(&d, &p, OrbVariant::Pullback, Price(5), 20.0).is_empty());
    }

    /// Range bars top out at 100; bar 7 closes 101.
    fn breakout_day() -> crate::market::TradingDay {
        let mut bars = vec![(98, 100, 97, 99); 6];
        bars.push((99, 100, 98, 100)); // 6: closes at the high, not beyond
        bars.push((100, 102, 99, 101)); // 7: breakout close
        bars.push((106, 108, 106, 107)); // 8: stays above 105
        bars.push((103, 104, 100, 101)); // 9: low 100 within 5 of 100
        bars.extend(vec![(101, 102, 100, 101); 68]);
        day_from(SessionKind::Rth, &bars)
    }

    #[test]
    fn breakout_close_fires_long() {
        let d = breakout_day();
        let p = day_primitives(&d).unwrap();
        assert_eq!(p.opening_range_high, Price(100));
        let ev = orb_signals(&d, &p, OrbVariant::Immediate, Price(5), 20.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(
            (ev[0].family, ev[0].bar_index, ev[0].direction),
            (Family::OrbLong, 7, Direction::Long)
        );
    }

    #[test]
    fn pullback_fires_on_return_within_offset() {
        // Tenth-point ticks so bar 9's low can sit at 100.4.
        let mut d = breakout_day();
        d.tick = crate::market::TickSize::new(0.1).unwrap();
        for b in d.bars.iter_mut() {
            for p in [&mut b.open, &mut b.high, &mut b.low, &mut b.close] {
                *p = Price(p.0 * 10);
            }
        }
        d.bars[9].low = Price(1004);
        let p = day_primitives(&d).unwrap();
        let ev = orb_signals(&d, &p, OrbVariant::Pullback, Price(50), 20.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(
            (ev[0].family, ev[0].bar_index, ev[0].direction),
            (Family::OrbPullback, 9, Direction::Long)
        );
        assert_eq!(ev[0].meta["stop"], 20.0);
        assert_eq!(ev[0].meta["armed_at"], 7.0);
    }

    #[test]
    fn mirror_day_gives_mirror_events() {
        let d = breakout_day();
        let n = negate(&d);
        for v in [OrbVariant::Immediate, OrbVariant::Pullback] {
            let a = orb_signals(&d, &day_primitives(&d).unwrap(), v, Price(5), 20.0);
            let b = orb_signals(&n, &day_primitives(&n).unwrap(), v, Price(5), 20.0);
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.bar_index, y.bar_index);
                assert_eq!(x.direction, y.direction.flip());
            }
        }
    }

    #[test]
    fn last_bar_never_signals() {
        let mut bars = vec![(100, 101, 99, 100); 77];
        bars.push((100, 110, 99, 109));
        let d = day_from(SessionKind::Rth, &bars);
        let p = day_primitives(&d).unwrap();
        assert!(orb_signals(&d, &p, OrbVariant::Immediate, Price(5), 20.0).is_empty());
    }
}
