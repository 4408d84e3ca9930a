//! Fills signals into trades: next-bar-open entry, horizon / stop / limit /
//! clock exits, fixed round-trip friction, all in integer ticks.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Datelike, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::market::{Price, TickSize, TradingDay};
use crate::signals::{Direction, Family, SignalEvent};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecutionError {
    #[error("invalid exit: {0}")]
    InvalidExit(String),
    #[error("friction {0} points is negative or off the {1}-point tick grid")]
    Friction(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExitSpec {
    /// Exit at the close of bar `signal + horizon`.
    Horizon { horizon: usize },
    /// As `Horizon`, stopped out at `stop` points adverse, checked before
    /// any favorable move within a bar.
    StopHorizon { horizon: usize, stop: f64 },
    /// Resting limit `limit_offset` points through the signal close (or the
    /// event's own level); exit at the close of bar `signal + horizon`.
    PullbackLimit { horizon: usize, limit_offset: f64 },
    /// Exit at the open of the bar starting at `clock`.
    Clock { clock: NaiveTime },
}

impl ExitSpec {
    pub fn validate(&self) -> Result<(), ExecutionError> {
        match *self {
            ExitSpec::Horizon { horizon } if horizon >= 1 => Ok(()),
            ExitSpec::StopHorizon { horizon, stop } if horizon >= 1 && stop > 0.0 => Ok(()),
            ExitSpec::PullbackLimit {
                horizon,
                limit_offset,
            } if horizon >= 1 && limit_offset >= 0.0 => Ok(()),
            ExitSpec::Clock { .. } => Ok(()),
            other => Err(ExecutionError::InvalidExit(format!("{other:?}"))),
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match *self {
            ExitSpec::Horizon { horizon }
            | ExitSpec::StopHorizon { horizon, .. }
            | ExitSpec::PullbackLimit { horizon, .. } => Some(horizon),
            ExitSpec::Clock { .. } => None,
        }
    }

    /// Whether a signal at `bar` can run its full course in `day`.
    pub fn admits(&self, day: &TradingDay, bar: usize) -> bool {
        let last = day.last_index();
        match *self {
            ExitSpec::Clock { clock } => day.index_at(clock).is_some_and(|c| c > bar + 1),
            _ => bar + self.horizon().unwrap() <= last && bar < last,
        }
    }
}

impl fmt::Display for ExitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ExitSpec::Horizon { horizon } => write!(f, "b+{horizon}"),
            ExitSpec::StopHorizon { horizon, stop } => write!(f, "b+{horizon} stop {stop}"),
            ExitSpec::PullbackLimit {
                horizon,
                limit_offset,
            } => write!(f, "limit {limit_offset} b+{horizon}"),
            ExitSpec::Clock { clock } => write!(f, "clock {}", clock.format("%H:%M")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionModel {
    /// Round-trip cost in points.
    pub round_trip: f64,
}

impl Default for FrictionModel {
    fn default() -> Self {
        FrictionModel { round_trip: 2.0 }
    }
}

impl FrictionModel {
    pub fn ticks(&self, tick: TickSize) -> Result<Price, ExecutionError> {
        match tick.exact(self.round_trip) {
            Some(p) if p >= Price::ZERO => Ok(p),
            _ => Err(ExecutionError::Friction(self.round_trip, tick.points())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExitReason {
    Horizon,
    Stop,
    Clock,
    SessionEnd,
    LimitUnfilled,
}

impl ExitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::Horizon => "HORIZON",
            ExitReason::Stop => "STOP",
            ExitReason::Clock => "CLOCK",
            ExitReason::SessionEnd => "SESSION_END",
            ExitReason::LimitUnfilled => "LIMIT_UNFILLED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub family: Family,
    pub date: NaiveDate,
    pub direction: Direction,
    pub signal_bar: usize,
    pub entry_bar: usize,
    pub exit_bar: usize,
    pub entry_price: Price,
    pub exit_price: Price,
    /// Direction-signed exit minus entry, ticks.
    pub gross: Price,
    /// Gross minus round-trip friction, ticks.
    pub net: Price,
    pub exit_reason: ExitReason,
    pub tick: TickSize,
}

impl TradeRecord {
    pub fn gross_pts(&self) -> f64 {
        self.tick.to_points(self.gross)
    }

    pub fn net_pts(&self) -> f64 {
        self.tick.to_points(self.net)
    }

    pub fn year(&self) -> i32 {
        self.date.year()
    }

    pub const CSV_HEADER: &'static str =
        "family,date,direction,signal_bar,entry_bar,exit_bar,entry_price,exit_price,gross,net,exit_reason";

    pub fn to_csv_row(&self) -> String {
        let t = self.tick;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.family,
            self.date,
            self.direction.as_str(),
            self.signal_bar,
            self.entry_bar,
            self.exit_bar,
            t.format(self.entry_price),
            t.format(self.exit_price),
            t.format(self.gross),
            t.format(self.net),
            self.exit_reason.as_str()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SkipReason {
    /// Signal on or past the last bar: no next bar to enter on.
    LastBar,
    LimitUnfilled,
    WrongDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEvent {
    pub event: SignalEvent,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub trades: Vec<TradeRecord>,
    pub skipped: Vec<SkippedEvent>,
}

/// One entry described without a full event; shared with placement tests.
#[derive(Debug, Clone, Copy)]
pub struct Entry {
    pub family: Family,
    pub direction: Direction,
    pub signal_bar: usize,
    pub entry_limit: Option<Price>,
}

/// Simulates a single entry on `day`.
pub fn fill(
    day: &TradingDay,
    e: Entry,
    exit: &ExitSpec,
    friction: Price,
) -> Result<TradeRecord, SkipReason> {
    let bars = &day.bars;
    let last = day.last_index();
    let s = e.signal_bar;
    if bars.is_empty() || s >= last {
        return Err(SkipReason::LastBar);
    }
    let sign = e.direction.sign();
    let tick = day.tick;
    let mut entry_bar = s + 1;
    let mut entry_price = bars[entry_bar].open;

    let horizon_exit = |h: usize| {
        let b = s + h;
        if b > last {
            (last, bars[last].close, ExitReason::SessionEnd)
        } else {
            (b, bars[b].close, ExitReason::Horizon)
        }
    };

    let (exit_bar, exit_price, exit_reason) = match *exit {
        ExitSpec::Horizon { horizon } => horizon_exit(horizon),
        ExitSpec::StopHorizon { horizon, stop } => {
            let stop = tick.round(stop);
            let level = entry_price - Price(sign * stop.0);
            let end = (s + horizon).min(last);
            let hit = (entry_bar..=end).find(|&k| match e.direction {
                Direction::Long => bars[k].low <= level,
                Direction::Short => bars[k].high >= level,
            });
            match hit {
                Some(k) => {
                    let px = match e.direction {
                        Direction::Long => bars[k].open.min(level),
                        Direction::Short => bars[k].open.max(level),
                    };
                    (k, px, ExitReason::Stop)
                }
                None => horizon_exit(horizon),
            }
        }
        ExitSpec::PullbackLimit {
            horizon,
            limit_offset,
        } => {
            let level = e
                .entry_limit
                .unwrap_or_else(|| bars[s].close - Price(sign * tick.round(limit_offset).0));
            let end = (s + horizon).min(last);
            let k = (s + 1..=end)
                .find(|&k| match e.direction {
                    Direction::Long => bars[k].low < level,
                    Direction::Short => bars[k].high > level,
                })
                .ok_or(SkipReason::LimitUnfilled)?;
            entry_bar = k;
            entry_price = match e.direction {
                Direction::Long => bars[k].open.min(level),
                Direction::Short => bars[k].open.max(level),
            };
            horizon_exit(horizon)
        }
        ExitSpec::Clock { clock } => match day.index_at(clock) {
            Some(c) if c > entry_bar => (c, bars[c].open, ExitReason::Clock),
            _ => (last, bars[last].close, ExitReason::SessionEnd),
        },
    };
    let gross = Price(sign * (exit_price - entry_price).0);
    Ok(TradeRecord {
        family: e.family,
        date: day.date,
        direction: e.direction,
        signal_bar: s,
        entry_bar,
        exit_bar,
        entry_price,
        exit_price,
        gross,
        net: gross - friction,
        exit_reason,
        tick,
    })
}

/// Every event is taken independently (no netting of overlapping trades).
pub fn simulate(
    events: &[SignalEvent],
    day: &TradingDay,
    exit: &ExitSpec,
    friction: &FrictionModel,
) -> Result<Simulation, ExecutionError> {
    exit.validate()?;
    let cost = friction.ticks(day.tick)?;
    let mut sim = Simulation::default();
    let mut order: Vec<&SignalEvent> = events.iter().collect();
    order.sort_by_key(|e| e.bar_index);
    for ev in order {
        if ev.day != day.date {
            sim.skipped.push(SkippedEvent {
                event: ev.clone(),
                reason: SkipReason::WrongDay,
            });
            continue;
        }
        let entry = Entry {
            family: ev.family,
            direction: ev.direction,
            signal_bar: ev.bar_index,
            entry_limit: ev.entry_limit,
        };
        match fill(day, entry, exit, cost) {
            Ok(t) => sim.trades.push(t),
            Err(reason) => sim.skipped.push(SkippedEvent {
                event: ev.clone(),
                reason,
            }),
        }
    }
    Ok(sim)
}

pub fn aggregate_by_year(trades: &[TradeRecord]) -> BTreeMap<i32, Vec<TradeRecord>> {
    let mut out: BTreeMap<i32, Vec<TradeRecord>> = BTreeMap::new();
    for t in trades {
        out.entry(t.year()).or_default().push(t.clone());
    }
    out
}
