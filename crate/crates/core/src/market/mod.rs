//! Bars, sessions and session-scoped trading days.
//!
//! Prices are held as integer ticks ([`Price`]) so that friction and P&L
//! arithmetic is exact; [`TickSize`] converts to and from index points at the
//! edges (parsing, estimators, display).

pub mod calendar;
pub mod parse;
pub mod primitives;

use std::fmt;
use std::ops::{Add, Neg, Sub};

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calendar::{
    parse_event_calendar, read_event_calendar, write_event_calendar, EconEvent, EventKind, Impact,
};
pub use parse::{parse_bar_file, read_bar_file, write_bar_file, ParsedBars, RejectedBar};
pub use primitives::{day_primitives, DayPrimitives, OPENING_RANGE_BARS};

/// Timestamp format used by every file this crate reads or writes.
pub const TS_FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed row: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("line {line}: bar {ts} violates OHLC invariants: {msg}")]
    InvalidBar { line: u64, ts: String, msg: String },
    #[error("line {line}: timestamp {ts} is not after the previous row")]
    Unsorted { line: u64, ts: String },
    #[error("line {line}: price {price} is not a multiple of the tick size {tick}")]
    OffTickGrid { line: u64, price: String, tick: f64 },
    #[error("line {line}: unknown impact code {code:?}")]
    UnknownImpact { line: u64, code: String },
    #[error("invalid tick size {0}")]
    InvalidTickSize(f64),
    #[error("day {date} has {have} bars, need at least {need}")]
    TooFewBars {
        date: NaiveDate,
        have: usize,
        need: usize,
    },
}

/// A price in integer ticks.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Price(pub i64);

impl Price {
    pub const ZERO: Price = Price(0);

    pub fn ticks(self) -> i64 {
        self.0
    }

    pub fn abs(self) -> Price {
        Price(self.0.abs())
    }
}

impl Add for Price {
    type Output = Price;
    fn add(self, rhs: Price) -> Price {
        Price(self.0 + rhs.0)
    }
}

impl Sub for Price {
    type Output = Price;
    fn sub(self, rhs: Price) -> Price {
        Price(self.0 - rhs.0)
    }
}

impl Neg for Price {
    type Output = Price;
    fn neg(self) -> Price {
        Price(-self.0)
    }
}

/// Points per tick for an instrument (0.25 for MNQ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TickSize(f64);

impl TryFrom<f64> for TickSize {
    type Error = MarketDataError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        TickSize::new(v)
    }
}

impl From<TickSize> for f64 {
    fn from(t: TickSize) -> f64 {
        t.0
    }
}

impl Default for TickSize {
    fn default() -> Self {
        TickSize(0.25)
    }
}

impl TickSize {
    pub fn new(points: f64) -> Result<Self, MarketDataError> {
        if points.is_finite() && points > 0.0 {
            Ok(TickSize(points))
        } else {
            Err(MarketDataError::InvalidTickSize(points))
        }
    }

    pub fn points(self) -> f64 {
        self.0
    }

    pub fn to_points(self, p: Price) -> f64 {
        p.0 as f64 * self.0
    }

    /// Nearest tick to a point value.
    pub fn round(self, points: f64) -> Price {
        Price((points / self.0).round() as i64)
    }

    /// Exact conversion; `None` when `points` is off the tick grid.
    pub fn exact(self, points: f64) -> Option<Price> {
        let ticks = (points / self.0).round();
        if ((ticks * self.0) - points).abs() <= 1e-7 * points.abs().max(1.0) {
            Some(Price(ticks as i64))
        } else {
            None
        }
    }

    /// Decimal places needed to print any multiple of this tick exactly.
    pub fn decimals(self) -> usize {
        let mut scale = 1.0;
        for d in 0..=8 {
            let scaled = self.0 * scale;
            if (scaled - scaled.round()).abs() < 1e-9 {
                return d;
            }
            scale *= 10.0;
        }
        8
    }

    pub fn format(self, p: Price) -> String {
        format!("{:.*}", self.decimals(), self.to_points(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SessionKind {
    Rth,
    Asia,
    London,
}

impl SessionKind {
    pub const ALL: [SessionKind; 3] = [SessionKind::Rth, SessionKind::Asia, SessionKind::London];

    pub fn spec(self) -> SessionSpec {
        match self {
            SessionKind::Rth => SessionSpec::new(self, (9, 30), (16, 0), 5),
            SessionKind::Asia => SessionSpec::new(self, (20, 0), (2, 0), 5),
            SessionKind::London => SessionSpec::new(self, (3, 0), (8, 30), 15),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SessionKind::Rth => "RTH",
            SessionKind::Asia => "ASIA",
            SessionKind::London => "LONDON",
        }
    }
}

impl fmt::Display for SessionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SessionKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RTH" => Ok(SessionKind::Rth),
            "ASIA" => Ok(SessionKind::Asia),
            "LONDON" => Ok(SessionKind::London),
            other => Err(format!("unknown session {other:?}")),
        }
    }
}

/// Wall-clock session window in ET. Sessions may wrap midnight (ASIA).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionSpec {
    pub kind: SessionKind,
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub bar_minutes: u32,
}

impl SessionSpec {
    fn new(kind: SessionKind, start: (u32, u32), end: (u32, u32), bar_minutes: u32) -> Self {
        SessionSpec {
            kind,
            start: NaiveTime::from_hms_opt(start.0, start.1, 0).unwrap(),
            end: NaiveTime::from_hms_opt(end.0, end.1, 0).unwrap(),
            bar_minutes,
        }
    }

    fn span_minutes(&self) -> u32 {
        let s = self.start.num_seconds_from_midnight() / 60;
        let e = self.end.num_seconds_from_midnight() / 60;
        (e + 1440 - s) % 1440
    }

    pub fn wraps_midnight(&self) -> bool {
        self.end <= self.start
    }

    /// Number of bars in a complete session (78 for RTH).
    pub fn nominal_bars(&self) -> usize {
        (self.span_minutes() / self.bar_minutes) as usize
    }

    /// Minutes from session open to `t`, if `t` falls inside the session.
    fn offset_minutes(&self, t: NaiveTime) -> Option<u32> {
        let s = self.start.num_seconds_from_midnight() / 60;
        let m = t.num_seconds_from_midnight() / 60;
        let off = (m + 1440 - s) % 1440;
        (off < self.span_minutes()).then_some(off)
    }

    /// Session date and bar index for a bar opening at `ts`, or `None` if the
    /// timestamp is outside the session or off the bar grid.
    pub fn slot(&self, ts: NaiveDateTime) -> Option<(NaiveDate, usize)> {
        let off = self.offset_minutes(ts.time())?;
        if off % self.bar_minutes != 0 || ts.second() != 0 {
            return None;
        }
        let date = if self.wraps_midnight() && ts.time() < self.start {
            ts.date() - Duration::days(1)
        } else {
            ts.date()
        };
        Some((date, (off / self.bar_minutes) as usize))
    }

    /// Bar index whose open time is `t`.
    pub fn index_of(&self, t: NaiveTime) -> Option<usize> {
        let off = self.offset_minutes(t)?;
        (off % self.bar_minutes == 0).then_some((off / self.bar_minutes) as usize)
    }

    /// Open timestamp of bar `index` for the session dated `date`.
    pub fn bar_ts(&self, date: NaiveDate, index: usize) -> NaiveDateTime {
        date.and_time(self.start) + Duration::minutes((index as u32 * self.bar_minutes) as i64)
    }

    /// Whether `t` lies in `[start, end)` of the session.
    pub fn contains_time(&self, t: NaiveTime) -> bool {
        self.offset_minutes(t).is_some()
    }
}

/// Direction of a bar body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarDirection {
    Up,
    Down,
    Doji,
}

/// One OHLCV bar, stamped with its open time in ET.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bar {
    pub ts: NaiveDateTime,
    pub open: Price,
    pub high: Price,
    pub low: Price,
    pub close: Price,
    pub volume: u64,
}

impl Bar {
    pub fn check(&self) -> Result<(), String> {
        if self.low > self.high {
            return Err("low > high".into());
        }
        if self.low > self.open.min(self.close) {
            return Err("low above open/close".into());
        }
        if self.high < self.open.max(self.close) {
            return Err("high below open/close".into());
        }
        Ok(())
    }

    pub fn range(&self) -> Price {
        self.high - self.low
    }

    pub fn body(&self) -> Price {
        self.close - self.open
    }

    pub fn direction(&self) -> BarDirection {
        match self.close.cmp(&self.open) {
            std::cmp::Ordering::Greater => BarDirection::Up,
            std::cmp::Ordering::Less => BarDirection::Down,
            std::cmp::Ordering::Equal => BarDirection::Doji,
        }
    }
}

/// Bars of one session on one session date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingDay {
    pub date: NaiveDate,
    pub session: SessionKind,
    pub tick: TickSize,
    pub bars: Vec<Bar>,
    /// Last close of the preceding RTH day when that day is complete (RTH
    /// days only); absent after a partial day.
    pub prior_rth_close: Option<Price>,
    pub complete: bool,
}

impl TradingDay {
    pub fn spec(&self) -> SessionSpec {
        self.session.spec()
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.bars.len().saturating_sub(1)
    }

    pub fn pts(&self, p: Price) -> f64 {
        self.tick.to_points(p)
    }

    pub fn closes_pts(&self) -> Vec<f64> {
        self.bars.iter().map(|b| self.pts(b.close)).collect()
    }

    /// Index of the bar opening at wall-clock time `t`.
    pub fn index_at(&self, t: NaiveTime) -> Option<usize> {
        let idx = self.spec().index_of(t)?;
        (idx < self.bars.len()).then_some(idx)
    }
}

/// Complete multi-session market for one instrument.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketData {
    pub tick: TickSize,
    pub rth: Vec<TradingDay>,
    pub asia: Vec<TradingDay>,
    pub london: Vec<TradingDay>,
    pub events: Vec<EconEvent>,
}

impl MarketData {
    pub fn session(&self, kind: SessionKind) -> &[TradingDay] {
        match kind {
            SessionKind::Rth => &self.rth,
            SessionKind::Asia => &self.asia,
            SessionKind::London => &self.london,
        }
    }

    pub fn session_mut(&mut self, kind: SessionKind) -> &mut Vec<TradingDay> {
        match kind {
            SessionKind::Rth => &mut self.rth,
            SessionKind::Asia => &mut self.asia,
            SessionKind::London => &mut self.london,
        }
    }
}
