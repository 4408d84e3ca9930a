//! Bar file ingestion and canonical serialization.
//!
//! Format: UTF-8 CSV with header `ts,open,high,low,close,volume`, `ts` as
//! `YYYY-MM-DDTHH:MM` in ET, prices in points. Lines starting with `#` are
//! comments.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use super::{Bar, MarketDataError, Price, SessionKind, TickSize, TradingDay, TS_FORMAT};

pub const BAR_HEADER: [&str; 6] = ["ts", "open", "high", "low", "close", "volume"];

/// A well-formed bar that could not be assigned to a session slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedBar {
    pub line: u64,
    pub bar: Bar,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedBars {
    pub days: Vec<TradingDay>,
    pub rejected: Vec<RejectedBar>,
}

impl ParsedBars {
    pub fn complete_days(&self) -> impl Iterator<Item = &TradingDay> {
        self.days.iter().filter(|d| d.complete)
    }

    pub fn incomplete_count(&self) -> usize {
        self.days.iter().filter(|d| !d.complete).count()
    }

    pub fn bar_count(&self) -> usize {
        self.days.iter().map(|d| d.bars.len()).sum::<usize>() + self.rejected.len()
    }
}

pub fn parse_bar_file(
    path: &Path,
    session: SessionKind,
    tick: TickSize,
) -> Result<ParsedBars, MarketDataError> {
    let file = std::fs::File::open(path)?;
    read_bar_file(file, session, tick)
}

fn price(field: &str, line: u64, tick: TickSize) -> Result<Price, MarketDataError> {
    let v: f64 = field.parse().map_err(|_| MarketDataError::Malformed {
        line,
        msg: format!("bad price {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(MarketDataError::Malformed {
            line,
            msg: format!("bad price {field:?}"),
        });
    }
    tick.exact(v).ok_or_else(|| MarketDataError::OffTickGrid {
        line,
        price: field.to_string(),
        tick: tick.points(),
    })
}

pub fn read_bar_file<R: Read>(
    reader: R,
    session: SessionKind,
    tick: TickSize,
) -> Result<ParsedBars, MarketDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| MarketDataError::Malformed {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Ok(ParsedBars::default());
    }
    if headers.iter().ne(BAR_HEADER.iter().copied()) {
        return Err(MarketDataError::Malformed {
            line: headers.position().map_or(1, |p| p.line()),
            msg: format!("expected header {}", BAR_HEADER.join(",")),
        });
    }

    let spec = session.spec();
    let mut slots: BTreeMap<NaiveDate, Vec<Bar>> = BTreeMap::new();
    let mut rejected = Vec::new();
    let mut prev_ts: Option<NaiveDateTime> = None;

    for rec in rdr.records() {
        let rec = rec.map_err(|e| MarketDataError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != BAR_HEADER.len() {
            return Err(MarketDataError::Malformed {
                line,
                msg: format!("expected {} columns, found {}", BAR_HEADER.len(), rec.len()),
            });
        }
        let ts = NaiveDateTime::parse_from_str(&rec[0], TS_FORMAT).map_err(|_| {
            MarketDataError::Malformed {
                line,
                msg: format!("bad timestamp {:?}", &rec[0]),
            }
        })?;
        let volume: u64 = rec[5].parse().map_err(|_| MarketDataError::Malformed {
            line,
            msg: format!("bad volume {:?}", &rec[5]),
        })?;
        let bar = Bar {
            ts,
            open: price(&rec[1], line, tick)?,
            high: price(&rec[2], line, tick)?,
            low: price(&rec[3], line, tick)?,
            close: price(&rec[4], line, tick)?,
            volume,
        };
        bar.check().map_err(|msg| MarketDataError::InvalidBar {
            line,
            ts: ts.format(TS_FORMAT).to_string(),
            msg,
        })?;
        if prev_ts.is_some_and(|p| ts <= p) {
            return Err(MarketDataError::Unsorted {
                line,
                ts: ts.format(TS_FORMAT).to_string(),
            });
        }
        prev_ts = Some(ts);

        match spec.slot(ts) {
            Some((date, _)) => slots.entry(date).or_default().push(bar),
            None => rejected.push(RejectedBar {
                line,
                bar,
                reason: format!("outside {session} session grid"),
            }),
        }
    }

    let nominal = spec.nominal_bars();
    let mut days = Vec::with_capacity(slots.len());
    let mut prev_close: Option<Price> = None;
    for (date, bars) in slots {
        let complete = bars.len() == nominal;
        let last_close = bars.last().map(|b| b.close);
        let prior_rth_close = if session == SessionKind::Rth {
            prev_close
        } else {
            None
        };
        days.push(TradingDay {
            date,
            session,
            tick,
            bars,
            prior_rth_close,
            complete,
        });
        prev_close = if complete { last_close } else { None };
    }
    Ok(ParsedBars { days, rejected })
}

/// Writes days in the canonical bar file format.
pub fn write_bar_file<W: Write>(mut w: W, days: &[TradingDay]) -> std::io::Result<()> {
    writeln!(w, "{}", BAR_HEADER.join(","))?;
    for day in days {
        for b in &day.bars {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                b.ts.format(TS_FORMAT),
                day.tick.format(b.open),
                day.tick.format(b.high),
                day.tick.format(b.low),
                day.tick.format(b.close),
                b.volume
            )?;
        }
    }
    Ok(())
}
