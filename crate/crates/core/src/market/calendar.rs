//! Economic event calendar (`ts,kind,impact,currency`).

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::{MarketDataError, SessionKind, TS_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EventKind {
    Fomc,
    Cpi,
    Nfp,
    Pce,
    Other,
}

impl EventKind {
    fn parse(s: &str) -> EventKind {
        match s.to_ascii_uppercase().as_str() {
            "FOMC" => EventKind::Fomc,
            "CPI" => EventKind::Cpi,
            "NFP" => EventKind::Nfp,
            "PCE" => EventKind::Pce,
            _ => EventKind::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Fomc => "FOMC",
            EventKind::Cpi => "CPI",
            EventKind::Nfp => "NFP",
            EventKind::Pce => "PCE",
            EventKind::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Impact {
    High,
    Medium,
    Low,
    Holiday,
}

impl Impact {
    fn parse(s: &str) -> Option<Impact> {
        match s.to_ascii_uppercase().as_str() {
            "HIGH" | "H" => Some(Impact::High),
            "MEDIUM" | "M" => Some(Impact::Medium),
            "LOW" | "L" => Some(Impact::Low),
            "HOLIDAY" => Some(Impact::Holiday),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Impact::High => "HIGH",
            Impact::Medium => "MEDIUM",
            Impact::Low => "LOW",
            Impact::Holiday => "HOLIDAY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconEvent {
    pub ts: NaiveDateTime,
    pub kind: EventKind,
    pub impact: Impact,
    pub currency: String,
}

impl EconEvent {
    /// High-impact USD release of one of the tracked kinds.
    pub fn qualifies(&self) -> bool {
        self.impact == Impact::High
            && self.currency.eq_ignore_ascii_case("USD")
            && self.kind != EventKind::Other
    }

    pub fn in_rth(&self) -> bool {
        SessionKind::Rth.spec().contains_time(self.ts.time())
    }
}

pub fn parse_event_calendar(
    path: &Path,
    rth_only: bool,
) -> Result<Vec<EconEvent>, MarketDataError> {
    read_event_calendar(std::fs::File::open(path)?, rth_only)
}

/// Reads a calendar and keeps qualifying events; with `rth_only`, events
/// released outside 09:30–16:00 ET are dropped as well.
pub fn read_event_calendar<R: Read>(
    reader: R,
    rth_only: bool,
) -> Result<Vec<EconEvent>, MarketDataError> {
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
        return Ok(Vec::new());
    }
    if headers.iter().ne(["ts", "kind", "impact", "currency"]) {
        return Err(MarketDataError::Malformed {
            line: 1,
            msg: "expected header ts,kind,impact,currency".into(),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MarketDataError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(MarketDataError::Malformed {
                line,
                msg: format!("expected 4 columns, found {}", rec.len()),
            });
        }
        let ts = NaiveDateTime::parse_from_str(&rec[0], TS_FORMAT).map_err(|_| {
            MarketDataError::Malformed {
                line,
                msg: format!("bad timestamp {:?}", &rec[0]),
            }
        })?;
        let impact = Impact::parse(&rec[2]).ok_or_else(|| MarketDataError::UnknownImpact {
            line,
            code: rec[2].to_string(),
        })?;
        let ev = EconEvent {
            ts,
            kind: EventKind::parse(&rec[1]),
            impact,
            currency: rec[3].to_string(),
        };
        if ev.qualifies() && (!rth_only || ev.in_rth()) {
            out.push(ev);
        }
    }
    Ok(out)
}

pub fn write_event_calendar<W: Write>(mut w: W, events: &[EconEvent]) -> std::io::Result<()> {
    writeln!(w, "ts,kind,impact,currency")?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{}",
            e.ts.format(TS_FORMAT),
            e.kind.as_str(),
            e.impact.as_str(),
            e.currency
        )?;
    }
    Ok(())
}
