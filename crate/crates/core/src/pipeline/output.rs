//! Loading bar files and writing run directories.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::de::DeserializeOwned;

use super::{Engine, FamilyRun, PipelineError};
use crate::config::RunConfig;
use crate::execution::TradeRecord;
use crate::ledger::report::{render_report, render_summary, ReportFormat, RunReport};
use crate::market::{
    parse_bar_file, parse_event_calendar, MarketData, MarketDataError, SessionKind, TickSize,
};
use crate::signals::Family;
use crate::stats::{summary_metrics, validate};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionIngest {
    pub session: SessionKind,
    pub complete: usize,
    pub incomplete: usize,
    pub rejected_bars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IngestSummary {
    pub sessions: Vec<SessionIngest>,
    pub events: Option<usize>,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sessions {
            writeln!(
                f,
                "{}: {} complete, {} incomplete, {} rejected bars",
                s.session, s.complete, s.incomplete, s.rejected_bars
            )?;
        }
        if let Some(n) = self.events {
            writeln!(f, "events: {n} qualifying")?;
        }
        Ok(())
    }
}

/// Parses every data file named in the config.
pub fn load_market(config: &RunConfig) -> Result<(MarketData, IngestSummary), PipelineError> {
    let tick = config.tick()?;
    let paths = config.data_paths();
    let mut market = MarketData {
        tick,
        ..Default::default()
    };
    let mut summary = IngestSummary::default();
    let files = [
        (SessionKind::Rth, Some(&paths.rth)),
        (SessionKind::Asia, paths.asia.as_ref()),
        (SessionKind::London, paths.london.as_ref()),
    ];
    for (session, path) in files {
        let Some(path) = path else { continue };
        let parsed = parse_bar_file(path, session, tick).map_err(|e| with_path(e, path))?;
        summary.sessions.push(SessionIngest {
            session,
            complete: parsed.complete_days().count(),
            incomplete: parsed.incomplete_count(),
            rejected_bars: parsed.rejected.len(),
        });
        *market.session_mut(session) = parsed.days;
    }
    if let Some(path) = &paths.events {
        market.events = parse_event_calendar(path, true).map_err(|e| with_path(e, path))?;
        summary.events = Some(market.events.len());
    }
    Ok((market, summary))
}

fn with_path(e: MarketDataError, path: &Path) -> PipelineError {
    PipelineError::Input {
        path: path.to_path_buf(),
        source: e,
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub runs: Vec<FamilyRun>,
    pub errors: Vec<(Family, String)>,
}

/// Evaluates `families` and writes `<out_root>/<run id>/`.
pub fn run_to_dir(
    config: &RunConfig,
    market: &MarketData,
    families: &[Family],
    out_root: &Path,
) -> Result<RunOutcome, PipelineError> {
    let engine = Engine::new(config, market)?;
    let results = engine.run(families);
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for (f, r) in families.iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => errors.push((*f, e.to_string())),
        }
    }
    let dir = out_root.join(config.run_id());
    write_run(&dir, config, &runs, &errors)?;
    Ok(RunOutcome { dir, runs, errors })
}

pub const REPORT_MD: &str = "report.md";
pub const REPORT_JSON: &str = "report.json";
pub const TRADES_CSV: &str = "trades.csv";
pub const SUMMARY_MD: &str = "summary.md";
pub const SUMMARY_JSON: &str = "summary.json";

fn trades_csv(trades: &[TradeRecord]) -> String {
    let mut s = String::from(TradeRecord::CSV_HEADER);
    s.push('\n');
    for t in trades {
        s.push_str(&t.to_csv_row());
        s.push('\n');
    }
    s
}

fn summary_md(reports: &[RunReport], errors: &[(Family, String)]) -> String {
    let mut s = render_summary(reports, ReportFormat::Markdown);
    if !errors.is_empty() {
        s.push_str("\n## Errors\n\n");
        for (f, e) in errors {
            s.push_str(&format!("- {f}: {e}\n"));
        }
    }
    s
}

/// Writes the run directory, replacing any earlier contents; files are
/// written one at a time in a fixed order.
pub fn write_run(
    dir: &Path,
    config: &RunConfig,
    runs: &[FamilyRun],
    errors: &[(Family, String)],
) -> std::io::Result<()> {
    // A run directory always holds exactly one run's output.
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.to_toml())?;
    for run in runs {
        let fdir = dir.join(run.report.family.name());
        fs::create_dir_all(&fdir)?;
        fs::write(
            fdir.join(REPORT_MD),
            render_report(&run.report, ReportFormat::Markdown),
        )?;
        fs::write(
            fdir.join(REPORT_JSON),
            render_report(&run.report, ReportFormat::Structured),
        )?;
        fs::write(fdir.join(TRADES_CSV), trades_csv(&run.trades))?;
    }
    let reports: Vec<RunReport> = runs.iter().map(|r| r.report.clone()).collect();
    fs::write(dir.join(SUMMARY_MD), summary_md(&reports, errors))?;
    fs::write(
        dir.join(SUMMARY_JSON),
        render_summary(&reports, ReportFormat::Structured),
    )?;
    Ok(())
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
}

/// Reads a trade log written by [`write_run`].
pub fn read_trades(path: &Path, tick: TickSize) -> Result<Vec<TradeRecord>, PipelineError> {
    let text = fs::read_to_string(path)?;
    let bad = |line: usize| {
        PipelineError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{}: line {line}: malformed trade record", path.display()),
        ))
    };
    let mut out = Vec::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 11 {
            return Err(bad(i + 1));
        }
        let price = |s: &str| s.parse::<f64>().ok().and_then(|v| tick.exact(v));
        let num = |s: &str| s.parse::<usize>().ok();
        let rec = (|| {
            Some(TradeRecord {
                family: f[0].parse().ok()?,
                date: NaiveDate::parse_from_str(f[1], "%Y-%m-%d").ok()?,
                direction: parse_enum(f[2])?,
                signal_bar: num(f[3])?,
                entry_bar: num(f[4])?,
                exit_bar: num(f[5])?,
                entry_price: price(f[6])?,
                exit_price: price(f[7])?,
                gross: price(f[8])?,
                net: price(f[9])?,
                exit_reason: parse_enum(f[10])?,
                tick,
            })
        })();
        out.push(rec.ok_or_else(|| bad(i + 1))?);
    }
    Ok(out)
}

/// Rebuilds every report in a run directory from its trade logs and the
/// stored fold choices and permutation p, and rewrites the markdown.
/// Returns the regenerated reports.
pub fn regenerate_reports(dir: &Path) -> Result<Vec<RunReport>, PipelineError> {
    let config = RunConfig::from_toml(&fs::read_to_string(dir.join("config.toml"))?)?;
    let tick = config.tick()?;
    let mut reports = Vec::new();
    for family in Family::ALL {
        let fdir = dir.join(family.name());
        let json = fdir.join(REPORT_JSON);
        if !json.exists() {
            continue;
        }
        let stored: RunReport = serde_json::from_str(&fs::read_to_string(&json)?).map_err(|e| {
            PipelineError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })?;
        let trades = read_trades(&fdir.join(TRADES_CSV), tick)?;
        let mut metrics = summary_metrics(&trades);
        metrics.permutation_p = stored.metrics.permutation_p;
        let perm_applicable = config.families.get(&family).is_none_or(|g| g.permutation);
        let mut r = stored.clone();
        r.verdict = validate(&metrics, &config.gate, perm_applicable);
        r.gross_vs_net.mean_gross = metrics.mean_gross;
        r.gross_vs_net.mean_net = metrics.mean_net;
        r.metrics = metrics;
        fs::write(
            fdir.join(REPORT_MD),
            render_report(&r, ReportFormat::Markdown),
        )?;
        reports.push(r);
    }
    Ok(reports)
}
