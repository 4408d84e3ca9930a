//! Run reports: markdown tables in the column order Variant / N / Mean Net /
//! T / Win rate / Verdict, or pretty-printed JSON records.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::signals::Family;
use crate::stats::{EvalMetrics, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Markdown,
    Structured,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrossNetRow {
    pub variant: String,
    pub mean_gross: Option<f64>,
    pub friction: f64,
    pub mean_net: Option<f64>,
}

/// Grid point chosen on one fold's training years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldChoice {
    pub train_years: Vec<i32>,
    pub test_year: i32,
    pub grid_index: usize,
    pub point: String,
    pub train_t: Option<f64>,
    pub train_n: usize,
    pub test_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub family: Family,
    pub variant: String,
    pub folds: Vec<FoldChoice>,
    pub metrics: EvalMetrics,
    pub verdict: Verdict,
    pub gross_vs_net: GrossNetRow,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

fn pts(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{:.1}%", v * 100.0))
}

fn p_value(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

const MAIN_HEADER: &str =
    "| Variant | N | Mean Net (pts) | T | Win rate | Verdict |\n|---|---:|---:|---:|---:|---|\n";

fn main_row(r: &RunReport) -> String {
    format!(
        "| {} | {} | {} | {} | {} | {} |\n",
        r.variant,
        r.metrics.n,
        pts(r.metrics.mean_net),
        pts(r.metrics.t_stat),
        pct(r.metrics.win_rate),
        r.verdict.failure_label
    )
}

pub fn render_report(r: &RunReport, format: ReportFormat) -> String {
    if format == ReportFormat::Structured {
        return serde_json::to_string_pretty(r).expect("report serializes") + "\n";
    }
    let mut s = String::new();
    let m = &r.metrics;
    writeln!(s, "# {}\n", r.family).unwrap();
    writeln!(s, "config: {}  ", r.config_hash).unwrap();
    writeln!(s, "seed: {}\n", r.seed).unwrap();
    s.push_str(MAIN_HEADER);
    s.push_str(&main_row(r));
    writeln!(
        s,
        "\nProfit factor {} · Sharpe {} · permutation p {}\n",
        pts(m.profit_factor),
        pts(m.sharpe),
        p_value(m.permutation_p)
    )
    .unwrap();

    s.push_str("## Gross vs net\n\n| Variant | Mean Gross (pts) | Friction (pts) | Mean Net (pts) |\n|---|---:|---:|---:|\n");
    let g = &r.gross_vs_net;
    writeln!(
        s,
        "| {} | {} | {:.2} | {} |\n",
        g.variant,
        pts(g.mean_gross),
        g.friction,
        pts(g.mean_net)
    )
    .unwrap();

    s.push_str("## By year\n\n| Year | N | Mean Net (pts) | T |\n|---|---:|---:|---:|\n");
    for (y, ym) in &m.per_year {
        writeln!(
            s,
            "| {y} | {} | {} | {} |",
            ym.n,
            pts(ym.mean_net),
            pts(ym.t_stat)
        )
        .unwrap();
    }
    s.push_str("\n## Folds\n\n| Train | Test | Chosen | Train T | Train N | Test N |\n|---|---|---|---:|---:|---:|\n");
    for f in &r.folds {
        let train: Vec<String> = f.train_years.iter().map(i32::to_string).collect();
        writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} |",
            train.join(","),
            f.test_year,
            f.point,
            pts(f.train_t),
            f.train_n,
            f.test_n
        )
        .unwrap();
    }
    if !r.notes.is_empty() {
        s.push_str("\n## Notes\n\n");
        for n in &r.notes {
            writeln!(s, "- {n}").unwrap();
        }
    }
    s
}

/// One row per report, in the order given.
pub fn render_summary(reports: &[RunReport], format: ReportFormat) -> String {
    if format == ReportFormat::Structured {
        return serde_json::to_string_pretty(reports).expect("reports serialize") + "\n";
    }
    let mut s = String::from(MAIN_HEADER);
    for r in reports {
        s.push_str(&main_row(r));
    }
    s
}
