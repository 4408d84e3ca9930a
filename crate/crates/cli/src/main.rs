use std::path::PathBuf;
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand};

use falsify_core::config::{ConfigError, DataPaths, RunConfig};
use falsify_core::ledger::{self, DecisionRecord, DecisionStatus, LedgerError};
use falsify_core::market::SessionKind;
use falsify_core::pipeline::{load_market, regenerate_reports, run_to_dir, PipelineError};
use falsify_core::signals::Family;
use falsify_core::synth::market::EVENTS_FILE;
use falsify_core::synth::{gen_market, session_file, write_corpus, MarketSynthSpec};

/// Walk-forward falsification of intraday signal families.
#[derive(Parser)]
#[command(name = "falsify", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to $FALSIFY_OUT, then the config's `output_dir`, then `runs`.
    #[arg(long, env = "FALSIFY_OUT")]
    out: Option<PathBuf>,
    /// Replaces the root seed.
    #[arg(long)]
    seed_override: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse the configured bar files and report day completeness.
    Ingest(Common),
    /// Generate a synthetic corpus from a synth spec and a matching run config.
    Synth(Common),
    /// Walk-forward, permutation test and gate for one family or all.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        family: Option<Family>,
    },
    /// Append to, list or verify the decision ledger named in the config.
    Ledger {
        #[command(flatten)]
        common: Common,
        #[command(subcommand)]
        op: LedgerOp,
    },
    /// Rebuild a run directory's reports from its trade logs.
    Report(Common),
}

#[derive(Subcommand)]
enum LedgerOp {
    /// Append a decision: ID STATUS TEXT [EVIDENCE...]
    Append {
        id: String,
        status: DecisionStatus,
        text: String,
        evidence: Vec<String>,
    },
    /// List decisions, optionally only those with STATUS.
    List { status: Option<DecisionStatus> },
    /// Check the hash chain.
    Verify,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(msg: impl ToString) -> Self {
        Failure {
            code: 2,
            msg: msg.to_string(),
        }
    }

    fn data(msg: impl ToString) -> Self {
        Failure {
            code: 1,
            msg: msg.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_config() {
            Failure::config(e)
        } else {
            Failure::data(e)
        }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        Failure::data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e)
    }
}

const DEFAULT_OUT: &str = "runs";

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut config = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed_override {
        config.seed = seed;
    }
    Ok(config)
}

fn out_root(c: &Common, config: &RunConfig) -> PathBuf {
    c.out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(|p| config.resolve(p)))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn ingest(c: &Common) -> Result<(), Failure> {
    let config = load_config(c)?;
    let (_, summary) = load_market(&config)?;
    print!("{summary}");
    Ok(())
}

fn synth(c: &Common) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&c.config)
        .map_err(|e| Failure::config(format!("{}: {e}", c.config.display())))?;
    let mut spec: MarketSynthSpec = toml::from_str(&text)
        .map_err(|e| Failure::config(format!("{}: {e}", c.config.display())))?;
    if let Some(seed) = c.seed_override {
        spec.seed = seed;
    }
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
    let market = gen_market(&spec).map_err(Failure::config)?;
    write_corpus(&dir, &market, &spec)?;
    let file = |s: SessionKind| PathBuf::from(session_file(s));
    let data = DataPaths {
        rth: file(SessionKind::Rth),
        asia: Some(file(SessionKind::Asia)),
        london: Some(file(SessionKind::London)),
        events: Some(PathBuf::from(EVENTS_FILE)),
    };
    std::fs::write(
        dir.join("run.toml"),
        RunConfig::with_defaults(data, spec.seed).to_toml(),
    )?;
    println!(
        "{} days, {} planted events written to {}",
        market.market.rth.len(),
        market.planted.len(),
        dir.display()
    );
    Ok(())
}

fn run(c: &Common, family: Option<Family>) -> Result<(), Failure> {
    let config = load_config(c)?;
    let families = config.families_for(family)?;
    let (market, _) = load_market(&config)?;
    let outcome = run_to_dir(&config, &market, &families, &out_root(c, &config))?;
    for r in &outcome.runs {
        println!(
            "{:<22} n {:>5}  {}",
            r.report.family.name(),
            r.report.metrics.n,
            r.report.verdict.failure_label
        );
    }
    for (f, e) in &outcome.errors {
        eprintln!("error: {f}: {e}");
    }
    println!("{}", outcome.dir.display());
    if outcome.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::data(format!(
            "{} families failed to evaluate",
            outcome.errors.len()
        )))
    }
}

fn ledger_path(config: &RunConfig) -> Result<PathBuf, Failure> {
    config
        .ledger
        .as_ref()
        .map(|p| config.resolve(p))
        .ok_or_else(|| Failure::config("config has no `ledger` path"))
}

fn ledger_cmd(c: &Common, op: LedgerOp) -> Result<(), Failure> {
    let path = ledger_path(&load_config(c)?)?;
    match op {
        LedgerOp::Append {
            id,
            status,
            text,
            evidence,
        } => {
            let e = ledger::append(
                &path,
                DecisionRecord {
                    id,
                    text,
                    status,
                    created_at: Utc::now(),
                    evidence_refs: evidence,
                    supersedes: None,
                },
            )?;
            println!("{} {}", e.record.id, e.hash);
        }
        LedgerOp::List { status } => {
            for r in ledger::list(&path, status)? {
                println!("{} {:?} {}", r.id, r.status, r.text);
            }
        }
        LedgerOp::Verify => {
            let n = ledger::verify(&path)?;
            println!("{n} records, chain intact");
        }
    }
    Ok(())
}

fn report(c: &Common) -> Result<(), Failure> {
    let config = load_config(c)?;
    let dir = out_root(c, &config).join(config.run_id());
    if !dir.is_dir() {
        return Err(Failure::data(format!("no run directory {}", dir.display())));
    }
    for r in regenerate_reports(&dir)? {
        println!("{:<22} {}", r.family.name(), r.verdict.failure_label);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Ingest(c) => ingest(&c),
        Cmd::Synth(c) => synth(&c),
        Cmd::Run { common, family } => run(&common, family),
        Cmd::Ledger { common, op } => ledger_cmd(&common, op),
        Cmd::Report(c) => report(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
