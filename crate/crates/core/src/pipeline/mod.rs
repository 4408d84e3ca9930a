//! Walk-forward evaluation of signal families over one market.
//!
//! Everything fitted from data (regime models, volume cutoffs, VVG terciles,
//! the ATR baseline) is fitted on a fold's training years only. Per-bar
//! series are computed over the whole session stream from strictly prior
//! bars, so a test-year bar never sees its own future.

mod output;

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;

use crate::config::{ConfigError, FamilyGrid, RunConfig};
use crate::execution::{simulate, FrictionModel, TradeRecord};
use crate::features::{
    gmm_fit, kalman_velocity, markov_transition_prob, ou_fit, quantile, regime_labels,
    rolling_stat, velocity_zscore, volume_zscore, FeatureError, OuFit, RegimeFeatures, RegimeModel,
    RollingSpec, RollingStatistic,
};
use crate::ledger::report::{FoldChoice, GrossNetRow, RunReport};
use crate::market::{
    day_primitives, Bar, EconEvent, MarketData, MarketDataError, SessionKind, TickSize, TradingDay,
};
use crate::seed::derive_seed;
use crate::signals::regime::{ACTIVE_FLOW, BULLISH_DRIFT};
use crate::signals::{
    asia_expansion_signals, confluence_rth_signals, event_drift_signals, gap_signals,
    liquidity_grab_signals, london_b_signals, orb_signals, ou_reversion_signals,
    volume_ratio_cutoffs, volume_signature_signals, vvg_flags, vvg_metrics, vvg_strategy_signals,
    vvg_terciles, ConfluenceBar, Family, FamilyParams, GapVariant, GrabMode, Lookback, OrbVariant,
    SignalEvent, VolumeCutoffs, VolumeKind, VvgMode,
};
use crate::stats::{
    permutation_test_grouped, plan_folds, summary_metrics, validate, walk_forward, Fold,
    PermutationGroup, Phase, StatsError, WalkForwardPlan,
};

pub use output::{
    load_market, read_trades, regenerate_reports, run_to_dir, write_run, IngestSummary, RunOutcome,
    SessionIngest,
};

/// Regimes in every mixture fit.
pub const REGIMES: usize = 3;
/// Volume z-score window of the regime features.
pub const REGIME_VOLZ_WINDOW: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] MarketDataError),
    #[error("{}: {source}", path.display())]
    Input {
        path: std::path::PathBuf,
        source: MarketDataError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{family}: {msg}")]
    Family { family: Family, msg: String },
    #[error("{0}")]
    RegimeFit(String),
}

impl PipelineError {
    pub fn is_config(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

/// Complete days of one session laid end to end.
#[derive(Debug, Clone)]
pub struct Stream {
    pub session: SessionKind,
    pub days: Vec<TradingDay>,
    /// Index of each day's first bar in `bars`.
    pub start: Vec<usize>,
    pub bars: Vec<Bar>,
}

impl Stream {
    pub fn new(session: SessionKind, days: &[TradingDay]) -> Self {
        let mut days: Vec<TradingDay> = days.iter().filter(|d| d.complete).cloned().collect();
        days.sort_by_key(|d| d.date);
        let mut start = Vec::with_capacity(days.len());
        let mut bars = Vec::new();
        for d in &days {
            start.push(bars.len());
            bars.extend_from_slice(&d.bars);
        }
        Stream {
            session,
            days,
            start,
            bars,
        }
    }

    pub fn range(&self, d: usize) -> std::ops::Range<usize> {
        self.start[d]..self.start[d] + self.days[d].len()
    }

    /// Contiguous day range covering `years` (which must be consecutive).
    pub fn days_in(&self, years: &[i32]) -> std::ops::Range<usize> {
        let first = self
            .days
            .iter()
            .position(|d| years.contains(&d.date.year()));
        match first {
            None => 0..0,
            Some(a) => {
                let n = self.days[a..]
                    .iter()
                    .take_while(|d| years.contains(&d.date.year()))
                    .count();
                a..a + n
            }
        }
    }
}

/// (bar body, bar range, volume z) in points, aligned with `bars`.
pub fn regime_features(
    bars: &[Bar],
    tick: TickSize,
) -> Result<Vec<Option<RegimeFeatures>>, FeatureError> {
    let vz = volume_zscore(bars, REGIME_VOLZ_WINDOW)?;
    Ok(bars
        .iter()
        .zip(vz)
        .map(|(b, z)| {
            z.map(|z| {
                [
                    tick.to_points(b.close - b.open),
                    tick.to_points(b.range()),
                    z,
                ]
            })
        })
        .collect())
}

fn session_slot(s: SessionKind) -> usize {
    match s {
        SessionKind::Rth => 0,
        SessionKind::Asia => 1,
        SessionKind::London => 2,
    }
}

type Shared<T> = OnceLock<Result<Arc<T>, String>>;

#[derive(Default)]
struct FoldCache {
    models: [Shared<RegimeModel>; 3],
    labels: [Shared<Vec<Option<u8>>>; 3],
}

/// Fold-level artifacts a family needs, built once per (fold, params).
enum Prepared {
    Plain,
    Cutoffs(Option<VolumeCutoffs>),
    Flags(Vec<bool>),
    Kalman(Vec<Option<f64>>),
    Events(Vec<Vec<EconEvent>>),
    Ou(Vec<Option<OuFit>>),
    Confluence {
        inputs: Vec<ConfluenceBar>,
        atr_baseline: f64,
    },
    Labels(Arc<Vec<Option<u8>>>),
}

/// One family's walk-forward outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyRun {
    pub report: RunReport,
    pub trades: Vec<TradeRecord>,
}

pub struct Engine {
    config: RunConfig,
    tick: TickSize,
    friction: FrictionModel,
    streams: [Stream; 3],
    events: Vec<EconEvent>,
    years: Vec<i32>,
    plan: WalkForwardPlan,
    folds: Vec<FoldCache>,
    config_hash: String,
}

impl Engine {
    pub fn new(config: &RunConfig, market: &MarketData) -> Result<Self, PipelineError> {
        config.validate()?;
        let tick = config.tick()?;
        let streams = SessionKind::ALL.map(|s| Stream::new(s, market.session(s)));
        let years: Vec<i32> = if config.years.is_empty() {
            let mut ys: Vec<i32> = streams[0].days.iter().map(|d| d.date.year()).collect();
            ys.dedup();
            ys
        } else {
            let mut ys = config.years.clone();
            ys.sort_unstable();
            ys.dedup();
            ys
        };
        let plan = plan_folds(&years)?;
        let folds = plan.folds.iter().map(|_| FoldCache::default()).collect();
        Ok(Engine {
            config: config.clone(),
            tick,
            friction: config.friction(),
            streams,
            events: market
                .events
                .iter()
                .filter(|e| e.qualifies() && e.in_rth())
                .cloned()
                .collect(),
            years,
            plan,
            folds,
            config_hash: config.hash(),
        })
    }

    /// Same configuration over different bars, keeping every regime model
    /// already fitted. Used to probe that signals do not read future bars.
    pub fn rebind(&self, market: &MarketData) -> Result<Self, PipelineError> {
        let mut e = Engine::new(&self.config, market)?;
        for (new, old) in e.folds.iter_mut().zip(&self.folds) {
            for s in 0..3 {
                if let Some(m) = old.models[s].get() {
                    let _ = new.models[s].set(m.clone());
                }
            }
        }
        Ok(e)
    }

    pub fn plan(&self) -> &WalkForwardPlan {
        &self.plan
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn stream(&self, s: SessionKind) -> &Stream {
        &self.streams[session_slot(s)]
    }

    fn fold_index(&self, fold: &Fold) -> usize {
        self.plan
            .folds
            .iter()
            .position(|f| f.test_year == fold.test_year)
            .expect("fold from this plan")
    }

    /// Regime model of `session` fitted on the training years of fold `k`.
    pub fn regime_model(
        &self,
        k: usize,
        session: SessionKind,
    ) -> Result<Arc<RegimeModel>, PipelineError> {
        let slot = session_slot(session);
        self.folds[k].models[slot]
            .get_or_init(|| {
                let st = self.stream(session);
                let feats = regime_features(&st.bars, self.tick).map_err(|e| e.to_string())?;
                let train = st.days_in(&self.plan.folds[k].train_years);
                let lo = st.start.get(train.start).copied().unwrap_or(0);
                let hi = if train.end < st.days.len() {
                    st.start[train.end]
                } else {
                    st.bars.len()
                };
                let xs: Vec<RegimeFeatures> = feats[lo..hi].iter().flatten().copied().collect();
                let seed = derive_seed(
                    self.config.seed,
                    &format!("gmm/{}", session.name()),
                    k as u64,
                );
                gmm_fit(&xs, REGIMES, seed)
                    .map(Arc::new)
                    .map_err(|e| format!("{} regime fit: {e}", session.name()))
            })
            .clone()
            .map_err(PipelineError::RegimeFit)
    }

    fn labels(
        &self,
        k: usize,
        session: SessionKind,
    ) -> Result<Arc<Vec<Option<u8>>>, PipelineError> {
        let model = self.regime_model(k, session)?;
        let slot = session_slot(session);
        self.folds[k].labels[slot]
            .get_or_init(|| {
                let st = self.stream(session);
                let feats = regime_features(&st.bars, self.tick).map_err(|e| e.to_string())?;
                let known: Vec<RegimeFeatures> = feats.iter().flatten().copied().collect();
                let mut lab = regime_labels(&model, &known).into_iter();
                Ok(Arc::new(
                    feats.iter().map(|f| f.and_then(|_| lab.next())).collect(),
                ))
            })
            .clone()
            .map_err(PipelineError::RegimeFit)
    }

    fn prepare(
        &self,
        family: Family,
        p: &FamilyParams,
        k: usize,
    ) -> Result<Prepared, PipelineError> {
        let rth = self.stream(SessionKind::Rth);
        let train = rth.days_in(&self.plan.folds[k].train_years);
        Ok(match family {
            Family::VolSpike | Family::VolDryup => {
                let days: Vec<&TradingDay> = rth.days[train].iter().collect();
                Prepared::Cutoffs(volume_ratio_cutoffs(
                    &days,
                    p.volume_window,
                    p.spike_quantile,
                    p.dryup_quantile,
                ))
            }
            Family::VvgReversal | Family::VvgContinuation | Family::VvgCloseFade => {
                let metrics = vvg_metrics(&rth.days, p.vvg_baseline_days);
                let known: Vec<_> = metrics[train].iter().flatten().copied().collect();
                Prepared::Flags(match vvg_terciles(&known) {
                    Some(t) => vvg_flags(&metrics, &t),
                    None => vec![false; rth.days.len()],
                })
            }
            Family::GapContShort => Prepared::Kalman(self.overnight_velocity(p)),
            Family::EventDrift => {
                let mut by_day: BTreeMap<NaiveDate, Vec<EconEvent>> = BTreeMap::new();
                for e in &self.events {
                    if p.event_kinds.is_empty()
                        || p.event_kinds
                            .iter()
                            .any(|k| k.eq_ignore_ascii_case(e.kind.as_str()))
                    {
                        by_day.entry(e.ts.date()).or_default().push(e.clone());
                    }
                }
                Prepared::Events(
                    rth.days
                        .iter()
                        .map(|d| by_day.remove(&d.date).unwrap_or_default())
                        .collect(),
                )
            }
            Family::OuReversion => Prepared::Ou(
                (0..rth.days.len())
                    .map(|d| {
                        let s = rth.start[d];
                        if s < p.ou_window {
                            return None;
                        }
                        let closes: Vec<f64> = rth.bars[s - p.ou_window..s]
                            .iter()
                            .map(|b| self.tick.to_points(b.close))
                            .collect();
                        ou_fit(&closes).ok().filter(OuFit::is_tradeable)
                    })
                    .collect(),
            ),
            Family::ConfluenceRth => {
                let labels = self.labels(k, SessionKind::Rth)?;
                let pb = markov_transition_prob(
                    &labels,
                    p.transition_window,
                    ACTIVE_FLOW,
                    BULLISH_DRIFT,
                )?;
                let vz = volume_zscore(&rth.bars, p.volume_z_window)?;
                let atr = rolling_stat(
                    &rth.bars,
                    RollingSpec::new(RollingStatistic::Atr, p.atr_window),
                    self.tick,
                )?;
                let lo = rth.start.get(train.start).copied().unwrap_or(0);
                let hi = if train.end < rth.days.len() {
                    rth.start[train.end]
                } else {
                    rth.bars.len()
                };
                let mut base: Vec<f64> = atr[lo..hi].iter().flatten().copied().collect();
                base.sort_by(f64::total_cmp);
                let atr_baseline = if base.is_empty() {
                    0.0
                } else {
                    quantile(&base, 0.5)
                };
                let inputs = (0..rth.bars.len())
                    .map(|i| ConfluenceBar {
                        label: labels[i],
                        p_to_bull: pb[i],
                        volume_z: vz[i],
                        atr: atr[i],
                    })
                    .collect();
                Prepared::Confluence {
                    inputs,
                    atr_baseline,
                }
            }
            Family::LondonB => Prepared::Labels(self.labels(k, SessionKind::London)?),
            _ => Prepared::Plain,
        })
    }

    /// Kalman velocity at the end of the overnight closes before each RTH
    /// day: the preceding Asia session, then that morning's London session.
    fn overnight_velocity(&self, p: &FamilyParams) -> Vec<Option<f64>> {
        let rth = self.stream(SessionKind::Rth);
        let asia = self.stream(SessionKind::Asia);
        let london = self.stream(SessionKind::London);
        let london_by_date: BTreeMap<NaiveDate, &TradingDay> =
            london.days.iter().map(|d| (d.date, d)).collect();
        rth.days
            .iter()
            .enumerate()
            .map(|(k, day)| {
                let prev = if k > 0 {
                    rth.days[k - 1].date
                } else {
                    day.date - Duration::days(7)
                };
                let mut closes: Vec<f64> = asia
                    .days
                    .iter()
                    .filter(|a| a.date >= prev && a.date < day.date)
                    .flat_map(|a| a.closes_pts())
                    .collect();
                if let Some(l) = london_by_date.get(&day.date) {
                    closes.extend(l.closes_pts());
                }
                if closes.len() < 2 {
                    return None;
                }
                let v = kalman_velocity(&closes, p.kalman_q, p.kalman_r).ok()?;
                if p.kalman_zscored {
                    velocity_zscore(&v)
                } else {
                    v.last().copied()
                }
            })
            .collect()
    }

    fn day_events(
        &self,
        family: Family,
        p: &FamilyParams,
        prep: &Prepared,
        d: usize,
    ) -> Result<Vec<SignalEvent>, String> {
        let st = self.stream(family.session());
        let day = &st.days[d];
        let err = |e: &dyn std::fmt::Display| e.to_string();
        let prims = || day_primitives(day).map_err(|e| err(&e));
        let pullback = self.tick.round(p.pullback_points);
        let lookback = p
            .grab_lookback
            .map_or(Lookback::SessionExtreme, Lookback::Bars);
        let vvg = |mode| match prep {
            Prepared::Flags(f) => {
                vvg_strategy_signals(day, f[d], &prims()?, mode, p.close_fade_time)
                    .map_err(|e| err(&e))
            }
            _ => unreachable!(),
        };
        let vol = |kind| match prep {
            Prepared::Cutoffs(c) => Ok::<_, String>(
                c.map(|c| volume_signature_signals(day, kind, p.volume_window, c))
                    .unwrap_or_default(),
            ),
            _ => unreachable!(),
        };
        let mut evs = match family {
            Family::OrbLong | Family::OrbShort => orb_signals(
                day,
                &prims()?,
                OrbVariant::Immediate,
                pullback,
                p.stop_points,
            ),
            Family::OrbPullback => orb_signals(
                day,
                &prims()?,
                OrbVariant::Pullback,
                pullback,
                p.stop_points,
            ),
            Family::AsiaExpansion => {
                asia_expansion_signals(day, p.expansion_multiple, p.expansion_window)
                    .map_err(|e| err(&e))?
            }
            Family::LiquidityGrabFade => liquidity_grab_signals(day, lookback, GrabMode::Fade),
            Family::LiquidityGrabCont => {
                liquidity_grab_signals(day, lookback, GrabMode::Continuation)
            }
            Family::GapFillFade | Family::GapContShort => {
                let (variant, v) = match prep {
                    Prepared::Kalman(v) => (GapVariant::ContShort, v[d]),
                    _ => (GapVariant::FillFade, None),
                };
                gap_signals(
                    day,
                    &prims()?,
                    variant,
                    p.entry_time,
                    v,
                    p.kalman_threshold,
                    self.tick.round(p.min_gap),
                )
                .map_err(|e| err(&e))?
            }
            Family::VolSpike => vol(VolumeKind::Spike)?,
            Family::VolDryup => vol(VolumeKind::Dryup)?,
            Family::VvgReversal => vvg(VvgMode::Reversal)?,
            Family::VvgContinuation => vvg(VvgMode::Continuation)?,
            Family::VvgCloseFade => vvg(VvgMode::CloseFade)?,
            Family::EventDrift => match prep {
                Prepared::Events(ev) => {
                    event_drift_signals(day, &ev[d], p.event_offset).map_err(|e| err(&e))?
                }
                _ => unreachable!(),
            },
            Family::OuReversion => match prep {
                Prepared::Ou(fits) => fits[d]
                    .map(|f| ou_reversion_signals(day, &f, p.ou_threshold, p.ou_rearm).events)
                    .unwrap_or_default(),
                _ => unreachable!(),
            },
            Family::ConfluenceRth => match prep {
                Prepared::Confluence {
                    inputs,
                    atr_baseline,
                } => confluence_rth_signals(day, &inputs[st.range(d)], p, *atr_baseline),
                _ => unreachable!(),
            },
            Family::LondonB => match prep {
                Prepared::Labels(l) => london_b_signals(day, &l[st.range(d)]),
                _ => unreachable!(),
            },
        };
        evs.retain(|e| e.family == family);
        Ok(evs)
    }

    /// Signals of `family` on day `d` of its session under fold `k`'s
    /// artifacts.
    pub fn signals_on(
        &self,
        family: Family,
        p: &FamilyParams,
        k: usize,
        d: usize,
    ) -> Result<Vec<SignalEvent>, PipelineError> {
        let prep = self.prepare(family, p, k)?;
        self.day_events(family, p, &prep, d)
            .map_err(|msg| PipelineError::Family { family, msg })
    }

    fn grid(&self, family: Family) -> Result<&FamilyGrid, PipelineError> {
        self.config
            .families
            .get(&family)
            .ok_or(PipelineError::Config(ConfigError::Undeclared(family)))
    }

    /// Trades of grid point `g` on the days of `years`, with fold `k`'s artifacts.
    pub fn evaluate(
        &self,
        family: Family,
        k: usize,
        g: usize,
        years: &[i32],
    ) -> Result<Vec<TradeRecord>, PipelineError> {
        let grid = self.grid(family)?;
        let (p, exit) = grid.point(g);
        let prep = self.prepare(family, p, k)?;
        let st = self.stream(family.session());
        let mut trades = Vec::new();
        for d in st.days_in(years) {
            let evs = self
                .day_events(family, p, &prep, d)
                .map_err(|msg| PipelineError::Family { family, msg })?;
            let sim = simulate(&evs, &st.days[d], exit, &self.friction).map_err(|e| {
                PipelineError::Family {
                    family,
                    msg: e.to_string(),
                }
            })?;
            trades.extend(sim.trades);
        }
        Ok(trades)
    }

    /// Full walk-forward, permutation and gate for one family.
    pub fn run_family(&self, family: Family) -> Result<FamilyRun, PipelineError> {
        let grid = self.grid(family)?;
        let wf = walk_forward(&self.years, grid.len(), |fold: &Fold, g, phase: Phase| {
            self.evaluate(family, self.fold_index(fold), g, &fold.years(phase))
                .map_err(|e| StatsError::Evaluation(e.to_string()))
        })?;
        let trades = wf.oos_trades();
        let mut metrics = summary_metrics(&trades);
        let mut notes = Vec::new();
        let pre = validate(&metrics, &self.config.gate, grid.permutation);
        let st = self.stream(family.session());
        if !grid.permutation {
            notes.push("permutation test not applicable".to_string());
        } else if pre.pre_permutation_ok() {
            let groups: Vec<PermutationGroup> = wf
                .plan
                .folds
                .iter()
                .enumerate()
                .map(|(k, f)| PermutationGroup {
                    trades: &wf.fold_trades[k],
                    day_pool: &st.days[st.days_in(&[f.test_year])],
                    exit: grid.point(wf.chosen[k]).1,
                })
                .collect();
            let seed = derive_seed(self.config.seed, &format!("perm/{}", family.name()), 0);
            metrics.permutation_p = Some(permutation_test_grouped(
                &groups,
                &self.friction,
                self.config.permutation_iterations,
                seed,
            )?);
        } else {
            notes.push(format!("permutation test not run: {}", pre.failure_label));
        }
        let verdict = validate(&metrics, &self.config.gate, grid.permutation);
        let overlapping = overlap_count(&trades);
        if overlapping > 0 {
            notes.push(format!(
                "{overlapping} trades entered while an earlier trade of the family was open"
            ));
        }

        let folds: Vec<FoldChoice> = wf
            .plan
            .folds
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let g = wf.chosen[k];
                let (t, n) = wf.train_scores[k][g];
                FoldChoice {
                    train_years: f.train_years.clone(),
                    test_year: f.test_year,
                    grid_index: g,
                    point: point_label(grid, g),
                    train_t: t,
                    train_n: n,
                    test_n: wf.fold_trades[k].len(),
                }
            })
            .collect();
        let variant = if wf.chosen.windows(2).all(|w| w[0] == w[1]) {
            format!("{} {}", family.name(), point_label(grid, wf.chosen[0]))
        } else {
            format!("{} walk-forward selection", family.name())
        };
        let report = RunReport {
            family,
            variant: variant.clone(),
            folds,
            gross_vs_net: GrossNetRow {
                variant,
                mean_gross: metrics.mean_gross,
                friction: self.friction.round_trip,
                mean_net: metrics.mean_net,
            },
            metrics,
            verdict,
            config_hash: self.config_hash.clone(),
            seed: self.config.seed,
            notes,
        };
        Ok(FamilyRun { report, trades })
    }

    /// Runs `families` in parallel; results come back in input order.
    pub fn run(&self, families: &[Family]) -> Vec<Result<FamilyRun, PipelineError>> {
        families.par_iter().map(|&f| self.run_family(f)).collect()
    }
}

/// Exit plus the parameters that differ from the defaults, e.g.
/// `b+6 expansion_multiple=2`.
/// Trades whose entry bar falls before the exit bar of an earlier trade on
/// the same day.
fn overlap_count(trades: &[TradeRecord]) -> usize {
    let mut n = 0;
    let mut open: Option<(NaiveDate, usize)> = None;
    for t in trades {
        match open {
            Some((d, exit)) if d == t.date && t.entry_bar < exit => {
                n += 1;
                open = Some((d, exit.max(t.exit_bar)));
            }
            _ => open = Some((t.date, t.exit_bar)),
        }
    }
    n
}

pub fn point_label(grid: &FamilyGrid, g: usize) -> String {
    let (p, exit) = grid.point(g);
    let base = serde_json::to_value(FamilyParams::default()).expect("params serialize");
    let cur = serde_json::to_value(p).expect("params serialize");
    let mut s = exit.to_string();
    if let (Some(b), Some(c)) = (base.as_object(), cur.as_object()) {
        for (k, v) in c {
            if b.get(k) != Some(v) {
                s.push_str(&format!(" {k}={v}"));
            }
        }
    }
    s
}
