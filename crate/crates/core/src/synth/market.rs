//! Multi-session synthetic market: LONDON, RTH and ASIA sessions on one
//! continuous price path, an event calendar, and optional confluence edge.

use std::io::Write;
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_bars, day_noise, trading_dates, DayNoise, RegimeSpec, SynthError};
use crate::features::{markov_transition_prob, volume_zscore};
use crate::market::{
    write_bar_file, write_event_calendar, Bar, EconEvent, EventKind, Impact, MarketData, Price,
    SessionKind, TickSize, TradingDay,
};
use crate::seed::derive_seed;
use crate::signals::{Direction, Family, SignalEvent};

/// Drift planted after RTH bars that satisfy the confluence rule on the true
/// regime labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfluenceEdge {
    pub magnitude: f64,
    pub horizon: usize,
    pub transition_window: usize,
    pub transition_prob: f64,
    pub volume_z_window: usize,
    pub volume_z: f64,
}

impl Default for ConfluenceEdge {
    fn default() -> Self {
        ConfluenceEdge {
            magnitude: 15.0,
            horizon: 13,
            transition_window: 200,
            transition_prob: 0.15,
            volume_z_window: 50,
            volume_z: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSynthSpec {
    pub n_days: usize,
    pub start_year: i32,
    pub years: u32,
    pub seed: u64,
    pub tick: TickSize,
    pub start_price: f64,
    pub rth_vol: f64,
    pub asia_vol: f64,
    pub london_vol: f64,
    /// Std of the jump between consecutive sessions, points.
    pub gap_vol: f64,
    pub rth_volume: f64,
    pub asia_volume: f64,
    pub london_volume: f64,
    pub rth_regimes: Option<RegimeSpec>,
    pub edge: Option<ConfluenceEdge>,
    /// Probability of an in-session release on a given day.
    pub event_rate: f64,
}

impl Default for MarketSynthSpec {
    fn default() -> Self {
        MarketSynthSpec {
            n_days: 500,
            start_year: 2022,
            years: 4,
            seed: 0,
            tick: TickSize::default(),
            start_price: 15000.0,
            rth_vol: 3.0,
            asia_vol: 1.5,
            london_vol: 3.0,
            gap_vol: 6.0,
            rth_volume: 1000.0,
            asia_volume: 300.0,
            london_volume: 600.0,
            rth_regimes: None,
            edge: None,
            event_rate: 0.1,
        }
    }
}

impl MarketSynthSpec {
    pub fn null(n_days: usize, seed: u64) -> Self {
        MarketSynthSpec {
            n_days,
            seed,
            ..Default::default()
        }
    }

    /// Memoryless three-state chain: symmetric down/up states and a rare
    /// wide-range state 1. State 1 carries ordinary volume, so the volume
    /// condition of the confluence rule thins the plantings.
    pub fn edge_regimes() -> RegimeSpec {
        let row = vec![0.49, 0.02, 0.49];
        RegimeSpec {
            transition: vec![row.clone(), row.clone(), row],
            mean: vec![-2.0, 0.0, 2.0],
            vol_mult: vec![0.3, 3.0, 0.3],
            volume_mult: vec![1.0, 1.0, 1.0],
        }
    }

    pub fn confluence(n_days: usize, seed: u64) -> Self {
        MarketSynthSpec {
            n_days,
            seed,
            rth_regimes: Some(Self::edge_regimes()),
            edge: Some(ConfluenceEdge::default()),
            ..Default::default()
        }
    }

    fn session_params(&self, s: SessionKind) -> (f64, f64) {
        match s {
            SessionKind::Rth => (self.rth_vol, self.rth_volume),
            SessionKind::Asia => (self.asia_vol, self.asia_volume),
            SessionKind::London => (self.london_vol, self.london_volume),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthMarket {
    pub market: MarketData,
    pub planted: Vec<SignalEvent>,
    /// True RTH regime labels per day.
    pub rth_labels: Vec<Vec<u8>>,
    /// Qualifying bars whose horizon ran past the session end.
    pub skipped: usize,
}

/// Chronological session order within a date.
const ORDER: [SessionKind; 3] = [SessionKind::London, SessionKind::Rth, SessionKind::Asia];

fn noises(spec: &MarketSynthSpec, s: SessionKind, n: usize) -> Result<Vec<DayNoise>, SynthError> {
    let regimes = match s {
        SessionKind::Rth => spec.rth_regimes.clone().unwrap_or_else(RegimeSpec::single),
        _ => RegimeSpec::single(),
    };
    regimes.validate()?;
    let st = regimes.stationary();
    let bars = s.spec().nominal_bars();
    let (_, volume) = spec.session_params(s);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(spec.seed, &format!("synth/{}", s.name()), i as u64);
            day_noise(seed, bars, &regimes, &st, volume, super::VOLUME_LOG_SIGMA)
        })
        .collect())
}

/// Per-bar additive drift from confluence plantings on the RTH stream.
fn plant_confluence(
    edge: &ConfluenceEdge,
    rth: &[DayNoise],
    dates: &[NaiveDate],
) -> Result<(Vec<Vec<f64>>, Vec<SignalEvent>, usize), SynthError> {
    let n_bars = SessionKind::Rth.spec().nominal_bars();
    let stream: Vec<Bar> = rth
        .iter()
        .flat_map(|d| d.volumes.iter())
        .map(|&v| Bar {
            ts: Default::default(),
            open: Price(0),
            high: Price(0),
            low: Price(0),
            close: Price(0),
            volume: v,
        })
        .collect();
    let bad = |e: crate::features::FeatureError| SynthError::BadTransition(e.to_string());
    let vz = volume_zscore(&stream, edge.volume_z_window).map_err(bad)?;
    let labels: Vec<Option<u8>> = rth
        .iter()
        .flat_map(|d| d.labels.iter().map(|&l| Some(l)))
        .collect();
    let p = markov_transition_prob(&labels, edge.transition_window, 1, 2).map_err(bad)?;
    let mut drift = vec![vec![0.0; n_bars]; rth.len()];
    let mut planted = Vec::new();
    let mut skipped = 0;
    for (g, ((l, pz), z)) in labels.iter().zip(&p).zip(&vz).enumerate() {
        let (k, b) = (g / n_bars, g % n_bars);
        let (Some(l), Some(pz), Some(z)) = (l, pz, z) else {
            continue;
        };
        if *l != 1 || *pz <= edge.transition_prob || *z <= edge.volume_z {
            continue;
        }
        if edge.horizon == 0 || b + edge.horizon > n_bars - 1 {
            skipped += 1;
            continue;
        }
        for m in &mut drift[k][b + 1..=b + edge.horizon] {
            *m += edge.magnitude / edge.horizon as f64;
        }
        planted.push(
            SignalEvent::new(Family::ConfluenceRth, dates[k], b, Direction::Long)
                .with("planted", 1.0),
        );
    }
    Ok((drift, planted, skipped))
}

fn event_calendar(spec: &MarketSynthSpec, dates: &[NaiveDate]) -> Vec<EconEvent> {
    let mut out = Vec::new();
    for (i, d) in dates.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synth/events", i as u64));
        if rng.random_bool(spec.event_rate.clamp(0.0, 1.0)) {
            let (kind, time) = match rng.random_range(0..3) {
                0 => (EventKind::Fomc, NaiveTime::from_hms_opt(14, 0, 0).unwrap()),
                1 => (EventKind::Cpi, NaiveTime::from_hms_opt(10, 0, 0).unwrap()),
                _ => (EventKind::Pce, NaiveTime::from_hms_opt(10, 0, 0).unwrap()),
            };
            out.push(EconEvent {
                ts: d.and_time(time),
                kind,
                impact: Impact::High,
                currency: "USD".into(),
            });
        }
        // Pre-market releases land outside RTH and exercise the session filter.
        if rng.random_bool((spec.event_rate / 2.0).clamp(0.0, 1.0)) {
            out.push(EconEvent {
                ts: d.and_time(NaiveTime::from_hms_opt(8, 30, 0).unwrap()),
                kind: EventKind::Nfp,
                impact: Impact::High,
                currency: "USD".into(),
            });
        }
    }
    out
}

pub fn gen_market(spec: &MarketSynthSpec) -> Result<SynthMarket, SynthError> {
    for v in [spec.rth_vol, spec.asia_vol, spec.london_vol] {
        if !(v > 0.0) {
            return Err(SynthError::NonPositiveVol);
        }
    }
    let dates = trading_dates(spec.n_days, spec.start_year, spec.years);
    let n = dates.len();
    let rth_regimes = spec.rth_regimes.clone().unwrap_or_else(RegimeSpec::single);
    let london = noises(spec, SessionKind::London, n)?;
    let rth = noises(spec, SessionKind::Rth, n)?;
    let asia = noises(spec, SessionKind::Asia, n)?;

    let (drift, planted, skipped) = match &spec.edge {
        Some(e) => plant_confluence(e, &rth, &dates)?,
        None => (
            vec![vec![0.0; SessionKind::Rth.spec().nominal_bars()]; n],
            Vec::new(),
            0,
        ),
    };

    let mut market = MarketData {
        tick: spec.tick,
        events: event_calendar(spec, &dates),
        ..Default::default()
    };
    let mut level = spec.tick.round(spec.start_price);
    let mut prior_rth: Option<Price> = None;
    for (k, date) in dates.iter().enumerate() {
        for s in ORDER {
            let noise = match s {
                SessionKind::London => &london[k],
                SessionKind::Rth => &rth[k],
                SessionKind::Asia => &asia[k],
            };
            let (vol, _) = spec.session_params(s);
            let (means, sds): (Vec<f64>, Vec<f64>) = match s {
                SessionKind::Rth => noise
                    .labels
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| {
                        (
                            rth_regimes.mean[l as usize] + drift[k][i],
                            vol * rth_regimes.vol_mult[l as usize],
                        )
                    })
                    .unzip(),
                _ => noise.labels.iter().map(|_| (0.0, vol)).unzip(),
            };
            if k > 0 || s != SessionKind::London {
                level = level + spec.tick.round(spec.gap_vol * noise.gap_z);
            }
            let bars = build_bars(s, *date, level, noise, &means, &sds, spec.tick);
            level = bars.last().map_or(level, |b| b.close);
            let day = TradingDay {
                date: *date,
                session: s,
                tick: spec.tick,
                bars,
                prior_rth_close: if s == SessionKind::Rth {
                    prior_rth
                } else {
                    None
                },
                complete: true,
            };
            if s == SessionKind::Rth {
                prior_rth = Some(level);
            }
            market.session_mut(s).push(day);
        }
    }
    let rth_labels = rth.into_iter().map(|d| d.labels).collect();
    Ok(SynthMarket {
        market,
        planted,
        rth_labels,
        skipped,
    })
}

pub const RTH_FILE: &str = "rth.csv";
pub const ASIA_FILE: &str = "asia.csv";
pub const LONDON_FILE: &str = "london.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const PLANTED_FILE: &str = "planted.csv";

pub fn session_file(s: SessionKind) -> &'static str {
    match s {
        SessionKind::Rth => RTH_FILE,
        SessionKind::Asia => ASIA_FILE,
        SessionKind::London => LONDON_FILE,
    }
}

/// Writes the three bar files, the event calendar and the planted ground
/// truth. Each bar file opens with a `#` comment carrying the spec as JSON.
pub fn write_corpus(dir: &Path, m: &SynthMarket, spec: &MarketSynthSpec) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let header = serde_json::to_string(spec).map_err(std::io::Error::other)?;
    for s in SessionKind::ALL {
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(session_file(s)))?);
        writeln!(w, "# synth-spec: {header}")?;
        write_bar_file(&mut w, m.market.session(s))?;
        w.flush()?;
    }
    write_event_calendar(
        std::io::BufWriter::new(std::fs::File::create(dir.join(EVENTS_FILE))?),
        &m.market.events,
    )?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(PLANTED_FILE))?);
    writeln!(w, "# synth-spec: {header}")?;
    writeln!(w, "family,date,bar_index,direction")?;
    for e in &m.planted {
        writeln!(
            w,
            "{},{},{},{}",
            e.family.name(),
            e.day,
            e.bar_index,
            e.direction.as_str()
        )?;
    }
    w.flush()
}

/// Reads the spec back from a corpus file's header comment.
pub fn read_corpus_spec(path: &Path) -> std::io::Result<Option<MarketSynthSpec>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# synth-spec: "))
        .and_then(|j| serde_json::from_str(j).ok()))
}
