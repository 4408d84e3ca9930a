//! Synthetic OHLCV markets with known properties: driftless nulls, planted
//! directional drift, and hidden regime chains.
//!
//! Each (session, day) draws its randomness from its own seed, so days can
//! be generated in any order. Prices follow a latent additive walk with five
//! sub-steps per bar; open/high/low/close are the rounded sub-step path.

pub mod market;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::market::{Bar, Price, SessionKind, TickSize, TradingDay};
use crate::seed::derive_seed;
use crate::signals::{Direction, Family, SignalEvent};

pub use market::{
    gen_market, read_corpus_spec, session_file, write_corpus, ConfluenceEdge, MarketSynthSpec,
    SynthMarket,
};

pub const SUB_STEPS: usize = 5;
/// Default log-space sigma of bar volumes (lognormal, positive skew).
pub const VOLUME_LOG_SIGMA: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("vol_per_bar must be positive")]
    NonPositiveVol,
    #[error("transition matrix: {0}")]
    BadTransition(String),
    #[error("regime vectors must all have length {0}")]
    RegimeShape(usize),
    #[error("null generation requested with drift present")]
    DriftInNull,
    #[error("{0} required")]
    Missing(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    /// Total expected move over `horizon` bars, points.
    pub magnitude: f64,
    pub horizon: usize,
    pub events_per_day: usize,
    /// Fixed direction; random per event when absent.
    pub direction: Option<Direction>,
    pub family: Family,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub transition: Vec<Vec<f64>>,
    /// Mean bar return per regime, points.
    pub mean: Vec<f64>,
    pub vol_mult: Vec<f64>,
    pub volume_mult: Vec<f64>,
}

impl RegimeSpec {
    pub fn k(&self) -> usize {
        self.transition.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let k = self.k();
        if k == 0 {
            return Err(SynthError::BadTransition("empty".into()));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != k || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(SynthError::BadTransition(format!("row {i} malformed")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(SynthError::BadTransition(format!("row {i} sums to {s}")));
            }
        }
        if self.mean.len() != k || self.vol_mult.len() != k || self.volume_mult.len() != k {
            return Err(SynthError::RegimeShape(k));
        }
        Ok(())
    }

    /// Stationary distribution by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let k = self.k();
        let mut p = vec![1.0 / k as f64; k];
        for _ in 0..10_000 {
            let mut q = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    q[j] += p[i] * self.transition[i][j];
                }
            }
            p = q;
        }
        p
    }

    pub fn single() -> RegimeSpec {
        RegimeSpec {
            transition: vec![vec![1.0]],
            mean: vec![0.0],
            vol_mult: vec![1.0],
            volume_mult: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_days: usize,
    pub session: SessionKind,
    pub vol_per_bar: f64,
    pub seed: u64,
    pub drift: Option<DriftSpec>,
    pub regimes: Option<RegimeSpec>,
    pub start_price: f64,
    pub volume_mean: f64,
    pub volume_log_sigma: f64,
    pub start_year: i32,
    pub years: u32,
    pub tick: TickSize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_days: 500,
            session: SessionKind::Rth,
            vol_per_bar: 3.0,
            seed: 0,
            drift: None,
            regimes: None,
            start_price: 15000.0,
            volume_mean: 1000.0,
            volume_log_sigma: VOLUME_LOG_SIGMA,
            start_year: 2022,
            years: 4,
            tick: TickSize::default(),
        }
    }
}

/// `n_days` weekdays spread evenly over `years` calendar years starting in
/// January of `start_year`; earlier years take the remainder.
pub fn trading_dates(n_days: usize, start_year: i32, years: u32) -> Vec<NaiveDate> {
    let years = years.max(1) as usize;
    let mut out = Vec::with_capacity(n_days);
    for y in 0..years {
        let count = n_days / years + usize::from(y < n_days % years);
        let mut d = NaiveDate::from_ymd_opt(start_year + y as i32, 1, 1).unwrap();
        while out.len() < out.capacity() && count > 0 {
            if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                out.push(d);
                if out.iter().filter(|x| x.year() == d.year()).count() == count {
                    break;
                }
            }
            d += Duration::days(1);
        }
    }
    out
}

/// Random draws for one session-day, before any price levels are set.
#[derive(Debug, Clone)]
pub(crate) struct DayNoise {
    pub labels: Vec<u8>,
    pub volumes: Vec<u64>,
    /// Standard normals, `SUB_STEPS` per bar.
    pub z: Vec<[f64; SUB_STEPS]>,
    pub gap_z: f64,
    pub rng_tail: u64,
}

pub(crate) fn day_noise(
    seed: u64,
    n_bars: usize,
    regimes: &RegimeSpec,
    stationary: &[f64],
    volume_mean: f64,
    volume_log_sigma: f64,
) -> DayNoise {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, p: &[f64]| {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in p.iter().enumerate() {
            acc += w;
            if u < acc {
                return i as u8;
            }
        }
        (p.len() - 1) as u8
    };
    let mut labels = Vec::with_capacity(n_bars);
    let mut s = draw(&mut rng, stationary);
    for i in 0..n_bars {
        if i > 0 {
            s = draw(&mut rng, &regimes.transition[s as usize]);
        }
        labels.push(s);
    }
    // LogNormal with the requested arithmetic mean.
    let mu = volume_mean.ln() - volume_log_sigma * volume_log_sigma / 2.0;
    let ln = LogNormal::new(mu, volume_log_sigma).unwrap();
    let volumes = labels
        .iter()
        .map(|&l| ((ln.sample(&mut rng) * regimes.volume_mult[l as usize]).round() as u64).max(1))
        .collect();
    let z = (0..n_bars)
        .map(|_| std::array::from_fn(|_| StandardNormal.sample(&mut rng)))
        .collect();
    let gap_z = StandardNormal.sample(&mut rng);
    let rng_tail = rng.random();
    DayNoise {
        labels,
        volumes,
        z,
        gap_z,
        rng_tail,
    }
}

/// Builds bars from noise and per-bar means, starting at `start` ticks.
/// Returns the bars; the last close is the next session's reference.
pub(crate) fn build_bars(
    session: SessionKind,
    date: NaiveDate,
    start: Price,
    noise: &DayNoise,
    means: &[f64],
    sds: &[f64],
    tick: TickSize,
) -> Vec<Bar> {
    let spec = session.spec();
    let sub = (SUB_STEPS as f64).sqrt();
    let mut x = 0.0f64;
    let mut bars = Vec::with_capacity(noise.z.len());
    for (i, zs) in noise.z.iter().enumerate() {
        let open = start + tick.round(x);
        let (mut hi, mut lo) = (open, open);
        for z in zs {
            x += means[i] / SUB_STEPS as f64 + sds[i] / sub * z;
            let p = start + tick.round(x);
            hi = hi.max(p);
            lo = lo.min(p);
        }
        let close = start + tick.round(x);
        bars.push(Bar {
            ts: spec.bar_ts(date, i),
            open,
            high: hi,
            low: lo,
            close,
            volume: noise.volumes[i],
        });
    }
    bars
}

fn per_day_seeds(seed: u64, session: SessionKind, n: usize) -> Vec<u64> {
    (0..n)
        .map(|i| derive_seed(seed, &format!("synth/{}", session.name()), i as u64))
        .collect()
}

/// Shared engine for the single-session generators.
fn generate(
    spec: &SynthSpec,
    plant: bool,
) -> Result<(Vec<TradingDay>, Vec<Vec<u8>>, Vec<SignalEvent>, usize), SynthError> {
    if !(spec.vol_per_bar > 0.0) {
        return Err(SynthError::NonPositiveVol);
    }
    let regimes = spec.regimes.clone().unwrap_or_else(RegimeSpec::single);
    regimes.validate()?;
    let stationary = regimes.stationary();
    let n_bars = spec.session.spec().nominal_bars();
    let dates = trading_dates(spec.n_days, spec.start_year, spec.years);
    let seeds = per_day_seeds(spec.seed, spec.session, dates.len());
    let noises: Vec<DayNoise> = seeds
        .par_iter()
        .map(|&s| {
            day_noise(
                s,
                n_bars,
                &regimes,
                &stationary,
                spec.volume_mean,
                spec.volume_log_sigma,
            )
        })
        .collect();

    let mut planted = Vec::new();
    let mut skipped = 0usize;
    let mut level = spec.tick.round(spec.start_price);
    let mut days = Vec::with_capacity(dates.len());
    let mut prev_close: Option<Price> = None;
    for (date, noise) in dates.iter().zip(&noises) {
        let mut means: Vec<f64> = noise
            .labels
            .iter()
            .map(|&l| regimes.mean[l as usize])
            .collect();
        let sds: Vec<f64> = noise
            .labels
            .iter()
            .map(|&l| spec.vol_per_bar * regimes.vol_mult[l as usize])
            .collect();
        if let (true, Some(d)) = (plant, &spec.drift) {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_tail);
            for _ in 0..d.events_per_day {
                let b = rng.random_range(0..n_bars);
                let dir = d.direction.unwrap_or(if rng.random_bool(0.5) {
                    Direction::Long
                } else {
                    Direction::Short
                });
                if d.horizon == 0 || b + d.horizon > n_bars - 1 {
                    skipped += 1;
                    continue;
                }
                for m in &mut means[b + 1..=b + d.horizon] {
                    *m += dir.sign() as f64 * d.magnitude / d.horizon as f64;
                }
                planted.push(SignalEvent::new(d.family, *date, b, dir).with("planted", 1.0));
            }
        }
        let bars = build_bars(spec.session, *date, level, noise, &means, &sds, spec.tick);
        level = bars.last().map_or(level, |b| b.close);
        days.push(TradingDay {
            date: *date,
            session: spec.session,
            tick: spec.tick,
            bars,
            prior_rth_close: if spec.session == SessionKind::Rth {
                prev_close
            } else {
                None
            },
            complete: true,
        });
        prev_close = Some(level);
    }
    let labels = noises.into_iter().map(|n| n.labels).collect();
    Ok((days, labels, planted, skipped))
}

pub fn gen_null_days(spec: &SynthSpec) -> Result<Vec<TradingDay>, SynthError> {
    if spec.drift.is_some() {
        return Err(SynthError::DriftInNull);
    }
    Ok(generate(spec, false)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDays {
    pub days: Vec<TradingDay>,
    pub planted: Vec<SignalEvent>,
    /// Plantings dropped because the horizon ran past the session end.
    pub skipped: usize,
}

pub fn gen_edge_days(spec: &SynthSpec) -> Result<EdgeDays, SynthError> {
    if spec.drift.is_none() {
        return Err(SynthError::Missing("drift"));
    }
    let (days, _, planted, skipped) = generate(spec, true)?;
    Ok(EdgeDays {
        days,
        planted,
        skipped,
    })
}

pub fn gen_regime_days(spec: &SynthSpec) -> Result<(Vec<TradingDay>, Vec<Vec<u8>>), SynthError> {
    if spec.regimes.is_none() {
        return Err(SynthError::Missing("regimes"));
    }
    let (days, labels, _, _) = generate(spec, false)?;
    Ok((days, labels))
}
