//! Signal families. Every generator reads a day only up to the signal bar's
//! close; entries happen at the next bar's open in the execution module.

pub mod event;
pub mod gap;
pub mod orb;
pub mod ou_reversion;
pub mod regime;
pub mod session;
pub mod vvg;

use std::collections::BTreeMap;
use std::fmt;

use chrono::{NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::market::{BarDirection, Price, SessionKind};

pub use event::event_drift_signals;
pub use gap::{gap_signals, GapVariant};
pub use orb::{orb_signals, OrbVariant};
pub use ou_reversion::{ou_reversion_signals, OuOutcome};
pub use regime::{confluence_rth_signals, london_b_signals, ConfluenceBar};
pub use session::{
    asia_expansion_signals, liquidity_grab_signals, volume_ratio_cutoffs, volume_signature_signals,
    GrabMode, Lookback, VolumeCutoffs, VolumeKind,
};
pub use vvg::{
    vvg_classify, vvg_flags, vvg_metrics, vvg_strategy_signals, vvg_terciles, VvgMetrics, VvgMode,
    VvgTerciles,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("entry time {0} is not a bar of the session")]
    EntryTimeOutsideSession(NaiveTime),
    #[error("event drift offset {0} < 6 would measure inside the release spike")]
    OffsetTooSmall(usize),
    #[error("{0}")]
    Insufficient(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Family {
    OrbLong,
    OrbShort,
    OrbPullback,
    AsiaExpansion,
    LiquidityGrabFade,
    LiquidityGrabCont,
    GapFillFade,
    GapContShort,
    VolSpike,
    VolDryup,
    VvgReversal,
    VvgContinuation,
    VvgCloseFade,
    EventDrift,
    OuReversion,
    ConfluenceRth,
    LondonB,
}

impl Family {
    pub const ALL: [Family; 17] = [
        Family::OrbLong,
        Family::OrbShort,
        Family::OrbPullback,
        Family::AsiaExpansion,
        Family::LiquidityGrabFade,
        Family::LiquidityGrabCont,
        Family::GapFillFade,
        Family::GapContShort,
        Family::VolSpike,
        Family::VolDryup,
        Family::VvgReversal,
        Family::VvgContinuation,
        Family::VvgCloseFade,
        Family::EventDrift,
        Family::OuReversion,
        Family::ConfluenceRth,
        Family::LondonB,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::OrbLong => "ORB_LONG",
            Family::OrbShort => "ORB_SHORT",
            Family::OrbPullback => "ORB_PULLBACK",
            Family::AsiaExpansion => "ASIA_EXPANSION",
            Family::LiquidityGrabFade => "LIQUIDITY_GRAB_FADE",
            Family::LiquidityGrabCont => "LIQUIDITY_GRAB_CONT",
            Family::GapFillFade => "GAP_FILL_FADE",
            Family::GapContShort => "GAP_CONT_SHORT",
            Family::VolSpike => "VOL_SPIKE",
            Family::VolDryup => "VOL_DRYUP",
            Family::VvgReversal => "VVG_REVERSAL",
            Family::VvgContinuation => "VVG_CONTINUATION",
            Family::VvgCloseFade => "VVG_CLOSE_FADE",
            Family::EventDrift => "EVENT_DRIFT",
            Family::OuReversion => "OU_REVERSION",
            Family::ConfluenceRth => "CONFLUENCE_RTH",
            Family::LondonB => "LONDON_B",
        }
    }

    /// Session whose bars the family trades.
    pub fn session(self) -> SessionKind {
        match self {
            Family::AsiaExpansion => SessionKind::Asia,
            Family::LondonB => SessionKind::London,
            _ => SessionKind::Rth,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown family {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Long => 1,
            Direction::Short => -1,
        }
    }

    pub fn flip(self) -> Direction {
        match self {
            Direction::Long => Direction::Short,
            Direction::Short => Direction::Long,
        }
    }

    /// Direction of a signed move; `None` for zero.
    pub fn of(move_: Price) -> Option<Direction> {
        match move_.0.signum() {
            1 => Some(Direction::Long),
            -1 => Some(Direction::Short),
            _ => None,
        }
    }

    pub fn of_bar(d: BarDirection) -> Option<Direction> {
        match d {
            BarDirection::Up => Some(Direction::Long),
            BarDirection::Down => Some(Direction::Short),
            BarDirection::Doji => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Long => "LONG",
            Direction::Short => "SHORT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEvent {
    pub family: Family,
    pub day: NaiveDate,
    pub bar_index: usize,
    pub direction: Direction,
    /// Resting entry level for limit-entry exits; set by families that
    /// compute their own level.
    pub entry_limit: Option<Price>,
    pub meta: BTreeMap<String, f64>,
}

impl SignalEvent {
    pub fn new(family: Family, day: NaiveDate, bar_index: usize, direction: Direction) -> Self {
        SignalEvent {
            family,
            day,
            bar_index,
            direction,
            entry_limit: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }

    /// `family,date,bar_index,direction,key=value;…`
    pub fn to_record(&self) -> String {
        let meta: Vec<String> = self.meta.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{},{},{},{},{}",
            self.family,
            self.day,
            self.bar_index,
            self.direction.as_str(),
            meta.join(";")
        )
    }
}

/// Numeric parameters for every family; a grid point sets the fields it
/// varies and leaves the rest at their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyParams {
    pub expansion_multiple: f64,
    pub expansion_window: usize,
    /// Fixed lookback for the liquidity grab; `None` uses the running session extreme.
    pub grab_lookback: Option<usize>,
    pub pullback_points: f64,
    pub stop_points: f64,
    pub entry_time: NaiveTime,
    pub min_gap: f64,
    pub kalman_threshold: f64,
    pub kalman_zscored: bool,
    pub kalman_q: f64,
    pub kalman_r: f64,
    pub volume_window: usize,
    pub spike_quantile: f64,
    pub dryup_quantile: f64,
    pub vvg_baseline_days: usize,
    pub event_offset: usize,
    pub event_kinds: Vec<String>,
    pub ou_threshold: f64,
    pub ou_rearm: f64,
    pub ou_window: usize,
    pub transition_prob: f64,
    pub transition_window: usize,
    pub volume_z: f64,
    pub volume_z_window: usize,
    pub confluence_pullback: f64,
    pub atr_window: usize,
    pub close_fade_time: NaiveTime,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            expansion_multiple: 1.5,
            expansion_window: 20,
            grab_lookback: None,
            pullback_points: 5.0,
            stop_points: 20.0,
            entry_time: NaiveTime::from_hms_opt(9, 30, 0).unwrap(),
            min_gap: 5.0,
            kalman_threshold: 2.5,
            kalman_zscored: false,
            kalman_q: 1e-3,
            kalman_r: 1.0,
            volume_window: 20,
            spike_quantile: 0.9,
            dryup_quantile: 0.1,
            vvg_baseline_days: 20,
            event_offset: 6,
            event_kinds: vec![],
            ou_threshold: 1.5,
            ou_rearm: 0.5,
            ou_window: 390,
            transition_prob: 0.15,
            transition_window: 200,
            volume_z: 0.5,
            volume_z_window: 50,
            confluence_pullback: 25.0,
            atr_window: 14,
            close_fade_time: NaiveTime::from_hms_opt(15, 30, 0).unwrap(),
        }
    }
}
