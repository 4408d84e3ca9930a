//! Run configuration: one TOML file per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::execution::{ExitSpec, FrictionModel};
use crate::market::TickSize;
use crate::signals::{Family, FamilyParams};
use crate::stats::permutation::MIN_ITERATIONS;
use crate::stats::GateConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("family {0} has no declared grid")]
    Undeclared(Family),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instrument {
    pub tick: f64,
    /// Round-trip friction in points.
    pub friction: f64,
}

impl Default for Instrument {
    fn default() -> Self {
        Instrument {
            tick: 0.25,
            friction: 2.0,
        }
    }
}

/// Bar and calendar files; relative paths resolve against the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub rth: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asia: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub london: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
}

impl DataPaths {
    pub fn resolve(&self, base: &Path) -> DataPaths {
        let r = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        DataPaths {
            rth: r(&self.rth),
            asia: self.asia.as_ref().map(r),
            london: self.london.as_ref().map(r),
            events: self.events.as_ref().map(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyGrid {
    /// Parameter points; every point is crossed with every exit.
    #[serde(default = "one_point")]
    pub params: Vec<FamilyParams>,
    pub exits: Vec<ExitSpec>,
    /// Whether the gate requires a permutation p for this family.
    #[serde(default = "yes")]
    pub permutation: bool,
}

fn one_point() -> Vec<FamilyParams> {
    vec![FamilyParams::default()]
}

fn yes() -> bool {
    true
}

impl FamilyGrid {
    pub fn new(params: Vec<FamilyParams>, exits: Vec<ExitSpec>) -> Self {
        FamilyGrid {
            params,
            exits,
            permutation: true,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len() * self.exits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid index → (params, exit), params-major.
    pub fn point(&self, g: usize) -> (&FamilyParams, &ExitSpec) {
        (
            &self.params[g / self.exits.len()],
            &self.exits[g % self.exits.len()],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_iterations")]
    pub permutation_iterations: usize,
    /// Walk-forward years; empty means every year present in the RTH data.
    #[serde(default)]
    pub years: Vec<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<PathBuf>,
    #[serde(default)]
    pub instrument: Instrument,
    pub data: DataPaths,
    #[serde(default)]
    pub gate: GateConfig,
    pub families: BTreeMap<Family, FamilyGrid>,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_iterations() -> usize {
    MIN_ITERATIONS
}

fn horizons(hs: &[usize]) -> Vec<ExitSpec> {
    hs.iter()
        .map(|&horizon| ExitSpec::Horizon { horizon })
        .collect()
}

fn vary(f: impl Fn(&mut FamilyParams, usize), n: usize) -> Vec<FamilyParams> {
    (0..n)
        .map(|k| {
            let mut p = FamilyParams::default();
            f(&mut p, k);
            p
        })
        .collect()
}

/// Grids used when a config does not override them.
pub fn default_grids() -> BTreeMap<Family, FamilyGrid> {
    let one = one_point;
    let mut g = BTreeMap::new();
    let orb_exits = || {
        let mut e = horizons(&[1, 6, 15]);
        e.push(ExitSpec::StopHorizon {
            horizon: 15,
            stop: 20.0,
        });
        e
    };
    g.insert(Family::OrbLong, FamilyGrid::new(one(), orb_exits()));
    g.insert(Family::OrbShort, FamilyGrid::new(one(), orb_exits()));
    g.insert(
        Family::OrbPullback,
        FamilyGrid::new(
            one(),
            vec![
                ExitSpec::Horizon { horizon: 6 },
                ExitSpec::StopHorizon {
                    horizon: 15,
                    stop: 20.0,
                },
            ],
        ),
    );
    g.insert(
        Family::AsiaExpansion,
        FamilyGrid::new(
            vary(|p, k| p.expansion_multiple = [1.5, 2.0, 2.5][k], 3),
            horizons(&[1, 6]),
        ),
    );
    let grab = || vary(|p, k| p.grab_lookback = [None, Some(20)][k], 2);
    g.insert(
        Family::LiquidityGrabFade,
        FamilyGrid::new(grab(), horizons(&[1, 6])),
    );
    g.insert(
        Family::LiquidityGrabCont,
        FamilyGrid::new(grab(), horizons(&[1, 6])),
    );
    g.insert(
        Family::GapFillFade,
        FamilyGrid::new(one(), horizons(&[6, 12])),
    );
    g.insert(
        Family::GapContShort,
        FamilyGrid::new(one(), horizons(&[6, 12])),
    );
    g.insert(Family::VolSpike, FamilyGrid::new(one(), horizons(&[1, 6])));
    g.insert(Family::VolDryup, FamilyGrid::new(one(), horizons(&[1, 6])));
    g.insert(
        Family::VvgReversal,
        FamilyGrid::new(one(), horizons(&[6, 12])),
    );
    g.insert(
        Family::VvgContinuation,
        FamilyGrid::new(one(), horizons(&[6, 12])),
    );
    g.insert(
        Family::VvgCloseFade,
        FamilyGrid::new(
            one(),
            vec![ExitSpec::Clock {
                clock: NaiveTime::from_hms_opt(15, 55, 0).unwrap(),
            }],
        ),
    );
    g.insert(
        Family::EventDrift,
        FamilyGrid::new(one(), horizons(&[6, 12])),
    );
    g.insert(
        Family::OuReversion,
        FamilyGrid::new(
            vary(|p, k| p.ou_threshold = [1.5, 2.0, 2.5][k], 3),
            horizons(&[6]),
        ),
    );
    g.insert(
        Family::ConfluenceRth,
        FamilyGrid::new(
            one(),
            vec![
                ExitSpec::Horizon { horizon: 13 },
                ExitSpec::PullbackLimit {
                    horizon: 13,
                    limit_offset: 25.0,
                },
            ],
        ),
    );
    g.insert(Family::LondonB, FamilyGrid::new(one(), horizons(&[4])));
    g
}

impl RunConfig {
    /// Every family with its default grid.
    pub fn with_defaults(data: DataPaths, seed: u64) -> Self {
        RunConfig {
            seed,
            permutation_iterations: MIN_ITERATIONS,
            years: vec![],
            output_dir: None,
            ledger: None,
            instrument: Instrument::default(),
            data,
            gate: GateConfig::default(),
            families: default_grids(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads and validates a config; relative paths in it are taken
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let mut c = Self::from_toml(&text)?;
        c.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(c)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_paths(&self) -> DataPaths {
        self.data.resolve(&self.base_dir)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex sha256 of the canonical serialization.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Run directory name: the first 16 hex digits of [`RunConfig::hash`].
    pub fn run_id(&self) -> String {
        self.hash()[..16].to_string()
    }

    pub fn tick(&self) -> Result<TickSize, ConfigError> {
        TickSize::new(self.instrument.tick).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn friction(&self) -> FrictionModel {
        FrictionModel {
            round_trip: self.instrument.friction,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let tick = self.tick()?;
        if let Err(e) = self.friction().ticks(tick) {
            return bad(e.to_string());
        }
        if self.permutation_iterations < MIN_ITERATIONS {
            return bad(format!(
                "permutation_iterations must be at least {MIN_ITERATIONS}"
            ));
        }
        if self.families.is_empty() {
            return bad("no families declared".into());
        }
        for (f, grid) in &self.families {
            if grid.is_empty() {
                return bad(format!("{f}: empty grid"));
            }
            for e in &grid.exits {
                if let Err(err) = e.validate() {
                    return bad(format!("{f}: {err}"));
                }
            }
            for p in &grid.params {
                check_params(p).map_err(|m| ConfigError::Invalid(format!("{f}: {m}")))?;
            }
        }
        Ok(())
    }

    /// The selected family, or every declared family in canonical order.
    pub fn families_for(&self, only: Option<Family>) -> Result<Vec<Family>, ConfigError> {
        match only {
            Some(f) if self.families.contains_key(&f) => Ok(vec![f]),
            Some(f) => Err(ConfigError::Undeclared(f)),
            None => Ok(self.families.keys().copied().collect()),
        }
    }
}

fn check_params(p: &FamilyParams) -> Result<(), String> {
    let windows = [
        ("expansion_window", p.expansion_window),
        ("volume_window", p.volume_window),
        ("ou_window", p.ou_window),
        ("volume_z_window", p.volume_z_window),
        ("atr_window", p.atr_window),
    ];
    for (name, w) in windows {
        if w < 2 {
            return Err(format!("{name} must be at least 2"));
        }
    }
    if p.transition_window < crate::features::markov::MIN_WINDOW {
        return Err("transition_window below minimum".into());
    }
    if p.grab_lookback.is_some_and(|n| n == 0) {
        return Err("grab_lookback must be positive".into());
    }
    for (name, q) in [
        ("spike_quantile", p.spike_quantile),
        ("dryup_quantile", p.dryup_quantile),
    ] {
        if !(0.0..=1.0).contains(&q) {
            return Err(format!("{name} outside [0, 1]"));
        }
    }
    if p.event_offset < crate::signals::event::MIN_EVENT_OFFSET {
        return Err(format!(
            "event_offset {} below {}",
            p.event_offset,
            crate::signals::event::MIN_EVENT_OFFSET
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        let mut c = RunConfig::with_defaults(
            DataPaths {
                rth: "rth.csv".into(),
                asia: Some("asia.csv".into()),
                london: None,
                events: None,
            },
            7,
        );
        c.years = vec![2022, 2023];
        c.output_dir = Some("runs".into());
        c
    }

    #[test]
    fn round_trips_losslessly() {
        let c = sample();
        let text = c.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn minimal_file_takes_defaults() {
        let c = RunConfig::from_toml(
            r#"
            seed = 1
            [data]
            rth = "rth.csv"
            [families.ORB_LONG]
            exits = [{ kind = "HORIZON", horizon = 15 }]
            "#,
        )
        .unwrap();
        assert_eq!(c.instrument.friction, 2.0);
        assert_eq!(c.gate, GateConfig::default());
        assert_eq!(
            c.families[&Family::OrbLong].params,
            vec![FamilyParams::default()]
        );
        assert!(matches!(
            c.families_for(Some(Family::LondonB)),
            Err(ConfigError::Undeclared(Family::LondonB))
        ));
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = sample();
        c.instrument.friction = -1.0;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.permutation_iterations = 10;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.families.get_mut(&Family::OrbLong).unwrap().exits.clear();
        assert!(c.validate().is_err());
        assert!(matches!(
            RunConfig::from_toml("seed = 1\nbogus = 2\n"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = sample();
        let mut b = sample();
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.run_id().len(), 16);
    }

    #[test]
    fn grid_points_are_params_major() {
        let g = &default_grids()[&Family::AsiaExpansion];
        assert_eq!(g.len(), 6);
        let (p, e) = g.point(3);
        assert_eq!(p.expansion_multiple, 2.0);
        assert_eq!(*e, ExitSpec::Horizon { horizon: 6 });
    }
}
