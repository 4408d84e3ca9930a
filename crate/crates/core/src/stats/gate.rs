//! Five-criteria validation gate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::{EvalMetrics, YearMetrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub min_t: f64,
    pub min_n: usize,
    pub alpha: f64,
    /// Years with fewer trades are left out of the stability check.
    pub min_year_n: usize,
    /// An opposite-sign year with |t| above this breaks stability.
    pub opposite_t: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            min_t: 2.0,
            min_n: 30,
            alpha: 0.05,
            min_year_n: 5,
            opposite_t: 1.0,
        }
    }
}

/// Every eligible year's mean net shares the sign of the pooled mean and no
/// eligible year is significant (|t| > `opposite_t`) the other way. Needs at
/// least two eligible years.
pub fn year_stability(per_year: &BTreeMap<i32, YearMetrics>, cfg: &GateConfig) -> bool {
    let (mut total_n, mut total) = (0usize, 0.0f64);
    for y in per_year.values() {
        if let Some(m) = y.mean_net {
            total_n += y.n;
            total += m * y.n as f64;
        }
    }
    if total_n == 0 || total == 0.0 {
        return false;
    }
    let pooled_sign = total.signum();
    let eligible: Vec<&YearMetrics> = per_year
        .values()
        .filter(|y| y.n >= cfg.min_year_n && y.mean_net.is_some())
        .collect();
    if eligible.len() < 2 {
        return false;
    }
    eligible.iter().all(|y| {
        let m = y.mean_net.unwrap();
        let same = m != 0.0 && m.signum() == pooled_sign;
        let strongly_opposite = y
            .t_stat
            .is_some_and(|t| t.signum() != pooled_sign && t.abs() > cfg.opposite_t);
        same && !strongly_opposite
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Criterion {
    N,
    T,
    Net,
    Year,
    Perm,
}

/// Values the gate looks at, decoupled from how they were measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateInputs {
    pub t: Option<f64>,
    pub n: usize,
    pub mean_net: Option<f64>,
    pub year_stable: bool,
    pub p: Option<f64>,
    /// Whether a permutation p is required for this family.
    pub perm_applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub n_ok: bool,
    pub t_ok: bool,
    pub net_ok: bool,
    pub year_stable: bool,
    pub perm_ok: bool,
    pub overall: bool,
    /// "PASS" or "FAIL – <first failed criterion>".
    pub failure_label: String,
}

impl Verdict {
    pub fn first_failure(&self) -> Option<Criterion> {
        [
            (self.n_ok, Criterion::N),
            (self.t_ok, Criterion::T),
            (self.net_ok, Criterion::Net),
            (self.year_stable, Criterion::Year),
            (self.perm_ok, Criterion::Perm),
        ]
        .into_iter()
        .find(|(ok, _)| !ok)
        .map(|(_, c)| c)
    }

    /// Number of passed criteria before the permutation test.
    pub fn pre_permutation_ok(&self) -> bool {
        self.n_ok && self.t_ok && self.net_ok && self.year_stable
    }
}

fn label(c: Criterion, cfg: &GateConfig) -> String {
    let what = match c {
        Criterion::N => format!("N < {}", cfg.min_n),
        Criterion::T => format!("T < {:.1}", cfg.min_t),
        Criterion::Net => "Net ≤ 0".to_string(),
        Criterion::Year => "Year instability".to_string(),
        Criterion::Perm => format!("p ≥ {}", cfg.alpha),
    };
    format!("FAIL – {what}")
}

pub fn validate_inputs(x: &GateInputs, cfg: &GateConfig) -> Verdict {
    let n_ok = x.n >= cfg.min_n;
    let t_ok = x.t.is_some_and(|t| t >= cfg.min_t);
    let net_ok = x.mean_net.is_some_and(|m| m > 0.0);
    let perm_ok = match x.p {
        Some(p) => p < cfg.alpha,
        None => !x.perm_applicable,
    };
    let mut v = Verdict {
        n_ok,
        t_ok,
        net_ok,
        year_stable: x.year_stable,
        perm_ok,
        overall: n_ok && t_ok && net_ok && x.year_stable && perm_ok,
        failure_label: String::new(),
    };
    v.failure_label = match v.first_failure() {
        None => "PASS".to_string(),
        Some(c) => label(c, cfg),
    };
    v
}

pub fn validate(m: &EvalMetrics, cfg: &GateConfig, perm_applicable: bool) -> Verdict {
    validate_inputs(
        &GateInputs {
            t: m.t_stat,
            n: m.n,
            mean_net: m.mean_net,
            year_stable: year_stability(&m.per_year, cfg),
            p: m.permutation_p,
            perm_applicable,
        },
        cfg,
    )
}
