//! Regime-driven positive controls: the RTH confluence signal and the London
//! bearish-to-bullish transition.

use serde::{Deserialize, Serialize};

use super::{Direction, Family, FamilyParams, SignalEvent};
use crate::market::TradingDay;

/// Per-bar inputs to the confluence rule, aligned with the day's bars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfluenceBar {
    pub label: Option<u8>,
    /// Rolling P(1 → 2) over the prior transition window.
    pub p_to_bull: Option<f64>,
    pub volume_z: Option<f64>,
    pub atr: Option<f64>,
}

pub const ACTIVE_FLOW: u8 = 1;
pub const BEARISH_CHOP: u8 = 0;
pub const BULLISH_DRIFT: u8 = 2;
pub const CONFLUENCE_EXIT_BARS: usize = 13;
pub const LONDON_B_EXIT_BARS: usize = 4;

/// LONG where label = 1, P(1→2) > `transition_prob` and volume z >
/// `volume_z`, all strict. The resting entry sits `confluence_pullback`
/// points below the signal close, scaled by ATR over `atr_baseline`.
pub fn confluence_rth_signals(
    day: &TradingDay,
    inputs: &[ConfluenceBar],
    params: &FamilyParams,
    atr_baseline: f64,
) -> Vec<SignalEvent> {
    let mut out = Vec::new();
    for (i, x) in inputs.iter().enumerate().take(day.last_index()) {
        let (Some(label), Some(p), Some(z)) = (x.label, x.p_to_bull, x.volume_z) else {
            continue;
        };
        if label != ACTIVE_FLOW || p <= params.transition_prob || z <= params.volume_z {
            continue;
        }
        let scale = match x.atr {
            Some(a) if atr_baseline > 0.0 => a / atr_baseline,
            _ => 1.0,
        };
        let offset = day.tick.round(params.confluence_pullback * scale);
        let mut ev = SignalEvent::new(Family::ConfluenceRth, day.date, i, Direction::Long)
            .with("p_to_bull", p)
            .with("volume_z", z)
            .with("atr_scale", scale)
            .with("exit_bar", CONFLUENCE_EXIT_BARS as f64);
        ev.entry_limit = Some(day.bars[i].close - offset);
        out.push(ev);
    }
    out
}

/// LONG at `t` when label(t) = 2 and label(t−1) = 0 with no Regime 1 at
/// t−2 (when that bar exists).
pub fn london_b_signals(day: &TradingDay, labels: &[Option<u8>]) -> Vec<SignalEvent> {
    let mut out = Vec::new();
    for t in 1..day.last_index().min(labels.len()) {
        if labels[t] != Some(BULLISH_DRIFT) || labels[t - 1] != Some(BEARISH_CHOP) {
            continue;
        }
        if t >= 2 && labels[t - 2].is_none_or(|l| l == ACTIVE_FLOW) {
            continue;
        }
        out.push(
            SignalEvent::new(Family::LondonB, day.date, t, Direction::Long).with(
                "exit_bar",
                LONDON_B_EXIT_BARS.min(day.last_index() - t) as f64,
            ),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::SessionKind;
    use crate::signals::testutil::flat;

    fn bar(label: u8, p: f64, z: f64) -> ConfluenceBar {
        ConfluenceBar {
            label: Some(label),
            p_to_bull: Some(p),
            volume_z: Some(z),
            atr: Some(3.0),
        }
    }

    #[test]
    fn one_planted_confluence_bar() {
        let d = flat(SessionKind::Rth, 78);
        let mut inputs = vec![bar(0, 0.5, 2.0); 78];
        inputs[40] = bar(1, 0.3, 0.9);
        inputs[41] = bar(1, 0.3, 0.4);
        inputs[42] = bar(1, 0.1, 0.9);
        let ev = confluence_rth_signals(&d, &inputs, &FamilyParams::default(), 3.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].bar_index, 40);
        // ATR equal to baseline keeps the 25-point offset.
        assert_eq!(
            ev[0].entry_limit,
            Some(d.bars[40].close - crate::market::Price(25))
        );
    }

    #[test]
    fn boundary_probability_excluded() {
        let d = flat(SessionKind::Rth, 78);
        let inputs = vec![bar(1, 0.15, 0.9); 78];
        assert!(confluence_rth_signals(&d, &inputs, &FamilyParams::default(), 3.0).is_empty());
    }

    #[test]
    fn no_active_flow_no_events() {
        let d = flat(SessionKind::Rth, 78);
        let inputs = vec![bar(2, 0.9, 3.0); 78];
        assert!(confluence_rth_signals(&d, &inputs, &FamilyParams::default(), 3.0).is_empty());
    }

    fn london(prefix: &[u8]) -> Vec<usize> {
        let d = flat(SessionKind::London, 22);
        let mut labels: Vec<Option<u8>> = prefix.iter().map(|&l| Some(l)).collect();
        labels.resize(22, Some(2));
        london_b_signals(&d, &labels)
            .iter()
            .map(|e| e.bar_index)
            .collect()
    }

    #[test]
    fn london_transition_rules() {
        assert_eq!(london(&[0, 0, 2]), vec![2]);
        assert_eq!(london(&[1, 0, 2]), Vec::<usize>::new());
        assert_eq!(london(&[0, 2, 2]), vec![1]);
    }

    #[test]
    fn london_exit_capped_at_session_end() {
        let d = flat(SessionKind::London, 22);
        let mut labels = vec![Some(0u8); 22];
        labels[19] = Some(2);
        let ev = london_b_signals(&d, &labels);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].meta["exit_bar"], 2.0);
    }
}
