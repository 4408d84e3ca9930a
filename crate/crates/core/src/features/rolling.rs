//! Rolling statistics over strictly-prior windows.

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::market::{Bar, TickSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RollingStatistic {
    MeanRange,
    VolumeMean,
    VolumeStd,
    Atr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingSpec {
    pub window: usize,
    pub statistic: RollingStatistic,
}

impl RollingSpec {
    pub fn new(statistic: RollingStatistic, window: usize) -> Self {
        RollingSpec { window, statistic }
    }
}

pub(crate) fn check_window(window: usize) -> Result<(), FeatureError> {
    if window < 2 {
        Err(FeatureError::WindowTooSmall(window))
    } else {
        Ok(())
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// True range of bar `i` using the prior bar's close (plain range for `i = 0`).
pub fn true_range(bars: &[Bar], i: usize, tick: TickSize) -> f64 {
    let b = &bars[i];
    let hl = tick.to_points(b.range());
    if i == 0 {
        return hl;
    }
    let pc = bars[i - 1].close;
    hl.max(tick.to_points((b.high - pc).abs()))
        .max(tick.to_points((b.low - pc).abs()))
}

/// Value at `i` summarises bars `i-window..i` (the current bar excluded);
/// the first `window` entries are absent.
pub fn rolling_stat(
    bars: &[Bar],
    spec: RollingSpec,
    tick: TickSize,
) -> Result<Vec<Option<f64>>, FeatureError> {
    check_window(spec.window)?;
    let w = spec.window;
    let per_bar: Vec<f64> = match spec.statistic {
        RollingStatistic::MeanRange => bars.iter().map(|b| tick.to_points(b.range())).collect(),
        RollingStatistic::VolumeMean | RollingStatistic::VolumeStd => {
            bars.iter().map(|b| b.volume as f64).collect()
        }
        RollingStatistic::Atr => (0..bars.len()).map(|i| true_range(bars, i, tick)).collect(),
    };
    Ok((0..bars.len())
        .map(|i| {
            if i < w {
                return None;
            }
            let win = &per_bar[i - w..i];
            Some(match spec.statistic {
                RollingStatistic::VolumeStd => sample_std(win),
                _ => mean(win),
            })
        })
        .collect())
}

/// `(v_i − mean) / std` against the prior `window` volumes; absent during
/// warm-up or when the window has zero dispersion.
pub fn volume_zscore(bars: &[Bar], window: usize) -> Result<Vec<Option<f64>>, FeatureError> {
    check_window(window)?;
    let vols: Vec<f64> = bars.iter().map(|b| b.volume as f64).collect();
    Ok((0..vols.len())
        .map(|i| {
            if i < window {
                return None;
            }
            let win = &vols[i - window..i];
            let sd = sample_std(win);
            (sd > 0.0).then(|| (vols[i] - mean(win)) / sd)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Price;
    use chrono::NaiveDate;

    fn bars_with(ranges: &[i64], vols: &[u64]) -> Vec<Bar> {
        let ts = NaiveDate::from_ymd_opt(2023, 1, 3)
            .unwrap()
            .and_hms_opt(9, 30, 0)
            .unwrap();
        ranges
            .iter()
            .zip(vols)
            .enumerate()
            .map(|(i, (&r, &v))| Bar {
                ts: ts + chrono::Duration::minutes(5 * i as i64),
                open: Price(100),
                high: Price(100 + r),
                low: Price(100),
                close: Price(100),
                volume: v,
            })
            .collect()
    }

    const T: fn() -> TickSize = || TickSize::new(1.0).unwrap();

    #[test]
    fn constant_range_mean() {
        let bars = bars_with(&[2; 30], &[1; 30]);
        let out = rolling_stat(
            &bars,
            RollingSpec::new(RollingStatistic::MeanRange, 20),
            T(),
        )
        .unwrap();
        assert!(out[..20].iter().all(Option::is_none));
        assert!(out[20..].iter().all(|v| *v == Some(2.0)));
    }

    #[test]
    fn warm_up_is_absent() {
        let bars = bars_with(&[2; 25], &[1; 25]);
        let out = rolling_stat(
            &bars,
            RollingSpec::new(RollingStatistic::MeanRange, 20),
            T(),
        )
        .unwrap();
        assert_eq!(out.iter().take_while(|v| v.is_none()).count(), 20);
    }

    #[test]
    fn index_24_is_mean_of_ranges_4_to_23() {
        // ranges 1..=25; bars 4..=23 carry ranges 5..=24, whose mean is 14.5.
        let ranges: Vec<i64> = (1..=25).collect();
        let bars = bars_with(&ranges, &[1; 25]);
        let out = rolling_stat(
            &bars,
            RollingSpec::new(RollingStatistic::MeanRange, 20),
            T(),
        )
        .unwrap();
        assert_eq!(out[24], Some(14.5));
    }

    #[test]
    fn window_below_two_rejected() {
        let bars = bars_with(&[1; 5], &[1; 5]);
        assert!(rolling_stat(&bars, RollingSpec::new(RollingStatistic::Atr, 1), T()).is_err());
        assert!(volume_zscore(&bars, 1).is_err());
    }

    #[test]
    fn atr_uses_prior_close() {
        let ts = NaiveDate::from_ymd_opt(2023, 1, 3)
            .unwrap()
            .and_hms_opt(9, 30, 0)
            .unwrap();
        let bars = vec![
            Bar {
                ts,
                open: Price(10),
                high: Price(11),
                low: Price(9),
                close: Price(10),
                volume: 1,
            },
            Bar {
                ts,
                open: Price(15),
                high: Price(16),
                low: Price(15),
                close: Price(16),
                volume: 1,
            },
            Bar {
                ts,
                open: Price(16),
                high: Price(17),
                low: Price(16),
                close: Price(17),
                volume: 1,
            },
        ];
        assert_eq!(true_range(&bars, 1, T()), 6.0);
        let out = rolling_stat(&bars, RollingSpec::new(RollingStatistic::Atr, 2), T()).unwrap();
        assert_eq!(out[2], Some(4.0));
    }

    #[test]
    fn constant_volume_zscore_absent() {
        let bars = bars_with(&[1; 60], &[500; 60]);
        assert!(volume_zscore(&bars, 50)
            .unwrap()
            .iter()
            .all(Option::is_none));
    }

    #[test]
    fn zscore_half_sigma() {
        // 50 prior volumes alternating 900/1100: mean 1000, sample std
        // sqrt(50·100²/49) = 101.015...
        let mut vols: Vec<u64> = (0..50)
            .map(|i| if i % 2 == 0 { 900 } else { 1100 })
            .collect();
        vols.push(1050);
        let bars = bars_with(&vec![1; 51], &vols);
        let z = volume_zscore(&bars, 50).unwrap()[50].unwrap();
        let sd = (50.0f64 * 100.0 * 100.0 / 49.0).sqrt();
        assert!((z - 50.0 / sd).abs() < 1e-12);
    }

    #[test]
    fn zscore_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vols: Vec<u64> = (0..60).map(|_| rng.random_range(100..2000)).collect();
        let bars = bars_with(&vec![1; 60], &vols);
        let z = volume_zscore(&bars, 20).unwrap();
        for i in 0..60 {
            if i < 20 {
                assert!(z[i].is_none());
                continue;
            }
            let w: Vec<f64> = vols[i - 20..i].iter().map(|&v| v as f64).collect();
            let m = w.iter().sum::<f64>() / 20.0;
            let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 19.0;
            let expect = (vols[i] as f64 - m) / var.sqrt();
            assert!((z[i].unwrap() - expect).abs() < 1e-9, "index {i}");
        }
    }
}
