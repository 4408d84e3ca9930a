//! Rescaled-range (R/S) Hurst exponent.

use super::FeatureError;

pub const MIN_LENGTH: usize = 100;

/// R/S of one chunk: range of mean-adjusted cumulative sums over the
/// population standard deviation. `None` when the chunk has no dispersion.
fn rescaled_range(chunk: &[f64]) -> Option<f64> {
    let n = chunk.len() as f64;
    let m = chunk.iter().sum::<f64>() / n;
    let (mut cum, mut lo, mut hi, mut ss) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &x in chunk {
        let d = x - m;
        cum += d;
        lo = lo.min(cum);
        hi = hi.max(cum);
        ss += d * d;
    }
    let s = (ss / n).sqrt();
    (s > 0.0).then(|| (hi - lo) / s)
}

/// Anis–Lloyd–Peters expected R/S of `n` iid normal observations.
fn expected_rescaled_range(n: usize) -> f64 {
    // ratio = Γ((n−1)/2) / (√π Γ(n/2)), by the two-step recurrence from n = 2 or 3.
    let pi = std::f64::consts::PI;
    let (mut m, mut ratio) = if n.is_multiple_of(2) { (2, 1.0) } else { (3, 2.0 / pi) };
    while m < n {
        ratio *= (m as f64 - 1.0) / m as f64;
        m += 2;
    }
    let nf = n as f64;
    let sum: f64 = (1..n).map(|i| ((nf - i as f64) / i as f64).sqrt()).sum();
    (nf - 0.5) / nf * ratio * sum
}

/// R/S Hurst estimate over dyadic chunk sizes `min_chunk, 2·min_chunk, …` up
/// to `len / 2`: 0.5 plus the log-log slope of mean R/S in excess of its
/// small-sample iid expectation (Anis–Lloyd–Peters), so iid input sits at 0.5
/// without the upward bias of short chunks.
pub fn hurst_exponent(returns: &[f64], min_chunk: usize) -> Result<f64, FeatureError> {
    if returns.len() < MIN_LENGTH {
        return Err(FeatureError::TooShort {
            need: MIN_LENGTH,
            have: returns.len(),
        });
    }
    if min_chunk < 4 {
        return Err(FeatureError::InvalidParameter(format!(
            "min_chunk {min_chunk} < 4"
        )));
    }
    if returns.iter().any(|x| !x.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    let first = returns[0];
    if returns.iter().all(|&x| x == first) {
        return Err(FeatureError::ZeroDispersion);
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut size = min_chunk;
    while size <= returns.len() / 2 {
        let rs: Vec<f64> = returns
            .chunks_exact(size)
            .filter_map(rescaled_range)
            .collect();
        if !rs.is_empty() {
            xs.push((size as f64).ln());
            let mean_rs = rs.iter().sum::<f64>() / rs.len() as f64;
            ys.push(mean_rs.ln() - expected_rescaled_range(size).ln());
        }
        size *= 2;
    }
    if xs.len() < 2 {
        return Err(FeatureError::InvalidParameter(format!(
            "need at least two chunk sizes between {min_chunk} and {}",
            returns.len() / 2
        )));
    }
    Ok(0.5 + ols_slope(&xs, &ys))
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn iid_returns_near_half() {
        for seed in 0..50 {
            let h = hurst_exponent(&gaussian(seed, 10_000), 8).unwrap();
            assert!((h - 0.5).abs() < 0.07, "seed {seed}: {h}");
        }
    }

    #[test]
    fn expected_rescaled_range_matches_simulation() {
        for n in [32usize, 33, 128] {
            let reps = 4000;
            let mean: f64 = (0..reps)
                .map(|s| rescaled_range(&gaussian(1000 + s as u64, n)).unwrap())
                .sum::<f64>()
                / reps as f64;
            let e = expected_rescaled_range(n);
            assert!((mean - e).abs() / e < 0.03, "n {n}: sim {mean} formula {e}");
        }
    }

    #[test]
    fn alternating_series_is_anti_persistent() {
        let xs: Vec<f64> = (0..1024)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let h = hurst_exponent(&xs, 8).unwrap();
        assert!(h < 0.2, "{h}");
    }

    #[test]
    fn smoothed_series_is_persistent() {
        // Moving average of iid noise over 50 steps: strong short-range memory.
        let raw = gaussian(3, 5000 + 50);
        let xs: Vec<f64> = (0..5000)
            .map(|i| raw[i..i + 50].iter().sum::<f64>())
            .collect();
        let h = hurst_exponent(&xs, 8).unwrap();
        assert!(h > 0.6, "{h}");
    }

    #[test]
    fn constant_series_errors() {
        assert!(matches!(
            hurst_exponent(&[1.0; 200], 8),
            Err(FeatureError::ZeroDispersion)
        ));
    }

    #[test]
    fn short_series_errors() {
        assert!(hurst_exponent(&gaussian(1, 50), 8).is_err());
    }
}
