//! AR(1) / Ornstein–Uhlenbeck fit on price levels.

use serde::{Deserialize, Serialize};

use super::FeatureError;

pub const MIN_LENGTH: usize = 30;

/// 1% critical value of the Dickey–Fuller t statistic (regression with a
/// constant, large sample). A fit whose unit-root t is not below this value is
/// not treated as mean reverting.
pub const UNIT_ROOT_CRITICAL_T: f64 = -3.43;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuFit {
    pub phi: f64,
    pub intercept: f64,
    /// Long-run mean, defined when `phi < 1`.
    pub mu: Option<f64>,
    pub sigma_eps: f64,
    /// t statistic of `phi − 1`.
    pub unit_root_t: f64,
    /// Bars for a deviation to halve; `None` unless mean reversion is established.
    pub half_life: Option<f64>,
    pub n: usize,
}

impl OuFit {
    pub fn is_tradeable(&self) -> bool {
        self.half_life.is_some()
    }

    /// `sigma_eps / sqrt(1 − phi²)`.
    pub fn stationary_std(&self) -> Option<f64> {
        (self.phi.abs() < 1.0).then(|| self.sigma_eps / (1.0 - self.phi * self.phi).sqrt())
    }
}

/// Least squares `x[t+1] = c + phi·x[t] + e`.
pub fn ou_fit(prices: &[f64]) -> Result<OuFit, FeatureError> {
    if prices.len() < MIN_LENGTH {
        return Err(FeatureError::TooShort {
            need: MIN_LENGTH,
            have: prices.len(),
        });
    }
    if prices.iter().any(|x| !x.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    let x = &prices[..prices.len() - 1];
    let y = &prices[1..];
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(FeatureError::ZeroDispersion);
    }
    let phi = sxy / sxx;
    let intercept = my - phi * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - phi * a).powi(2))
        .sum();
    let s2 = ssr / (n - 2.0);
    let sigma_eps = s2.sqrt();
    let se_phi = (s2 / sxx).sqrt();
    let unit_root_t = if se_phi > 0.0 {
        (phi - 1.0) / se_phi
    } else if phi < 1.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    let mu = (phi < 1.0).then(|| intercept / (1.0 - phi));
    let half_life = (phi > 0.0 && phi < 1.0 && unit_root_t < UNIT_ROOT_CRITICAL_T)
        .then(|| std::f64::consts::LN_2 / -phi.ln());
    Ok(OuFit {
        phi,
        intercept,
        mu,
        sigma_eps,
        unit_root_t,
        half_life,
        n: x.len(),
    })
}

/// `(x − mu) / stationary_std` per bar.
pub fn ou_zscore(prices: &[f64], fit: &OuFit) -> Result<Vec<f64>, FeatureError> {
    let (Some(_), Some(mu), Some(sd)) = (fit.half_life, fit.mu, fit.stationary_std()) else {
        return Err(FeatureError::UndefinedHalfLife);
    };
    if sd <= 0.0 {
        return Err(FeatureError::ZeroDispersion);
    }
    Ok(prices.iter().map(|x| (x - mu) / sd).collect())
}
