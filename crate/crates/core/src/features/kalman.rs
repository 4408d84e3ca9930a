//! Constant-velocity (level + slope) Kalman filter on a price series.

use serde::{Deserialize, Serialize};

use super::FeatureError;

const PRIOR_VARIANCE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanState {
    pub level: f64,
    /// Points per bar.
    pub velocity: f64,
    /// Row-major 2×2 covariance of (level, velocity).
    pub covariance: [[f64; 2]; 2],
    pub q: f64,
    pub r: f64,
}

impl KalmanState {
    pub fn new(first: f64, q: f64, r: f64) -> Self {
        KalmanState {
            level: first,
            velocity: 0.0,
            covariance: [[PRIOR_VARIANCE, 0.0], [0.0, PRIOR_VARIANCE]],
            q,
            r,
        }
    }

    /// Transition x ← F x with F = [[1, 1], [0, 1]]; process noise is the
    /// discrete white-noise-acceleration model scaled by `q`.
    pub fn predict(&mut self) {
        self.level += self.velocity;
        let [[p00, p01], [p10, p11]] = self.covariance;
        let q = self.q;
        let n00 = p00 + p01 + p10 + p11 + q * 0.25;
        let n01 = p01 + p11 + q * 0.5;
        let n10 = p10 + p11 + q * 0.5;
        let n11 = p11 + q;
        self.covariance = [[n00, n01], [n10, n11]];
    }

    /// Measurement update with observation of the level.
    pub fn update(&mut self, z: f64) {
        let [[p00, p01], [p10, p11]] = self.covariance;
        let s = p00 + self.r;
        let k0 = p00 / s;
        let k1 = p10 / s;
        let innov = z - self.level;
        self.level += k0 * innov;
        self.velocity += k1 * innov;
        // Joseph form keeps the covariance symmetric PSD.
        let a00 = 1.0 - k0;
        let a10 = -k1;
        // P' = (I − K H) P (I − K H)ᵀ + K r Kᵀ with I − K H = [[a00, 0], [a10, 1]]
        let m00 = a00 * p00;
        let m01 = a00 * p01;
        let m10 = a10 * p00 + p10;
        let m11 = a10 * p01 + p11;
        let r = self.r;
        let n00 = m00 * a00 + k0 * r * k0;
        let n01 = m00 * a10 + m01 + k0 * r * k1;
        let n11 = m10 * a10 + m11 + k1 * r * k1;
        self.covariance = [[n00, n01], [n01, n11]];
    }

    pub fn step(&mut self, z: f64) {
        self.predict();
        self.update(z);
    }
}

/// Filtered velocity after each observation; element `i` uses `closes[..=i]`.
pub fn kalman_velocity(closes: &[f64], q: f64, r: f64) -> Result<Vec<f64>, FeatureError> {
    if closes.is_empty() {
        return Err(FeatureError::TooShort { need: 1, have: 0 });
    }
    if !(q > 0.0 && r > 0.0) {
        return Err(FeatureError::InvalidParameter(format!(
            "q and r must be positive (q={q}, r={r})"
        )));
    }
    if closes.iter().any(|c| !c.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    let mut st = KalmanState::new(closes[0], q, r);
    let mut out = Vec::with_capacity(closes.len());
    out.push(st.velocity);
    for &z in &closes[1..] {
        st.step(z);
        out.push(st.velocity);
    }
    Ok(out)
}

/// Velocity divided by its own sample dispersion over the series.
pub fn velocity_zscore(velocities: &[f64]) -> Option<f64> {
    if velocities.len() < 2 {
        return None;
    }
    let sd = super::rolling::sample_std(velocities);
    (sd > 0.0).then(|| velocities[velocities.len() - 1] / sd)
}
