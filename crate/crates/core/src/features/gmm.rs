//! Diagonal-covariance Gaussian mixture fitted by EM, with a fixed regime
//! ordering by mean bar return.
//!
//! Features are standardized on the fit sample; the model keeps the center
//! and scale so later bars are mapped into the same space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureError;

/// (bar return, bar range, volume z-score), all in their natural units.
pub type RegimeFeatures = [f64; 3];
pub const DIM: usize = 3;

pub const MAX_ITER: usize = 500;
/// Convergence threshold on the change of mean per-observation log-likelihood.
pub const TOL: f64 = 1e-8;
pub const MAX_RESTARTS: u64 = 5;
/// Starting points per fit, each run for [`SHORT_ITER`] iterations; the one
/// with the highest likelihood is then run to convergence.
pub const N_INIT: usize = 10;
pub const SHORT_ITER: usize = 10;
pub const MIN_OBS_PER_COMPONENT: usize = 50;
const VARIANCE_FLOOR: f64 = 1e-8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeModel {
    pub k: usize,
    /// Per regime, in standardized units, indexed by regime label.
    pub means: Vec<RegimeFeatures>,
    pub variances: Vec<RegimeFeatures>,
    pub weights: Vec<f64>,
    /// `label_order[regime]` = EM component that became that regime.
    pub label_order: Vec<usize>,
    pub center: RegimeFeatures,
    pub scale: RegimeFeatures,
    /// Mean per-observation log-likelihood after each EM iteration.
    pub log_likelihood: Vec<f64>,
    pub seed: u64,
}

impl RegimeModel {
    pub fn standardize(&self, x: &RegimeFeatures) -> RegimeFeatures {
        std::array::from_fn(|d| (x[d] - self.center[d]) / self.scale[d])
    }

    /// Log of weight × density for each regime, in regime order.
    pub fn log_joint(&self, x: &RegimeFeatures) -> Vec<f64> {
        let z = self.standardize(x);
        (0..self.k)
            .map(|j| self.weights[j].ln() + log_density(&z, &self.means[j], &self.variances[j]))
            .collect()
    }

    /// Mean bar return of each regime in original units.
    pub fn regime_mean_return(&self, regime: usize) -> f64 {
        self.means[regime][0] * self.scale[0] + self.center[0]
    }
}

fn log_density(z: &RegimeFeatures, mean: &RegimeFeatures, var: &RegimeFeatures) -> f64 {
    let mut acc = 0.0;
    for d in 0..DIM {
        let diff = z[d] - mean[d];
        acc += -0.5 * (LN_2PI + var[d].ln() + diff * diff / var[d]);
    }
    acc
}

struct Params {
    means: Vec<RegimeFeatures>,
    variances: Vec<RegimeFeatures>,
    weights: Vec<f64>,
}

impl Params {
    /// Per component: log weight plus the Gaussian normalizer, and the
    /// inverse variances.
    fn constants(&self) -> (Vec<f64>, Vec<RegimeFeatures>) {
        let c = self
            .weights
            .iter()
            .zip(&self.variances)
            .map(|(w, v)| w.ln() - 0.5 * v.iter().map(|s| LN_2PI + s.ln()).sum::<f64>())
            .collect();
        let inv = self.variances.iter().map(|v| v.map(|s| 1.0 / s)).collect();
        (c, inv)
    }
}

/// Weighted M-step over row-major responsibilities; `None` signals a
/// collapsed component.
fn m_step(data: &[RegimeFeatures], resp: &[f64], k: usize) -> Option<Params> {
    let mut nk = vec![0.0; k];
    let mut means = vec![[0.0; DIM]; k];
    for (x, r) in data.iter().zip(resp.chunks_exact(k)) {
        for j in 0..k {
            nk[j] += r[j];
            for d in 0..DIM {
                means[j][d] += r[j] * x[d];
            }
        }
    }
    if nk.iter().any(|&n| n < 2.0) {
        return None;
    }
    for j in 0..k {
        means[j].iter_mut().for_each(|m| *m /= nk[j]);
    }
    let mut variances = vec![[0.0; DIM]; k];
    for (x, r) in data.iter().zip(resp.chunks_exact(k)) {
        for j in 0..k {
            for d in 0..DIM {
                let diff = x[d] - means[j][d];
                variances[j][d] += r[j] * diff * diff;
            }
        }
    }
    for j in 0..k {
        variances[j].iter_mut().for_each(|s| *s /= nk[j]);
        if variances[j].iter().any(|&s| !(s > VARIANCE_FLOOR)) {
            return None;
        }
    }
    let n = data.len() as f64;
    Some(Params {
        means,
        variances,
        weights: nk.iter().map(|w| w / n).collect(),
    })
}

/// E-step: responsibilities in place, returns mean log-likelihood.
fn e_step(data: &[RegimeFeatures], p: &Params, resp: &mut [f64]) -> f64 {
    let k = p.weights.len();
    let (c, inv) = p.constants();
    let mut total = 0.0;
    for (x, r) in data.iter().zip(resp.chunks_exact_mut(k)) {
        let mut top = f64::NEG_INFINITY;
        for j in 0..k {
            let mut q = 0.0;
            for d in 0..DIM {
                let diff = x[d] - p.means[j][d];
                q += diff * diff * inv[j][d];
            }
            r[j] = c[j] - 0.5 * q;
            top = top.max(r[j]);
        }
        let lse = top + r.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        total += lse;
        r.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    total / data.len() as f64
}

fn sq_dist(a: &RegimeFeatures, b: &RegimeFeatures) -> f64 {
    (0..DIM).map(|d| (a[d] - b[d]).powi(2)).sum()
}

fn hard(data_len: usize, k: usize, assign: impl Fn(usize) -> usize) -> Vec<f64> {
    let mut r = vec![0.0; data_len * k];
    for i in 0..data_len {
        r[i * k + assign(i)] = 1.0;
    }
    r
}

/// Equal-count blocks of the observations sorted by bar return.
fn quantile_responsibilities(data: &[RegimeFeatures], k: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a][0].total_cmp(&data[b][0]).then(a.cmp(&b)));
    let mut block = vec![0; data.len()];
    for (rank, &i) in order.iter().enumerate() {
        block[i] = rank * k / data.len();
    }
    hard(data.len(), k, |i| block[i])
}

/// k-means++ seeding followed by a hard assignment; `None` on degenerate data.
fn kmeanspp_responsibilities(data: &[RegimeFeatures], k: usize, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![data[rng.random_range(0..data.len())]];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = data.len() - 1;
        for (i, w) in d2.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        let c = data[pick];
        for (di, x) in d2.iter_mut().zip(data) {
            *di = di.min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    Some(hard(data.len(), k, |i| {
        (0..k)
            .min_by(|&a, &b| {
                sq_dist(&data[i], &centers[a]).total_cmp(&sq_dist(&data[i], &centers[b]))
            })
            .unwrap()
    }))
}

/// EM from hard initial responsibilities for at most `max_iter` iterations.
/// Returns the parameters, the likelihood trace and the final
/// responsibilities.
fn run_em(
    data: &[RegimeFeatures],
    k: usize,
    mut resp: Vec<f64>,
    max_iter: usize,
) -> Option<(Params, Vec<f64>, Vec<f64>)> {
    let mut params = m_step(data, &resp, k)?;
    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let ll = e_step(data, &params, &mut resp);
        if !ll.is_finite() {
            return None;
        }
        trace.push(ll);
        params = m_step(data, &resp, k)?;
        if (ll - prev).abs() < TOL {
            break;
        }
        prev = ll;
    }
    Some((params, trace, resp))
}

/// Fits a `k`-component diagonal GMM. Starting points are return-sorted
/// blocks and k-means++ seedings with consecutive seeds; after a short run
/// from each, the best is iterated to convergence. Deterministic in `seed`;
/// a collapsed component costs a restart, and more than [`MAX_RESTARTS`]
/// collapses fail.
pub fn gmm_fit(
    features: &[RegimeFeatures],
    k: usize,
    seed: u64,
) -> Result<RegimeModel, FeatureError> {
    if k < 2 {
        return Err(FeatureError::InvalidParameter(format!("k = {k}")));
    }
    let need = MIN_OBS_PER_COMPONENT * k;
    if features.len() < need {
        return Err(FeatureError::TooShort {
            need,
            have: features.len(),
        });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    let n = features.len() as f64;
    let center: RegimeFeatures =
        std::array::from_fn(|d| features.iter().map(|x| x[d]).sum::<f64>() / n);
    let scale: RegimeFeatures = std::array::from_fn(|d| {
        let var = features
            .iter()
            .map(|x| (x[d] - center[d]).powi(2))
            .sum::<f64>()
            / n;
        if var > 0.0 {
            var.sqrt()
        } else {
            1.0
        }
    });
    let data: Vec<RegimeFeatures> = features
        .iter()
        .map(|x| std::array::from_fn(|d| (x[d] - center[d]) / scale[d]))
        .collect();

    // Short runs from every start; the best one is run to convergence.
    let mut best: Option<(f64, Vec<f64>, u64)> = None;
    let mut keep = |short: Option<(Params, Vec<f64>, Vec<f64>)>, s: u64| -> bool {
        let Some((_, trace, resp)) = short else {
            return false;
        };
        let ll = trace.last().copied().unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|b| ll > b.0) {
            best = Some((ll, resp, s));
        }
        true
    };
    let (mut starts, mut failures) = (0, 0);
    if keep(
        run_em(&data, k, quantile_responsibilities(&data, k), SHORT_ITER),
        seed,
    ) {
        starts += 1;
    } else {
        failures += 1;
    }
    let mut s = seed;
    while starts < N_INIT && failures <= MAX_RESTARTS {
        let short =
            kmeanspp_responsibilities(&data, k, s).and_then(|r| run_em(&data, k, r, SHORT_ITER));
        if keep(short, s) {
            starts += 1;
        } else {
            failures += 1;
        }
        s = s.wrapping_add(1);
    }
    let best =
        best.and_then(|(_, resp, s)| run_em(&data, k, resp, MAX_ITER).map(|(p, t, _)| (p, t, s)));
    if let Some((params, trace, s)) = best {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            params.means[a][0]
                .total_cmp(&params.means[b][0])
                .then(a.cmp(&b))
        });
        return Ok(RegimeModel {
            k,
            means: order.iter().map(|&j| params.means[j]).collect(),
            variances: order.iter().map(|&j| params.variances[j]).collect(),
            weights: order.iter().map(|&j| params.weights[j]).collect(),
            label_order: order,
            center,
            scale,
            log_likelihood: trace,
            seed: s,
        });
    }
    Err(FeatureError::VarianceCollapse {
        attempts: MAX_RESTARTS + 1,
    })
}

/// Maximum-posterior regime per observation; ties go to the lower regime.
pub fn regime_labels(model: &RegimeModel, features: &[RegimeFeatures]) -> Vec<u8> {
    features
        .iter()
        .map(|x| argmax_first(&model.log_joint(x)) as u8)
        .collect()
}

pub(crate) fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
