//! Rolling empirical regime-transition probabilities.

use super::FeatureError;

pub const MIN_WINDOW: usize = 10;

/// At index `i`, `P(to | from)` estimated from consecutive label pairs that lie
/// entirely within bars `i-window..i` (the current bar excluded). Pairs with a
/// missing label are skipped; absent when no `from` occurs in the window.
pub fn markov_transition_prob(
    labels: &[Option<u8>],
    window: usize,
    from: u8,
    to: u8,
) -> Result<Vec<Option<f64>>, FeatureError> {
    if window < MIN_WINDOW {
        return Err(FeatureError::WindowTooSmall(window));
    }
    let pair = |j: usize| match (labels[j], labels[j + 1]) {
        (Some(a), Some(b)) if a == from => Some(b == to),
        _ => None,
    };
    let mut n_from = 0u32;
    let mut n_to = 0u32;
    let mut out = Vec::with_capacity(labels.len());
    for i in 0..labels.len() {
        // Window pairs start at j ∈ [i-window, i-2].
        if i >= 2 {
            if let Some(hit) = pair(i - 2) {
                n_from += 1;
                n_to += hit as u32;
            }
        }
        if i > window {
            if let Some(hit) = pair(i - window - 1) {
                n_from -= 1;
                n_to -= hit as u32;
            }
        }
        out.push((n_from > 0).then(|| n_to as f64 / n_from as f64));
    }
    Ok(out)
}
