//! Water-filling power allocation over parallel Gaussian subchannels.

use std::cmp::Ordering;

fn by_gain_desc(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Maximizes `Σ log2(1 + p_i h_i)` subject to `Σ p_i = budget`, `p ≥ 0`.
///
/// Returns `p_i = max(0, μ - 1/h_i)` with the water level `μ` found in closed
/// form over the active set.
pub fn waterfill_max_rate(gains: &[f64], budget: f64) -> Vec<f64> {
    waterfill_level(gains, budget).0
}

/// Same as [`waterfill_max_rate`] but also returns the water level.
pub fn waterfill_level(gains: &[f64], budget: f64) -> (Vec<f64>, f64) {
    let mut powers = vec![0.0; gains.len()];
    if gains.is_empty() || budget <= 0.0 {
        return (powers, 0.0);
    }
    let order = by_gain_desc(gains);
    // Work with offsets d_i = 1/h_i − 1/h_best so every quantity stays on the
    // scale of the budget even when the level itself is far above it.
    let best = gains[order[0]];
    let offset = |i: usize| (best - gains[i]) / (gains[i] * best);
    let mut d_sum = 0.0;
    let mut share = 0.0;
    let mut active = 0;
    for (m, &i) in order.iter().enumerate() {
        let d = offset(i);
        let candidate = (budget + d_sum + d) / (m + 1) as f64;
        if m > 0 && candidate <= d {
            break;
        }
        d_sum += d;
        share = candidate;
        active = m + 1;
    }
    for &i in &order[..active] {
        powers[i] = share - offset(i);
    }
    (powers, share + 1.0 / best)
}

/// Minimizes `Σ p_i` subject to `Σ log2(1 + p_i h_i) ≥ rate_bits`, `p ≥ 0`.
pub fn waterfill_min_power(gains: &[f64], rate_bits: f64) -> Vec<f64> {
    let mut powers = vec![0.0; gains.len()];
    if gains.is_empty() || rate_bits <= 0.0 {
        return powers;
    }
    let order = by_gain_desc(gains);
    let mut log_sum = 0.0;
    let mut level = f64::INFINITY;
    let mut active = 0;
    for (m, &i) in order.iter().enumerate() {
        let candidate = ((rate_bits - log_sum - gains[i].log2()) / (m + 1) as f64).exp2();
        // Adding channel i only pays off if it would carry positive power.
        if m > 0 && candidate * gains[i] <= 1.0 {
            break;
        }
        log_sum += gains[i].log2();
        level = candidate;
        active = m + 1;
    }
    for &i in &order[..active] {
        powers[i] = (level - 1.0 / gains[i]).max(0.0);
    }
    powers
}

/// Total rate `Σ log2(1 + p_i h_i)` in bits.
pub fn total_rate(gains: &[f64], powers: &[f64]) -> f64 {
    gains.iter().zip(powers).map(|(h, p)| crate::channel::subcarrier_rate(*p, *h)).sum()
}
