//! Inter-operator sharing of the common grid.
//!
//! Phase 1 reconciles the agreed weights `ρ_n` with the operators' demands
//! `δ_n` into active priorities `ρ_n^act` and integer quotas. Phase 2 then
//! splits the grid either subcarrier by subcarrier, following channel gains
//! ([`allocate_subcarrier_gain`]), or as contiguous fragments placed by
//! end-of-band preference ([`allocate_fragments`]).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{subcarrier_rate, ChannelRealization, GridSpec};
use crate::intraop::waterfill::waterfill_max_rate;

const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum InteropError {
    #[error("no operators")]
    NoOperators,
    #[error("operator data has inconsistent lengths: {0}")]
    ShapeMismatch(String),
    #[error("sharing weights must be positive and sum to 1 (sum = {0})")]
    InvalidWeights(f64),
    #[error("minimum fragment size must be at least one subcarrier")]
    InvalidMinFragment,
    #[error("demand report is invalid: {0}")]
    InvalidDemand(String),
    #[error("quotas sum to {quota_sum} but the grid has {n_subcarriers} subcarriers")]
    QuotaMismatch { quota_sum: usize, n_subcarriers: usize },
    #[error("operator {operator} would get a fragment of {len} subcarriers, below its minimum of {min}")]
    InfeasibleFragmentation { operator: usize, len: usize, min: usize },
    #[error("allocation is not a partition of the grid: {0}")]
    NotAPartition(String),
}

/// Agreed sharing weights and fragment preferences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingPolicy {
    rho: Vec<f64>,
    alpha_pref: Vec<Option<u32>>,
    min_fragment_subcarriers: Vec<usize>,
}

impl SharingPolicy {
    pub fn new(
        rho: Vec<f64>,
        alpha_pref: Vec<Option<u32>>,
        min_fragment_subcarriers: Vec<usize>,
    ) -> Result<Self, InteropError> {
        if rho.is_empty() {
            return Err(InteropError::NoOperators);
        }
        if alpha_pref.len() != rho.len() || min_fragment_subcarriers.len() != rho.len() {
            return Err(InteropError::ShapeMismatch(format!(
                "{} weights, {} preferences, {} minimum fragment sizes",
                rho.len(),
                alpha_pref.len(),
                min_fragment_subcarriers.len()
            )));
        }
        let sum: f64 = rho.iter().sum();
        if rho.iter().any(|r| !(*r > 0.0)) || (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(InteropError::InvalidWeights(sum));
        }
        if min_fragment_subcarriers.contains(&0) {
            return Err(InteropError::InvalidMinFragment);
        }
        Ok(Self { rho, alpha_pref, min_fragment_subcarriers })
    }

    /// Equal weights, no preferences, one-subcarrier minimum fragments.
    pub fn equal(n_operators: usize) -> Result<Self, InteropError> {
        if n_operators == 0 {
            return Err(InteropError::NoOperators);
        }
        let n = n_operators;
        Self::new(vec![1.0 / n as f64; n], vec![None; n], vec![1; n])
    }

    pub fn with_preferences(mut self, alpha_pref: Vec<Option<u32>>) -> Result<Self, InteropError> {
        if alpha_pref.len() != self.rho.len() {
            return Err(InteropError::ShapeMismatch("preference count".into()));
        }
        self.alpha_pref = alpha_pref;
        Ok(self)
    }

    pub fn with_min_fragment(mut self, min: Vec<usize>) -> Result<Self, InteropError> {
        if min.len() != self.rho.len() {
            return Err(InteropError::ShapeMismatch("minimum fragment count".into()));
        }
        if min.contains(&0) {
            return Err(InteropError::InvalidMinFragment);
        }
        self.min_fragment_subcarriers = min;
        Ok(self)
    }

    pub fn n_operators(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn alpha_pref(&self) -> &[Option<u32>] {
        &self.alpha_pref
    }

    pub fn min_fragment_subcarriers(&self) -> &[usize] {
        &self.min_fragment_subcarriers
    }

    /// Number of bits in a preference code: enough to give every operator a
    /// distinct position, and at least one.
    pub fn preference_bits(&self) -> u32 {
        let n = self.rho.len().max(2);
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// What each operator asks the controller for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandReport {
    pub delta: Vec<usize>,
    pub avg_snr: Vec<f64>,
    pub p_max: Vec<f64>,
}

impl DemandReport {
    pub fn validate(&self) -> Result<(), InteropError> {
        if self.delta.is_empty() {
            return Err(InteropError::NoOperators);
        }
        if self.avg_snr.len() != self.delta.len() || self.p_max.len() != self.delta.len() {
            return Err(InteropError::ShapeMismatch("demand report fields".into()));
        }
        if self.p_max.iter().any(|p| !(*p > 0.0)) {
            return Err(InteropError::InvalidDemand("p_max must be positive".into()));
        }
        Ok(())
    }

    /// Every operator asks for the whole grid.
    pub fn overloaded(n_subcarriers: usize, avg_snr: Vec<f64>, p_max: Vec<f64>) -> Self {
        Self { delta: vec![n_subcarriers; p_max.len()], avg_snr, p_max }
    }
}

/// Result of [`compute_demand`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub subcarriers: usize,
    /// True when even `n_sub_max` subcarriers cannot meet the target.
    pub overloaded: bool,
}

/// Smallest `L` in `[1, n_sub_max]` with `L·log2(1 + (p_max/L)·snr) ≥ target`,
/// using the operator's average SNR and an equal power split.
pub fn compute_demand(total_rate_target: f64, p_max: f64, avg_snr: f64, n_sub_max: usize) -> Demand {
    let n_max = n_sub_max.max(1);
    let rate = |l: usize| l as f64 * subcarrier_rate(p_max / l as f64, avg_snr);
    if total_rate_target <= 0.0 || rate(1) >= total_rate_target {
        return Demand { subcarriers: 1, overloaded: false };
    }
    if rate(n_max) < total_rate_target {
        return Demand { subcarriers: n_max, overloaded: true };
    }
    // rate(l) is increasing in l
    let (mut lo, mut hi) = (1, n_max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if rate(mid) >= total_rate_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Demand { subcarriers: hi, overloaded: false }
}

/// Which Phase-1 rule produced the active priorities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorityRule {
    /// Every demand is on the same side of its entitlement: keep `ρ`.
    Agreement,
    /// Mixed demands that fit in the grid: share by demand.
    ByDemand,
    /// Mixed demands exceeding the grid: redistribute what under-demanders release.
    Redistributed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivePriorities {
    pub rho_act: Vec<f64>,
    pub quota: Vec<usize>,
    pub rule: PriorityRule,
}

impl ActivePriorities {
    /// Builds priorities directly from shares, rounding quotas by largest remainder.
    pub fn from_shares(rho_act: Vec<f64>, n_sub: usize, rule: PriorityRule) -> Self {
        let quota = largest_remainder(&rho_act, n_sub);
        Self { rho_act, quota, rule }
    }

    pub fn n_operators(&self) -> usize {
        self.quota.len()
    }
}

/// Integer apportionment of `total` units by `shares`; leftover units go to the
/// largest fractional parts, ties to the lowest index.
pub fn largest_remainder(shares: &[f64], total: usize) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|x| x.floor().max(0.0) as usize).collect();
    let assigned: usize = quota.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        quota[i] += 1;
    }
    quota
}

/// Phase 1: derives `ρ_n^act` and quotas from the agreement and the demands.
pub fn active_priorities(
    policy: &SharingPolicy,
    demand: &DemandReport,
    n_sub: usize,
) -> Result<ActivePriorities, InteropError> {
    demand.validate()?;
    if demand.delta.len() != policy.n_operators() {
        return Err(InteropError::ShapeMismatch(format!(
            "policy has {} operators, demand report has {}",
            policy.n_operators(),
            demand.delta.len()
        )));
    }
    let n = n_sub as f64;
    let eta: Vec<f64> = policy.rho().iter().map(|r| r * n).collect();
    let delta: Vec<f64> = demand.delta.iter().map(|&d| d as f64).collect();

    let all_over = delta.iter().zip(&eta).all(|(d, e)| d >= e);
    let all_under = delta.iter().zip(&eta).all(|(d, e)| d <= e);
    if all_over || all_under {
        return Ok(ActivePriorities::from_shares(policy.rho().to_vec(), n_sub, PriorityRule::Agreement));
    }

    let excess: f64 = delta.iter().zip(&eta).map(|(d, e)| d - e).sum();
    if excess <= 0.0 {
        let total: f64 = delta.iter().sum();
        let rho_act = delta.iter().map(|d| d / total).collect();
        return Ok(ActivePriorities::from_shares(rho_act, n_sub, PriorityRule::ByDemand));
    }

    let released: f64 = delta.iter().zip(&eta).filter(|(d, e)| d < e).map(|(d, e)| e - d).sum();
    let over_total: f64 = delta.iter().zip(&eta).filter(|(d, e)| d > e).map(|(d, e)| d - e).sum();
    let amounts: Vec<f64> = delta
        .iter()
        .zip(&eta)
        .map(|(&d, &e)| {
            if d < e {
                d
            } else if d > e {
                e + released * (d - e) / over_total
            } else {
                e
            }
        })
        .collect();
    let sum: f64 = amounts.iter().sum();
    let rho_act = amounts.iter().map(|a| a / sum).collect();
    Ok(ActivePriorities::from_shares(rho_act, n_sub, PriorityRule::Redistributed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocationForm {
    Scattered,
    Fragmented,
}

/// A contiguous run of subcarrier indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub start: usize,
    pub len: usize,
}

/// Partition of the grid into per-operator subcarrier sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Sorted subcarrier indices of each operator.
    pub sets: Vec<Vec<usize>>,
    pub form: AllocationForm,
    /// Per-operator fragments; empty for scattered allocations.
    pub fragments: Vec<Vec<Fragment>>,
}

impl Allocation {
    pub fn n_operators(&self) -> usize {
        self.sets.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sets.iter().map(Vec::len).collect()
    }

    /// Owner of every subcarrier.
    pub fn owners(&self, n_subcarriers: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; n_subcarriers];
        for (op, set) in self.sets.iter().enumerate() {
            for &i in set {
                if i < n_subcarriers {
                    owner[i] = Some(op);
                }
            }
        }
        owner
    }

    /// Checks the partition property and, for fragmented form, that fragments
    /// match the sets and stay inside grid segments.
    pub fn validate(&self, grid: &GridSpec) -> Result<(), InteropError> {
        let n_sub = grid.n_subcarriers();
        let mut seen = vec![false; n_sub];
        for (op, set) in self.sets.iter().enumerate() {
            for &i in set {
                if i >= n_sub {
                    return Err(InteropError::NotAPartition(format!("operator {op} holds index {i}")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(InteropError::NotAPartition(format!("subcarrier {i} assigned twice")));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(InteropError::NotAPartition(format!("subcarrier {i} unassigned")));
        }
        if self.form == AllocationForm::Fragmented {
            if self.fragments.len() != self.sets.len() {
                return Err(InteropError::NotAPartition("fragment list length".into()));
            }
            for (op, (frags, set)) in self.fragments.iter().zip(&self.sets).enumerate() {
                let mut from_frags: Vec<usize> =
                    frags.iter().flat_map(|f| f.start..f.start + f.len).collect();
                from_frags.sort_unstable();
                if &from_frags != set {
                    return Err(InteropError::NotAPartition(format!(
                        "operator {op} fragments disagree with its set"
                    )));
                }
                for f in frags {
                    let seg = grid.segment_of(f.start).map(|s| grid.segments()[s]);
                    match seg {
                        Some(s) if f.len > 0 && f.start + f.len <= s.end_index() => {}
                        _ => {
                            return Err(InteropError::NotAPartition(format!(
                                "operator {op} fragment at {} straddles a segment boundary",
                                f.start
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// One iteration of the Phase-2 loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phase2Step {
    pub operator: usize,
    pub user: usize,
    pub subcarrier: usize,
    /// Eligibility ratio `(|S_i|/N_sub)/ρ_i^act` of every operator before the
    /// step; infinite for operators whose quota is exhausted.
    pub ratios: Vec<f64>,
}

fn check_quotas(act: &ActivePriorities, n_sub: usize) -> Result<(), InteropError> {
    let quota_sum: usize = act.quota.iter().sum();
    if quota_sum != n_sub {
        return Err(InteropError::QuotaMismatch { quota_sum, n_subcarriers: n_sub });
    }
    Ok(())
}

/// Phase 2 of subcarrier-gain sharing.
///
/// Repeatedly picks the operator with the smallest eligibility ratio among
/// those with quota left; that operator's next user in round-robin order takes
/// its best unassigned subcarrier.
pub fn allocate_subcarrier_gain(
    ch: &ChannelRealization,
    act: &ActivePriorities,
) -> Result<Allocation, InteropError> {
    subcarrier_gain_inner(ch, act, None)
}

/// [`allocate_subcarrier_gain`] that also records every step.
pub fn allocate_subcarrier_gain_traced(
    ch: &ChannelRealization,
    act: &ActivePriorities,
) -> Result<(Allocation, Vec<Phase2Step>), InteropError> {
    let mut trace = Vec::with_capacity(ch.n_subcarriers());
    let alloc = subcarrier_gain_inner(ch, act, Some(&mut trace))?;
    Ok((alloc, trace))
}

fn subcarrier_gain_inner(
    ch: &ChannelRealization,
    act: &ActivePriorities,
    mut trace: Option<&mut Vec<Phase2Step>>,
) -> Result<Allocation, InteropError> {
    let n_sub = ch.n_subcarriers();
    let n_ops = ch.n_operators();
    if act.n_operators() != n_ops {
        return Err(InteropError::ShapeMismatch(format!(
            "{} quotas for {} operators",
            act.n_operators(),
            n_ops
        )));
    }
    check_quotas(act, n_sub)?;

    let mut taken = vec![false; n_sub];
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n_ops];
    let mut next_user = vec![0usize; n_ops];
    let grid_size = n_sub as f64;

    for _ in 0..n_sub {
        let ratios: Vec<f64> = (0..n_ops)
            .map(|i| {
                if sets[i].len() < act.quota[i] && act.rho_act[i] > 0.0 {
                    (sets[i].len() as f64 / grid_size) / act.rho_act[i]
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        let mut op = 0;
        for i in 1..n_ops {
            if ratios[i] < ratios[op] {
                op = i;
            }
        }
        debug_assert!(ratios[op].is_finite());

        let user = next_user[op];
        next_user[op] = (user + 1) % ch.n_users(op);
        let gains = ch.user_gains(op, user);
        let mut best: Option<usize> = None;
        for (i, g) in gains.iter().enumerate() {
            if !taken[i] && best.is_none_or(|b| *g > gains[b]) {
                best = Some(i);
            }
        }
        let sc = best.expect("an unassigned subcarrier remains while quota remains");
        taken[sc] = true;
        sets[op].push(sc);
        if let Some(t) = trace.as_deref_mut() {
            t.push(Phase2Step { operator: op, user, subcarrier: sc, ratios });
        }
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    Ok(Allocation { sets, form: AllocationForm::Scattered, fragments: Vec::new() })
}

/// Last contention winner for each contested preference code.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentionMemory {
    winners: BTreeMap<u32, usize>,
}

impl ContentionMemory {
    pub fn last_winner(&self, code: u32) -> Option<usize> {
        self.winners.get(&code).copied()
    }

    pub fn record(&mut self, code: u32, operator: usize) {
        self.winners.insert(code, operator);
    }
}

/// Resolves one contention group: a uniform draw that skips the previous
/// winner for this code whenever someone else is contending.
fn contention_winner(
    group: &[usize],
    code: u32,
    memory: &mut ContentionMemory,
    rng: &mut ChaCha8Rng,
) -> usize {
    let previous = memory.last_winner(code);
    let eligible: Vec<usize> = group.iter().copied().filter(|&op| Some(op) != previous).collect();
    let pool = if eligible.is_empty() { group.to_vec() } else { eligible };
    let winner = pool[rng.gen_range(0..pool.len())];
    memory.record(code, winner);
    winner
}

/// Low-to-high placement order of operators implied by preference codes.
fn placement_order(
    policy: &SharingPolicy,
    active: &[usize],
    rng_seed: u64,
    memory: &mut ContentionMemory,
) -> Vec<usize> {
    let half = 1u32 << (policy.preference_bits() - 1);
    let mut by_code: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    let mut unpreferred = Vec::new();
    for &op in active {
        match policy.alpha_pref()[op] {
            Some(code) => by_code.entry(code).or_default().push(op),
            None => unpreferred.push(op),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut low = Vec::new();
    let mut high = Vec::new();
    for (code, group) in by_code {
        let upper = code >= half;
        let mut ordered = group.clone();
        if group.len() > 1 {
            let winner = contention_winner(&group, code, memory, &mut rng);
            ordered.retain(|&op| op != winner);
            // The winner sits closest to the end it asked for.
            if upper {
                ordered.push(winner);
            } else {
                ordered.insert(0, winner);
            }
        }
        if upper {
            high.extend(ordered);
        } else {
            low.extend(ordered);
        }
    }
    low.extend(unpreferred);
    low.extend(high);
    low
}

/// Fragmentation-based sharing: every operator receives contiguous runs sized
/// by its quota, placed according to its end-of-band preference.
///
/// Contested ends go to a random operator drawn with `rng_seed`, never the
/// previous winner recorded in `memory` when another operator contends;
/// `memory` is updated with the new winners.
pub fn allocate_fragments(
    act: &ActivePriorities,
    policy: &SharingPolicy,
    grid: &GridSpec,
    rng_seed: u64,
    memory: &mut ContentionMemory,
) -> Result<Allocation, InteropError> {
    let n_ops = act.n_operators();
    if policy.n_operators() != n_ops {
        return Err(InteropError::ShapeMismatch("policy and priorities disagree".into()));
    }
    check_quotas(act, grid.n_subcarriers())?;
    for (op, (&q, &min)) in act.quota.iter().zip(policy.min_fragment_subcarriers()).enumerate() {
        if q > 0 && q < min {
            return Err(InteropError::InfeasibleFragmentation { operator: op, len: q, min });
        }
    }

    let active: Vec<usize> = (0..n_ops).filter(|&op| act.quota[op] > 0).collect();
    let order = placement_order(policy, &active, rng_seed, memory);

    let mut sets = vec![Vec::new(); n_ops];
    let mut fragments = vec![Vec::new(); n_ops];
    let mut cursor = 0;
    for op in order {
        let mut remaining = act.quota[op];
        while remaining > 0 {
            let seg = grid.segments()[grid.segment_of(cursor).expect("cursor inside grid")];
            let len = remaining.min(seg.end_index() - cursor);
            let min = policy.min_fragment_subcarriers()[op];
            if len < min {
                return Err(InteropError::InfeasibleFragmentation { operator: op, len, min });
            }
            fragments[op].push(Fragment { start: cursor, len });
            sets[op].extend(cursor..cursor + len);
            cursor += len;
            remaining -= len;
        }
    }
    Ok(Allocation { sets, form: AllocationForm::Fragmented, fragments })
}

/// Achieved spectral efficiency, normalized by the grid size so that the
/// per-operator values add up to the system total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub per_operator: Vec<f64>,
    pub total: f64,
}

/// Evaluates an allocation: each subcarrier of an operator serves that
/// operator's strongest user on it, users get power in proportion to their
/// subcarrier count, and each user water-fills its share.
pub fn operator_throughput(
    alloc: &Allocation,
    ch: &ChannelRealization,
    p_max: &[f64],
) -> Result<Throughput, InteropError> {
    operator_throughput_with_guard(alloc, ch, p_max, 0)
}

/// [`operator_throughput`] where every fragment edge that faces another
/// operator's fragment forfeits `guard_subcarriers` subcarriers. The
/// allocation itself is unchanged.
pub fn operator_throughput_with_guard(
    alloc: &Allocation,
    ch: &ChannelRealization,
    p_max: &[f64],
    guard_subcarriers: usize,
) -> Result<Throughput, InteropError> {
    let n_ops = alloc.n_operators();
    if ch.n_operators() != n_ops || p_max.len() != n_ops {
        return Err(InteropError::ShapeMismatch("allocation, channel and power budgets".into()));
    }
    let n_sub = ch.n_subcarriers();
    let usable = usable_sets(alloc, n_sub, guard_subcarriers);

    let mut per_operator = Vec::with_capacity(n_ops);
    for (op, set) in usable.iter().enumerate() {
        per_operator.push(single_operator_rate(ch, op, set, p_max[op], alloc.sets[op].len()) / n_sub as f64);
    }
    let total = per_operator.iter().sum();
    Ok(Throughput { per_operator, total })
}

fn usable_sets(alloc: &Allocation, n_sub: usize, guard: usize) -> Vec<Vec<usize>> {
    if guard == 0 || alloc.form != AllocationForm::Fragmented {
        return alloc.sets.clone();
    }
    let owner = alloc.owners(n_sub);
    alloc
        .fragments
        .iter()
        .enumerate()
        .map(|(op, frags)| {
            let mut out = Vec::new();
            for f in frags {
                let end = f.start + f.len;
                let low_shared = f.start > 0 && owner[f.start - 1].is_some_and(|o| o != op);
                let high_shared = end < n_sub && owner[end].is_some_and(|o| o != op);
                let lo = f.start + if low_shared { guard } else { 0 };
                let hi = end.saturating_sub(if high_shared { guard } else { 0 });
                out.extend(lo..hi.max(lo));
            }
            out
        })
        .collect()
}

fn single_operator_rate(
    ch: &ChannelRealization,
    op: usize,
    set: &[usize],
    p_max: f64,
    allocated: usize,
) -> f64 {
    if set.is_empty() || p_max <= 0.0 {
        return 0.0;
    }
    let n_users = ch.n_users(op);
    let mut per_user: Vec<Vec<f64>> = vec![Vec::new(); n_users];
    for &sc in set {
        let mut best = 0;
        let mut best_gain = ch.gain(op, 0, sc);
        for k in 1..n_users {
            let g = ch.gain(op, k, sc);
            if g > best_gain {
                best = k;
                best_gain = g;
            }
        }
        per_user[best].push(best_gain);
    }
    // Power follows the allocated share; forfeited guard subcarriers keep
    // their share of the budget unused.
    let denom = allocated.max(set.len()) as f64;
    per_user
        .iter()
        .filter(|g| !g.is_empty())
        .map(|gains| {
            let budget = p_max * gains.len() as f64 / denom;
            let powers = waterfill_max_rate(gains, budget);
            gains.iter().zip(&powers).map(|(h, p)| subcarrier_rate(*p, *h)).sum::<f64>()
        })
        .sum()
}
