//! Ground truth by enumeration: every assignment gets its optimal power split
//! in closed form.

use std::time::Instant;

use super::instance::{IntraInstance, IntraSolution, SolverStats};
use super::waterfill::{waterfill_max_rate, waterfill_min_power};
use super::IntraopError;
use crate::channel::subcarrier_rate;

/// Largest number of assignments [`oracle_exhaustive`] will enumerate.
pub const ORACLE_LIMIT: f64 = 1e6;

/// Optimal powers for a fixed assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSplit {
    /// Per-tuple powers, zero off the assignment.
    pub powers: Vec<f64>,
    /// NDC sum rate in bits/s/Hz.
    pub objective: f64,
}

/// Optimal powers for the assignment `owner` (user of each subcarrier): DC
/// users get the least power that meets their targets, the rest is
/// water-filled over the NDC subcarriers. `Ok(None)` when the DC users alone
/// exceed the budget.
pub fn oracle_power_split(owner: &[usize], inst: &IntraInstance) -> Result<Option<PowerSplit>, IntraopError> {
    check_owner(owner, inst)?;
    let mut dc_need = 0.0;
    for k in inst.n_ndc()..inst.n_users() {
        dc_need += match dc_min_power(inst, owner, k) {
            Some(p) => p,
            None => return Ok(None),
        };
    }
    if dc_need > inst.p_max() {
        return Ok(None);
    }
    Ok(Some(split_with_dc_power(owner, inst, inst.p_max() - dc_need)))
}

fn check_owner(owner: &[usize], inst: &IntraInstance) -> Result<(), IntraopError> {
    if owner.len() != inst.n_subcarriers() {
        return Err(IntraopError::InvalidInstance(format!(
            "assignment covers {} of {} subcarriers",
            owner.len(),
            inst.n_subcarriers()
        )));
    }
    if let Some(&k) = owner.iter().find(|&&k| k >= inst.n_users()) {
        return Err(IntraopError::InvalidInstance(format!("assignment names user {k}")));
    }
    Ok(())
}

fn dc_min_power(inst: &IntraInstance, owner: &[usize], k: usize) -> Option<f64> {
    let bits = inst.required_bits(k);
    if bits <= 0.0 {
        return Some(0.0);
    }
    let gains: Vec<f64> = (0..owner.len()).filter(|&l| owner[l] == k).map(|l| inst.gain(k, l)).collect();
    if gains.is_empty() {
        return None;
    }
    Some(waterfill_min_power(&gains, bits).iter().sum())
}

fn split_with_dc_power(owner: &[usize], inst: &IntraInstance, ndc_budget: f64) -> PowerSplit {
    let mut powers = vec![0.0; inst.n_tuples()];
    for k in inst.n_ndc()..inst.n_users() {
        let bits = inst.required_bits(k);
        if bits <= 0.0 {
            continue;
        }
        let subs: Vec<usize> = (0..owner.len()).filter(|&l| owner[l] == k).collect();
        let gains: Vec<f64> = subs.iter().map(|&l| inst.gain(k, l)).collect();
        for (&l, p) in subs.iter().zip(waterfill_min_power(&gains, bits)) {
            powers[inst.tuple(k, l)] = p;
        }
    }
    let ndc: Vec<usize> = (0..owner.len()).filter(|&l| !inst.is_dc(owner[l])).collect();
    let gains: Vec<f64> = ndc.iter().map(|&l| inst.gain(owner[l], l)).collect();
    let mut objective = 0.0;
    for ((&l, p), h) in ndc.iter().zip(waterfill_max_rate(&gains, ndc_budget)).zip(&gains) {
        powers[inst.tuple(owner[l], l)] = p;
        objective += subcarrier_rate(p, *h);
    }
    PowerSplit { powers, objective }
}

/// Enumerates all `K^L` assignments in lexicographic order (subcarrier 0
/// most significant) and keeps the first best one.
pub fn oracle_exhaustive(inst: &IntraInstance) -> Result<IntraSolution, IntraopError> {
    let start = Instant::now();
    let (k, l) = (inst.n_users(), inst.n_subcarriers());
    let count = (k as f64).powi(l as i32);
    if count > ORACLE_LIMIT {
        return Err(IntraopError::TooLarge { assignments: count, limit: ORACLE_LIMIT });
    }
    // DC minimum powers depend only on which subcarriers the user holds.
    let memo_ok = l <= 20;
    let mut memo: Vec<Vec<Option<Option<f64>>>> =
        (0..k).map(|_| if memo_ok { vec![None; 1 << l] } else { Vec::new() }).collect();

    let mut owner = vec![0usize; l];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut enumerated = 0usize;
    loop {
        enumerated += 1;
        let mut dc_need = 0.0;
        let mut feasible = true;
        for user in inst.n_ndc()..k {
            let need = if memo_ok {
                let mask = owner.iter().enumerate().filter(|(_, &o)| o == user).fold(0usize, |m, (i, _)| m | 1 << i);
                *memo[user][mask].get_or_insert_with(|| dc_min_power(inst, &owner, user))
            } else {
                dc_min_power(inst, &owner, user)
            };
            match need {
                Some(p) => dc_need += p,
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible && dc_need <= inst.p_max() {
            let value = ndc_rate(inst, &owner, inst.p_max() - dc_need);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, owner.clone()));
            }
        }
        // Advance the counter, last subcarrier fastest.
        let mut pos = l;
        loop {
            if pos == 0 {
                let (_, owner) = best.ok_or(IntraopError::Infeasible)?;
                let split = split_with_dc_power(&owner, inst, inst.p_max() - dc_total(inst, &owner));
                let mut sol = IntraSolution::from_assignment(inst, &owner, &split.powers);
                sol.solver_stats = SolverStats {
                    nodes: enumerated,
                    relaxation_iterations: 0,
                    wall_time_s: start.elapsed().as_secs_f64(),
                };
                return Ok(sol);
            }
            pos -= 1;
            owner[pos] += 1;
            if owner[pos] < k {
                break;
            }
            owner[pos] = 0;
        }
    }
}

fn dc_total(inst: &IntraInstance, owner: &[usize]) -> f64 {
    (inst.n_ndc()..inst.n_users()).map(|k| dc_min_power(inst, owner, k).unwrap_or(0.0)).sum()
}

fn ndc_rate(inst: &IntraInstance, owner: &[usize], budget: f64) -> f64 {
    let gains: Vec<f64> = (0..owner.len()).filter(|&l| !inst.is_dc(owner[l])).map(|l| inst.gain(owner[l], l)).collect();
    gains.iter().zip(waterfill_max_rate(&gains, budget)).map(|(h, p)| subcarrier_rate(p, *h)).sum()
}

/// NDC sum rate of every assignment in enumeration order, `None` where the
/// assignment is infeasible. Intended for small instances.
pub fn oracle_table(inst: &IntraInstance) -> Result<Vec<(Vec<usize>, Option<PowerSplit>)>, IntraopError> {
    let (k, l) = (inst.n_users(), inst.n_subcarriers());
    let count = (k as f64).powi(l as i32);
    if count > ORACLE_LIMIT {
        return Err(IntraopError::TooLarge { assignments: count, limit: ORACLE_LIMIT });
    }
    let mut out = Vec::with_capacity(count as usize);
    for index in 0..count as usize {
        let mut owner = vec![0; l];
        let mut rest = index;
        for pos in (0..l).rev() {
            owner[pos] = rest % k;
            rest /= k;
        }
        let split = oracle_power_split(&owner, inst)?;
        out.push((owner, split));
    }
    Ok(out)
}
