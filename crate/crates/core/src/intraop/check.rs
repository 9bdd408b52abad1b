use serde::Serialize;

use super::instance::{ndc_sum_rate, IntraInstance, IntraSolution};
use super::model::linearize;
use crate::channel::subcarrier_rate;

/// Constraint residuals of a solution; zero means satisfied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    /// Largest distance of any `c` entry from {0, 1} (non-binary entries
    /// count as 1).
    pub c1_binary: f64,
    /// Largest `|Σ_k c_{k,l} − 1|`.
    pub c2_assignment: f64,
    /// Largest negative power or power on an unassigned tuple.
    pub c3_power: f64,
    /// Excess of `Σ c·p` over `P`.
    pub c4_budget: f64,
    /// Largest shortfall of a DC user's bits below `L·R`.
    pub c5_rate: f64,
    /// Largest `|λ − c·p|`.
    pub lambda_exactness: f64,
    /// Per-tuple `ξ_t − (1 + min(p_t, P·c_t)·h_t)`, indexed `[user][subcarrier]`.
    pub xi_gap: Vec<Vec<f64>>,
    /// Largest positive entry of `xi_gap` (a violation of the slack bound).
    pub xi_violation: f64,
    /// NDC sum rate recomputed from `c` and `p`.
    pub objective: f64,
    /// `|objective − reported objective|`.
    pub objective_mismatch: f64,
    pub probe: TighteningProbe,
}

/// Result of raising every `ξ_t` to its upper bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TighteningProbe {
    /// `Σ_{NDC} log2 ξ` before and after.
    pub before_bits: f64,
    pub after_bits: f64,
    /// Largest model residual at the raised point.
    pub residual_after: f64,
}

impl TighteningProbe {
    pub fn improves_or_keeps(&self) -> bool {
        self.after_bits >= self.before_bits - 1e-12
    }
}

impl CheckReport {
    /// Largest of the C1 to C5 and λ residuals.
    pub fn max_residual(&self) -> f64 {
        [self.c1_binary, self.c2_assignment, self.c3_power, self.c4_budget, self.c5_rate, self.lambda_exactness]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.xi_violation <= tol && self.probe.residual_after <= tol
    }
}

fn shape_ok(inst: &IntraInstance, sol: &IntraSolution) -> bool {
    let (k, l) = (inst.n_users(), inst.n_subcarriers());
    [sol.c.len(), sol.p.len(), sol.xi.len(), sol.lambda.len()].iter().all(|&n| n == k)
        && sol.c.iter().all(|r| r.len() == l)
        && sol.p.iter().all(|r| r.len() == l)
        && sol.xi.iter().all(|r| r.len() == l)
        && sol.lambda.iter().all(|r| r.len() == l)
}

/// Validates a solution against an instance.
pub fn check_solution(sol: &IntraSolution, inst: &IntraInstance) -> CheckReport {
    let (k, l) = (inst.n_users(), inst.n_subcarriers());
    let pm = inst.p_max();
    if !shape_ok(inst, sol) {
        let inf = f64::INFINITY;
        return CheckReport {
            c1_binary: inf,
            c2_assignment: inf,
            c3_power: inf,
            c4_budget: inf,
            c5_rate: inf,
            lambda_exactness: inf,
            xi_gap: Vec::new(),
            xi_violation: inf,
            objective: f64::NAN,
            objective_mismatch: inf,
            probe: TighteningProbe { before_bits: f64::NAN, after_bits: f64::NAN, residual_after: inf },
        };
    }
    let c = |user: usize, sc: usize| sol.c[user][sc] as f64;

    let c1_binary = sol.c.iter().flatten().map(|&v| if v <= 1 { 0.0 } else { 1.0 }).fold(0.0, f64::max);
    let c2_assignment = (0..l)
        .map(|sc| ((0..k).map(|u| c(u, sc)).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut c3_power: f64 = 0.0;
    let mut used = 0.0;
    let mut lambda_exactness: f64 = 0.0;
    let mut xi_gap = vec![vec![0.0; l]; k];
    let mut xi_violation: f64 = 0.0;
    for user in 0..k {
        for sc in 0..l {
            let p = sol.p[user][sc];
            c3_power = c3_power.max(-p);
            if sol.c[user][sc] == 0 {
                c3_power = c3_power.max(p.abs());
            }
            used += c(user, sc) * p;
            lambda_exactness = lambda_exactness.max((sol.lambda[user][sc] - c(user, sc) * p).abs());
            let cap = 1.0 + p.min(pm * c(user, sc)) * inst.gain(user, sc);
            let gap = sol.xi[user][sc] - cap;
            xi_gap[user][sc] = gap;
            xi_violation = xi_violation.max(gap);
        }
    }
    let c4_budget = (used - pm).max(0.0);
    let mut c5_rate: f64 = 0.0;
    for user in inst.n_ndc()..k {
        let bits: f64 = (0..l)
            .filter(|&sc| sol.c[user][sc] == 1)
            .map(|sc| subcarrier_rate(sol.p[user][sc], inst.gain(user, sc)))
            .sum();
        c5_rate = c5_rate.max(inst.required_bits(user) - bits);
    }
    let objective = ndc_sum_rate(inst, &sol.c, &sol.p);
    let objective_mismatch = (objective - sol.objective_ndc_sum_rate).abs();

    // Tightening probe: set ξ to the smaller affine bound and re-evaluate.
    let model = linearize(inst);
    let flat = |m: &Vec<Vec<f64>>| m.concat();
    let cf: Vec<f64> = sol.c.concat().iter().map(|&v| v as f64).collect();
    let pf = flat(&sol.p);
    let lf = flat(&sol.lambda);
    let xf = flat(&sol.xi);
    let raised: Vec<f64> = (0..inst.n_tuples())
        .map(|t| 1.0 + pf[t].min(pm * cf[t]) * inst.gain_t(t))
        .collect();
    let before = model.log2_objective(&model.pack(&cf, &pf, &xf, &lf));
    let raised_point = model.pack(&cf, &pf, &raised, &lf);
    let after = model.log2_objective(&raised_point);
    let residual_after = model.residuals(&raised_point).max();

    CheckReport {
        c1_binary,
        c2_assignment,
        c3_power,
        c4_budget,
        c5_rate: c5_rate.max(0.0),
        lambda_exactness,
        xi_gap,
        xi_violation: xi_violation.max(0.0),
        objective,
        objective_mismatch,
        probe: TighteningProbe { before_bits: before, after_bits: after, residual_after },
    }
}
