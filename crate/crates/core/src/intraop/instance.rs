use serde::{Deserialize, Serialize};

use super::IntraopError;

/// One operator's resource-allocation problem: `K` users, the first `K1` of
/// them rate-maximizing (NDC) and the rest rate-constrained (DC), over `L`
/// subcarriers under a total power budget.
///
/// Tuples `(k, l)` are flattened as `t = k·L + l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct IntraInstance {
    k: usize,
    k1: usize,
    l: usize,
    p_max: f64,
    gains: Vec<f64>,
    dc_targets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    k1: usize,
    p_max: f64,
    gains: Vec<Vec<f64>>,
    dc_targets: Vec<f64>,
}

impl TryFrom<RawInstance> for IntraInstance {
    type Error = IntraopError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        build_instance(raw.gains, raw.k1, raw.dc_targets, raw.p_max)
    }
}

impl From<IntraInstance> for RawInstance {
    fn from(inst: IntraInstance) -> Self {
        RawInstance {
            k1: inst.k1,
            p_max: inst.p_max,
            gains: inst.gains.chunks(inst.l).map(<[f64]>::to_vec).collect(),
            dc_targets: inst.dc_targets,
        }
    }
}

/// Validates and assembles an instance.
///
/// `gains[k][l]` is the effective gain of user `k` on subcarrier `l`.
/// `dc_targets` holds spectral-efficiency targets in bits/s/Hz, either one per
/// DC user or one per user with zeros for the NDC users.
pub fn build_instance(
    gains: Vec<Vec<f64>>,
    k1: usize,
    dc_targets: Vec<f64>,
    p_max: f64,
) -> Result<IntraInstance, IntraopError> {
    let k = gains.len();
    let invalid = |msg: String| Err(IntraopError::InvalidInstance(msg));
    if k == 0 {
        return invalid("no users".into());
    }
    let l = gains[0].len();
    if l == 0 {
        return invalid("no subcarriers".into());
    }
    if let Some(row) = gains.iter().position(|r| r.len() != l) {
        return invalid(format!("gain row {row} has {} entries, expected {l}", gains[row].len()));
    }
    if k1 == 0 || k1 > k {
        return invalid(format!("K1 = {k1} must be between 1 and K = {k}"));
    }
    if gains.iter().flatten().any(|g| !(g.is_finite() && *g > 0.0)) {
        return invalid("gains must be positive and finite".into());
    }
    if !(p_max.is_finite() && p_max >= 0.0) {
        return invalid(format!("p_max = {p_max} must be finite and non-negative"));
    }
    let targets = if dc_targets.len() == k {
        if let Some(user) = dc_targets[..k1].iter().position(|r| *r != 0.0) {
            return Err(IntraopError::NdcTarget { user });
        }
        dc_targets
    } else if dc_targets.len() == k - k1 {
        let mut full = vec![0.0; k1];
        full.extend(dc_targets);
        full
    } else {
        return invalid(format!(
            "{} DC targets given for {} DC users",
            dc_targets.len(),
            k - k1
        ));
    };
    if targets.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return invalid("DC targets must be finite and non-negative".into());
    }
    Ok(IntraInstance { k, k1, l, p_max, gains: gains.concat(), dc_targets: targets })
}

impl IntraInstance {
    pub fn n_users(&self) -> usize {
        self.k
    }

    pub fn n_ndc(&self) -> usize {
        self.k1
    }

    pub fn n_subcarriers(&self) -> usize {
        self.l
    }

    pub fn n_tuples(&self) -> usize {
        self.k * self.l
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn tuple(&self, user: usize, subcarrier: usize) -> usize {
        user * self.l + subcarrier
    }

    pub fn user_of(&self, t: usize) -> usize {
        t / self.l
    }

    pub fn subcarrier_of(&self, t: usize) -> usize {
        t % self.l
    }

    pub fn gain(&self, user: usize, subcarrier: usize) -> f64 {
        self.gains[self.tuple(user, subcarrier)]
    }

    pub fn gain_t(&self, t: usize) -> f64 {
        self.gains[t]
    }

    pub fn is_dc(&self, user: usize) -> bool {
        user >= self.k1
    }

    /// Target in bits/s/Hz; zero for NDC users.
    pub fn dc_target(&self, user: usize) -> f64 {
        self.dc_targets[user]
    }

    /// Total bits the user must carry over the `L`-subcarrier horizon.
    pub fn required_bits(&self, user: usize) -> f64 {
        self.dc_targets[user] * self.l as f64
    }

    pub fn with_p_max(&self, p_max: f64) -> Result<Self, IntraopError> {
        if !(p_max.is_finite() && p_max >= 0.0) {
            return Err(IntraopError::InvalidInstance(format!("p_max = {p_max}")));
        }
        Ok(Self { p_max, ..self.clone() })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes: usize,
    pub relaxation_iterations: usize,
    pub wall_time_s: f64,
}

/// A binary assignment with powers and the linearization's slack values,
/// all indexed `[user][subcarrier]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraSolution {
    pub c: Vec<Vec<u8>>,
    pub p: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    /// NDC sum rate `Σ c·log2(1 + p·h)` over NDC tuples.
    pub objective_ndc_sum_rate: f64,
    pub solver_stats: SolverStats,
}

impl IntraSolution {
    /// Builds a solution from an assignment (`owner[l]` = user of subcarrier
    /// `l`) and per-tuple powers, with tight slacks `ξ = 1 + c·p·h`, `λ = c·p`.
    pub fn from_assignment(inst: &IntraInstance, owner: &[usize], powers: &[f64]) -> Self {
        let (k, l) = (inst.n_users(), inst.n_subcarriers());
        let mut c = vec![vec![0u8; l]; k];
        let mut p = vec![vec![0.0; l]; k];
        let mut xi = vec![vec![1.0; l]; k];
        let mut lambda = vec![vec![0.0; l]; k];
        for (sc, &user) in owner.iter().enumerate() {
            let pw = powers[inst.tuple(user, sc)];
            c[user][sc] = 1;
            p[user][sc] = pw;
            lambda[user][sc] = pw;
            xi[user][sc] = 1.0 + pw * inst.gain(user, sc);
        }
        let objective_ndc_sum_rate = ndc_sum_rate(inst, &c, &p);
        Self { c, p, xi, lambda, objective_ndc_sum_rate, solver_stats: SolverStats::default() }
    }

    /// Owner of every subcarrier, if the assignment satisfies C2.
    pub fn owners(&self) -> Option<Vec<usize>> {
        let l = self.c.first().map_or(0, Vec::len);
        (0..l)
            .map(|sc| {
                let mut users = self.c.iter().enumerate().filter(|(_, row)| row[sc] == 1);
                match (users.next(), users.next()) {
                    (Some((u, _)), None) => Some(u),
                    _ => None,
                }
            })
            .collect()
    }
}

/// `Σ_{k ≤ K1} Σ_l c·log2(1 + p·h)`.
pub fn ndc_sum_rate(inst: &IntraInstance, c: &[Vec<u8>], p: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for k in 0..inst.n_ndc() {
        for sc in 0..inst.n_subcarriers() {
            if c[k][sc] == 1 {
                total += crate::channel::subcarrier_rate(p[k][sc], inst.gain(k, sc));
            }
        }
    }
    total
}
