//! The mixed-integer convex reformulation.
//!
//! Per tuple `t` the model carries a binary `c_t`, a power `p_t`, a slack
//! `ξ_t ≤ 1 + c_t·p_t·h_t` written as two affine pieces, and `λ_t = c_t·p_t`
//! linearized by the four bounds N1 to N4. The NDC objective is the geometric
//! mean of the NDC slacks and every DC user keeps a geometric-mean floor.

use serde::Serialize;

use super::instance::IntraInstance;

/// Which block of the variable vector an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VarKind {
    C,
    P,
    Xi,
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Origin of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintTag {
    /// `Σ_k c_{k,l} = 1`
    Assignment { subcarrier: usize },
    /// `ξ_t ≤ 1 + p_t·h_t`
    XiPower { t: usize },
    /// `ξ_t ≤ 1 + P·c_t·h_t`
    XiAssign { t: usize },
    /// `λ_t ≤ P·c_t`
    N1 { t: usize },
    /// `λ_t ≥ 0`
    N2 { t: usize },
    /// `λ_t ≤ p_t`
    N3 { t: usize },
    /// `λ_t ≥ p_t − P·(1 − c_t)`
    N4 { t: usize },
    /// `Σ λ_t ≤ P`
    N5,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub tag: ConstraintTag,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(i, a)| a * x[*i]).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let d = self.lhs(x) - self.rhs;
        match self.sense {
            Sense::Le => d.max(0.0),
            Sense::Ge => (-d).max(0.0),
            Sense::Eq => d.abs(),
        }
    }
}

/// `(Π_{t ∈ tuples} ξ_t)^{1/L} ≥ 2^{R}`, kept in log form as
/// `Σ log2 ξ_t ≥ L·R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeoMeanConstraint {
    pub user: usize,
    pub tuples: Vec<usize>,
    pub required_bits: f64,
}

/// Floor applied to `ξ` before taking logarithms.
pub const XI_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexMIModel {
    inst: IntraInstance,
    linear: Vec<LinearConstraint>,
    dc: Vec<GeoMeanConstraint>,
    objective_tuples: Vec<usize>,
}

/// Builds the linearized model.
pub fn linearize(inst: &IntraInstance) -> ConvexMIModel {
    let m = inst.n_tuples();
    let pm = inst.p_max();
    let (c, p, xi, lam) = (0, m, 2 * m, 3 * m);
    let mut linear = Vec::with_capacity(inst.n_subcarriers() + 6 * m + 1);

    for sc in 0..inst.n_subcarriers() {
        linear.push(LinearConstraint {
            tag: ConstraintTag::Assignment { subcarrier: sc },
            terms: (0..inst.n_users()).map(|k| (c + inst.tuple(k, sc), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for t in 0..m {
        let h = inst.gain_t(t);
        let rows = [
            (ConstraintTag::XiPower { t }, vec![(xi + t, 1.0), (p + t, -h)], Sense::Le, 1.0),
            (ConstraintTag::XiAssign { t }, vec![(xi + t, 1.0), (c + t, -pm * h)], Sense::Le, 1.0),
            (ConstraintTag::N1 { t }, vec![(lam + t, 1.0), (c + t, -pm)], Sense::Le, 0.0),
            (ConstraintTag::N2 { t }, vec![(lam + t, 1.0)], Sense::Ge, 0.0),
            (ConstraintTag::N3 { t }, vec![(lam + t, 1.0), (p + t, -1.0)], Sense::Le, 0.0),
            (ConstraintTag::N4 { t }, vec![(lam + t, 1.0), (p + t, -1.0), (c + t, -pm)], Sense::Ge, -pm),
        ];
        for (tag, terms, sense, rhs) in rows {
            linear.push(LinearConstraint { tag, terms, sense, rhs });
        }
    }
    linear.push(LinearConstraint {
        tag: ConstraintTag::N5,
        terms: (0..m).map(|t| (lam + t, 1.0)).collect(),
        sense: Sense::Le,
        rhs: pm,
    });

    let dc = (inst.n_ndc()..inst.n_users())
        .map(|k| GeoMeanConstraint {
            user: k,
            tuples: (0..inst.n_subcarriers()).map(|sc| inst.tuple(k, sc)).collect(),
            required_bits: inst.required_bits(k),
        })
        .collect();
    let objective_tuples = (0..inst.n_ndc())
        .flat_map(|k| (0..inst.n_subcarriers()).map(move |sc| inst.tuple(k, sc)))
        .collect();
    ConvexMIModel { inst: inst.clone(), linear, dc, objective_tuples }
}

/// Largest violation of each constraint family at a point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelResiduals {
    pub assignment: f64,
    pub xi: f64,
    pub lambda_bounds: f64,
    pub power_budget: f64,
    pub dc: f64,
    pub variable_bounds: f64,
}

impl ModelResiduals {
    pub fn max(&self) -> f64 {
        [self.assignment, self.xi, self.lambda_bounds, self.power_budget, self.dc, self.variable_bounds]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl ConvexMIModel {
    pub fn instance(&self) -> &IntraInstance {
        &self.inst
    }

    pub fn n_tuples(&self) -> usize {
        self.inst.n_tuples()
    }

    pub fn n_vars(&self) -> usize {
        4 * self.n_tuples()
    }

    pub fn var(&self, kind: VarKind, t: usize) -> usize {
        let m = self.n_tuples();
        match kind {
            VarKind::C => t,
            VarKind::P => m + t,
            VarKind::Xi => 2 * m + t,
            VarKind::Lambda => 3 * m + t,
        }
    }

    pub fn linear_constraints(&self) -> &[LinearConstraint] {
        &self.linear
    }

    pub fn dc_constraints(&self) -> &[GeoMeanConstraint] {
        &self.dc
    }

    pub fn objective_tuples(&self) -> &[usize] {
        &self.objective_tuples
    }

    /// `(c, p)` bounds: `c ∈ [0, 1]`, `p ∈ [0, P]`.
    pub fn variable_bounds(&self, index: usize) -> (f64, f64) {
        let m = self.n_tuples();
        match index / m {
            0 => (0.0, 1.0),
            1 => (0.0, self.inst.p_max()),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Packs per-tuple vectors into the model's variable order.
    pub fn pack(&self, c: &[f64], p: &[f64], xi: &[f64], lambda: &[f64]) -> Vec<f64> {
        [c, p, xi, lambda].concat()
    }

    /// Geometric mean of the NDC slacks.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = self.objective_tuples.len() as f64;
        (self.log2_objective(x) / n).exp2()
    }

    /// `Σ_{t ∈ NDC} log2 ξ_t`, the monotone image of the objective in bits.
    pub fn log2_objective(&self, x: &[f64]) -> f64 {
        let xi0 = self.var(VarKind::Xi, 0);
        self.objective_tuples.iter().map(|t| x[xi0 + t].max(XI_FLOOR).log2()).sum()
    }

    pub fn residuals(&self, x: &[f64]) -> ModelResiduals {
        let mut r = ModelResiduals::default();
        for con in &self.linear {
            let v = con.violation(x);
            let slot = match con.tag {
                ConstraintTag::Assignment { .. } => &mut r.assignment,
                ConstraintTag::XiPower { .. } | ConstraintTag::XiAssign { .. } => &mut r.xi,
                ConstraintTag::N5 => &mut r.power_budget,
                _ => &mut r.lambda_bounds,
            };
            *slot = slot.max(v);
        }
        let xi0 = self.var(VarKind::Xi, 0);
        for con in &self.dc {
            let bits: f64 = con.tuples.iter().map(|t| x[xi0 + t].max(XI_FLOOR).log2()).sum();
            r.dc = r.dc.max(con.required_bits - bits);
        }
        for (i, v) in x.iter().enumerate().take(2 * self.n_tuples()) {
            let (lo, hi) = self.variable_bounds(i);
            r.variable_bounds = r.variable_bounds.max(lo - v).max(v - hi);
        }
        r
    }
}
