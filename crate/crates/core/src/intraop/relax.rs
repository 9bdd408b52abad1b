//! Continuous relaxation of the linearized model.
//!
//! The solver works on an equivalent reduced form. `ξ_t` is eliminated as
//! `1 + u_t·h_t`, where `u_t` is the power that actually reaches the user;
//! tuples fixed to 0 drop out, tuples fixed to 1 keep a single variable
//! `u_t = λ_t = p_t`, and each free tuple keeps `(c_t, u_t, λ_t)` with
//!
//! ```text
//! 0 ≤ u ≤ P·c,   0 ≤ λ ≤ P·c,   λ ≥ u − P·(1 − c).
//! ```
//!
//! Powers are normalized by `P` internally. The reduced problem is solved by
//! a log-barrier method with a phase-I search for DC feasibility; every Newton
//! system is solved through a Schur complement whose size is the number of
//! open subcarriers plus the coupling constraints.

use serde::{Deserialize, Serialize};

use super::instance::IntraInstance;
use super::model::{ConvexMIModel, VarKind};
use super::IntraopError;

/// Branching state of one tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fix {
    Free,
    Zero,
    One,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxedSolution {
    /// Per-tuple values in `t = k·L + l` order.
    pub c: Vec<f64>,
    pub p: Vec<f64>,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `Σ_{NDC} log2 ξ` at the returned point.
    pub objective_bits: f64,
    /// Certified upper bound on the relaxation optimum, in bits.
    pub bound_bits: f64,
    pub iterations: usize,
    /// Fixings after propagation of the assignment constraints.
    pub fixings: Vec<Fix>,
}

impl RelaxedSolution {
    pub fn duality_gap_bits(&self) -> f64 {
        self.bound_bits - self.objective_bits
    }

    /// Geometric mean of the NDC slacks.
    pub fn geometric_mean(&self, n_ndc_tuples: usize) -> f64 {
        (self.objective_bits / n_ndc_tuples as f64).exp2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Relaxation {
    Solved(RelaxedSolution),
    Infeasible,
}

/// Solves the relaxation with `c` restricted by `fixed` and the remaining
/// `c_t ∈ [0, 1]`. The returned point satisfies every model constraint
/// within `tol`, and its objective is within `tol` bits of the certified
/// bound.
pub fn solve_relaxation(
    model: &ConvexMIModel,
    fixed: &[Fix],
    tol: f64,
) -> Result<Relaxation, IntraopError> {
    let inst = model.instance();
    if fixed.len() != inst.n_tuples() {
        return Err(IntraopError::InvalidInstance(format!(
            "{} fixings for {} tuples",
            fixed.len(),
            inst.n_tuples()
        )));
    }
    let red = match Reduced::new(inst, fixed) {
        Some(r) => r,
        None => return Ok(Relaxation::Infeasible),
    };
    let opts = BarrierOptions { gap_tol: (0.1 * tol).min(1e-7) * std::f64::consts::LN_2, stop_above: None };
    let sol = match red.solve(&opts)? {
        Outcome::Infeasible => return Ok(Relaxation::Infeasible),
        Outcome::Solved(s) => s,
    };
    let relaxed = red.reconstruct(inst, &sol);
    let x = model.pack(&relaxed.c, &relaxed.p, &relaxed.xi, &relaxed.lambda);
    let worst = model.residuals(&x).max();
    if worst > tol {
        return Err(IntraopError::SolverFailure(format!(
            "relaxed point violates the model by {worst:.3e}"
        )));
    }
    debug_assert_eq!(model.var(VarKind::C, 0), 0);
    Ok(Relaxation::Solved(relaxed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Owner {
    Ndc,
    Dc(usize),
    /// DC user whose target is zero.
    Idle,
}

#[derive(Debug, Clone, Copy)]
struct Tuple {
    t: usize,
    /// Gain scaled by `P`.
    h: f64,
    owner: Owner,
    group: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BarrierOptions {
    /// Target duality gap in nats.
    pub gap_tol: f64,
    /// Stop as soon as a centered point has objective above this many nats.
    pub stop_above: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierSolution {
    /// Reduced variables: `(c, u, λ)` per free tuple, then `u` per fixed tuple.
    x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) enum Outcome {
    Infeasible,
    Solved(BarrierSolution),
}

/// Reduced relaxation of one node.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    free: Vec<Tuple>,
    fixed: Vec<Tuple>,
    n_groups: usize,
    /// Required nats of each DC user with a positive target.
    dc_need: Vec<f64>,
    pub fixings: Vec<Fix>,
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    /// Minimize `s` subject to `G_k + s ≥ 0`, `s ≤ s_hi`.
    Feasibility { s_hi: f64 },
    Optimality,
}

const BARRIER_GROWTH: f64 = 50.0;
const NEWTON_TOL: f64 = 1e-9;
const MAX_NEWTON: usize = 80;

struct Workspace {
    g: Vec<f64>,
    dinv: Vec<[f64; 9]>,
    dinv_fixed: Vec<f64>,
    dx: Vec<f64>,
    trial: Vec<f64>,
    m: Vec<f64>,
    rhs: Vec<f64>,
    q: Vec<f64>,
    dc_val: Vec<f64>,
}

impl Reduced {
    /// Applies the fixings and propagates the assignment constraints; `None`
    /// when the fixings already make the node infeasible.
    pub(crate) fn new(inst: &IntraInstance, fixed: &[Fix]) -> Option<Self> {
        let (k_users, l) = (inst.n_users(), inst.n_subcarriers());
        let pm = inst.p_max();
        let mut dc_index = vec![None; k_users];
        let mut dc_need = Vec::new();
        for k in inst.n_ndc()..k_users {
            if inst.required_bits(k) > 0.0 {
                dc_index[k] = Some(dc_need.len());
                dc_need.push(inst.required_bits(k) * std::f64::consts::LN_2);
            }
        }
        let owner = |k: usize| {
            if k < inst.n_ndc() {
                Owner::Ndc
            } else {
                dc_index[k].map_or(Owner::Idle, Owner::Dc)
            }
        };

        let mut fixings = fixed.to_vec();
        let mut free = Vec::new();
        let mut fixed_one = Vec::new();
        let mut n_groups = 0;
        for sc in 0..l {
            let ones: Vec<usize> = (0..k_users).filter(|&k| fixed[inst.tuple(k, sc)] == Fix::One).collect();
            let frees: Vec<usize> = (0..k_users).filter(|&k| fixed[inst.tuple(k, sc)] == Fix::Free).collect();
            let chosen = match (ones.len(), frees.len()) {
                (0, 0) => return None,
                (0, 1) => Some(frees[0]),
                (0, _) => None,
                (1, _) => Some(ones[0]),
                _ => return None,
            };
            match chosen {
                Some(k) => {
                    for kk in 0..k_users {
                        fixings[inst.tuple(kk, sc)] = if kk == k { Fix::One } else { Fix::Zero };
                    }
                    let t = inst.tuple(k, sc);
                    fixed_one.push(Tuple { t, h: inst.gain_t(t) * pm, owner: owner(k), group: usize::MAX });
                }
                None => {
                    for k in frees {
                        let t = inst.tuple(k, sc);
                        free.push(Tuple { t, h: inst.gain_t(t) * pm, owner: owner(k), group: n_groups });
                    }
                    n_groups += 1;
                }
            }
        }
        for (d, _) in dc_need.iter().enumerate() {
            let has = free.iter().chain(&fixed_one).any(|tp| tp.owner == Owner::Dc(d));
            if !has {
                return None;
            }
        }
        Some(Self { free, fixed: fixed_one, n_groups, dc_need, fixings })
    }

    pub(crate) fn is_integral(&self) -> bool {
        self.free.is_empty()
    }

    fn n_vars(&self) -> usize {
        3 * self.free.len() + self.fixed.len()
    }

    fn n_inequalities(&self) -> usize {
        5 * self.free.len() + self.fixed.len() + 1 + self.dc_need.len()
    }

    fn u(&self, x: &[f64], j: usize) -> f64 {
        x[3 * self.free.len() + j]
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for (i, tp) in self.free.iter().enumerate() {
            if tp.owner == Owner::Ndc {
                f += (x[3 * i + 1] * tp.h).ln_1p();
            }
        }
        for (j, tp) in self.fixed.iter().enumerate() {
            if tp.owner == Owner::Ndc {
                f += (self.u(x, j) * tp.h).ln_1p();
            }
        }
        f
    }

    fn dc_values(&self, x: &[f64], out: &mut [f64]) {
        for (d, need) in self.dc_need.iter().enumerate() {
            out[d] = -need;
        }
        for (i, tp) in self.free.iter().enumerate() {
            if let Owner::Dc(d) = tp.owner {
                out[d] += (x[3 * i + 1] * tp.h).ln_1p();
            }
        }
        for (j, tp) in self.fixed.iter().enumerate() {
            if let Owner::Dc(d) = tp.owner {
                out[d] += (self.u(x, j) * tp.h).ln_1p();
            }
        }
    }

    fn budget_slack(&self, x: &[f64]) -> f64 {
        let mut used = 0.0;
        for i in 0..self.free.len() {
            used += x[3 * i + 2];
        }
        for j in 0..self.fixed.len() {
            used += self.u(x, j);
        }
        1.0 - used
    }

    fn start_point(&self) -> Vec<f64> {
        let mut group_size = vec![0usize; self.n_groups];
        for tp in &self.free {
            group_size[tp.group] += 1;
        }
        let beta = 0.5 / (self.n_groups + self.fixed.len()) as f64;
        let mut x = Vec::with_capacity(self.n_vars());
        for tp in &self.free {
            let c = 1.0 / group_size[tp.group] as f64;
            x.extend([c, 0.5 * c, beta * c]);
        }
        x.extend(std::iter::repeat_n(beta, self.fixed.len()));
        x
    }

    fn workspace(&self) -> Workspace {
        let n = self.n_vars();
        let nr = self.n_groups + 1 + self.dc_need.len();
        Workspace {
            g: vec![0.0; n],
            dinv: vec![[0.0; 9]; self.free.len()],
            dinv_fixed: vec![0.0; self.fixed.len()],
            dx: vec![0.0; n],
            trial: vec![0.0; n],
            m: vec![0.0; nr * nr],
            rhs: vec![0.0; nr],
            q: vec![0.0; self.free.len() + self.fixed.len()],
            dc_val: vec![0.0; self.dc_need.len()],
        }
    }

    /// Barrier value, or `None` outside the strict interior.
    fn barrier(&self, x: &[f64], s: f64, phase: Phase, tau: f64, dc: &mut [f64]) -> Option<f64> {
        let mut v = 0.0;
        for i in 0..self.free.len() {
            let (c, u, l) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            let r = [u, c - u, l, c - l, l - u + 1.0 - c];
            for ri in r {
                if !(ri > 0.0) {
                    return None;
                }
                v -= ri.ln();
            }
        }
        for j in 0..self.fixed.len() {
            let u = self.u(x, j);
            if !(u > 0.0) {
                return None;
            }
            v -= u.ln();
        }
        let rb = self.budget_slack(x);
        if !(rb > 0.0) {
            return None;
        }
        v -= rb.ln();
        self.dc_values(x, dc);
        let shift = if let Phase::Feasibility { .. } = phase { s } else { 0.0 };
        for g in dc.iter() {
            let gs = g + shift;
            if !(gs > 0.0) {
                return None;
            }
            v -= gs.ln();
        }
        match phase {
            Phase::Feasibility { s_hi } => {
                if !(s_hi - s > 0.0) {
                    return None;
                }
                v += tau * s - (s_hi - s).ln();
            }
            Phase::Optimality => v -= tau * self.objective(x),
        }
        Some(v)
    }

    /// Computes the Newton direction into `ws.dx` (and the `s` component,
    /// returned second). Returns `gᵀdx`, or `None` if the reduced system is
    /// numerically singular.
    fn newton(&self, x: &[f64], s: f64, phase: Phase, tau: f64, ws: &mut Workspace) -> Option<(f64, f64)> {
        let nf = self.free.len();
        let nd = self.dc_need.len();
        let ng = self.n_groups;
        let nr = ng + 1 + nd;
        let budget_row = ng;
        let dc_row = |d: usize| ng + 1 + d;
        let feas = matches!(phase, Phase::Feasibility { .. });
        let shift = if feas { s } else { 0.0 };

        self.dc_values(x, &mut ws.dc_val);
        for g in ws.dc_val.iter_mut() {
            *g += shift;
        }
        let rb = self.budget_slack(x);
        let inv_rb = 1.0 / rb;

        ws.m.iter_mut().for_each(|v| *v = 0.0);
        ws.rhs.iter_mut().for_each(|v| *v = 0.0);

        // Free tuples.
        for (i, tp) in self.free.iter().enumerate() {
            let (c, u, l) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            let i1 = 1.0 / u;
            let i2 = 1.0 / (c - u);
            let i3 = 1.0 / l;
            let i4 = 1.0 / (c - l);
            let i5 = 1.0 / (l - u + 1.0 - c);
            let gc = -(i2 + i4 - i5);
            let mut gu = -(i1 - i2 - i5);
            let gl = -(i3 - i4 + i5) + inv_rb;
            let (s1, s2, s3, s4, s5) = (i1 * i1, i2 * i2, i3 * i3, i4 * i4, i5 * i5);
            let hcc = s2 + s4 + s5;
            let hcu = -s2 + s5;
            let hcl = -s4 - s5;
            let mut huu = s1 + s2 + s5;
            let hul = -s5;
            let hll = s3 + s4 + s5;
            let q = tp.h / (1.0 + u * tp.h);
            ws.q[i] = q;
            match tp.owner {
                Owner::Ndc if !feas => {
                    gu -= tau * q;
                    huu += tau * q * q;
                }
                Owner::Dc(d) => {
                    let gd = ws.dc_val[d];
                    gu -= q / gd;
                    huu += q * q / gd;
                }
                _ => {}
            }
            let inv = invert_sym3(hcc, hcu, hcl, huu, hul, hll)?;
            ws.dinv[i] = inv;
            ws.g[3 * i] = gc;
            ws.g[3 * i + 1] = gu;
            ws.g[3 * i + 2] = gl;

            // Local rows: group on c, budget on λ, DC on u.
            let dg = mat3_vec(&inv, [ws.g[3 * i], ws.g[3 * i + 1], ws.g[3 * i + 2]]);
            let mut rows: [(usize, usize, f64); 3] = [(tp.group, 0, 1.0), (budget_row, 2, 1.0), (usize::MAX, 1, 0.0)];
            let n_rows = if let Owner::Dc(d) = tp.owner {
                rows[2] = (dc_row(d), 1, q);
                3
            } else {
                2
            };
            for a in 0..n_rows {
                let (ra, ia, sa) = rows[a];
                ws.rhs[ra] += sa * dg[ia];
                for b in 0..n_rows {
                    let (rb_, ib, sb) = rows[b];
                    ws.m[ra * nr + rb_] += sa * sb * inv[ia * 3 + ib];
                }
            }
        }
        // Fixed tuples.
        for (j, tp) in self.fixed.iter().enumerate() {
            let u = self.u(x, j);
            let mut g = -1.0 / u + inv_rb;
            let mut h = 1.0 / (u * u);
            let q = tp.h / (1.0 + u * tp.h);
            ws.q[nf + j] = q;
            match tp.owner {
                Owner::Ndc if !feas => {
                    g -= tau * q;
                    h += tau * q * q;
                }
                Owner::Dc(d) => {
                    let gd = ws.dc_val[d];
                    g -= q / gd;
                    h += q * q / gd;
                }
                _ => {}
            }
            let inv = 1.0 / h;
            ws.dinv_fixed[j] = inv;
            ws.g[3 * nf + j] = g;
            ws.rhs[budget_row] += inv * g;
            ws.m[budget_row * nr + budget_row] += inv;
            if let Owner::Dc(d) = tp.owner {
                let r = dc_row(d);
                ws.rhs[r] += q * inv * g;
                ws.m[r * nr + r] += q * q * inv;
                ws.m[r * nr + budget_row] += q * inv;
                ws.m[budget_row * nr + r] += q * inv;
            }
        }
        // Phase-I variable s: couples every DC row.
        let (gs, ds_inv) = if let Phase::Feasibility { s_hi } = phase {
            let gap = s_hi - s;
            let mut g = tau + 1.0 / gap;
            for d in 0..nd {
                g -= 1.0 / ws.dc_val[d];
            }
            let inv = gap * gap;
            for a in 0..nd {
                ws.rhs[dc_row(a)] += inv * g;
                for b in 0..nd {
                    ws.m[dc_row(a) * nr + dc_row(b)] += inv;
                }
            }
            (g, inv)
        } else {
            (0.0, 0.0)
        };
        // Rank-one weights enter as 1/w on the diagonal.
        ws.m[budget_row * nr + budget_row] += rb * rb;
        for d in 0..nd {
            let gd = ws.dc_val[d];
            ws.m[dc_row(d) * nr + dc_row(d)] += gd * gd;
        }

        for v in ws.rhs.iter_mut() {
            *v = -*v;
        }
        if !cholesky_solve(&mut ws.m, nr, &mut ws.rhs) {
            return None;
        }
        let y = &ws.rhs;

        let mut gdx = 0.0;
        for (i, tp) in self.free.iter().enumerate() {
            let mut r = [ws.g[3 * i], ws.g[3 * i + 1], ws.g[3 * i + 2]];
            r[0] += y[tp.group];
            r[2] += y[budget_row];
            if let Owner::Dc(d) = tp.owner {
                r[1] += ws.q[i] * y[dc_row(d)];
            }
            let d = mat3_vec(&ws.dinv[i], r);
            for a in 0..3 {
                ws.dx[3 * i + a] = -d[a];
                gdx -= ws.g[3 * i + a] * d[a];
            }
        }
        for (j, tp) in self.fixed.iter().enumerate() {
            let mut r = ws.g[3 * nf + j] + y[budget_row];
            if let Owner::Dc(d) = tp.owner {
                r += ws.q[nf + j] * y[dc_row(d)];
            }
            let d = ws.dinv_fixed[j] * r;
            ws.dx[3 * nf + j] = -d;
            gdx -= ws.g[3 * nf + j] * d;
        }
        let mut ds = 0.0;
        if feas {
            let mut r = gs;
            for d in 0..nd {
                r += y[dc_row(d)];
            }
            ds = -ds_inv * r;
            gdx += gs * ds;
        }
        Some((gdx, ds))
    }

    /// Largest step along `(dx, ds)` that keeps the linear constraints strictly
    /// satisfied.
    fn max_step(&self, x: &[f64], dx: &[f64], s: f64, ds: f64, phase: Phase) -> f64 {
        let mut alpha = f64::INFINITY;
        let mut limit = |r: f64, d: f64| {
            if d < 0.0 {
                alpha = alpha.min(-r / d);
            }
        };
        let mut dbudget = 0.0;
        for i in 0..self.free.len() {
            let (c, u, l) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
            let (dc, du, dl) = (dx[3 * i], dx[3 * i + 1], dx[3 * i + 2]);
            limit(u, du);
            limit(c - u, dc - du);
            limit(l, dl);
            limit(c - l, dc - dl);
            limit(l - u + 1.0 - c, dl - du - dc);
            dbudget -= dl;
        }
        let nf3 = 3 * self.free.len();
        for j in 0..self.fixed.len() {
            limit(x[nf3 + j], dx[nf3 + j]);
            dbudget -= dx[nf3 + j];
        }
        limit(self.budget_slack(x), dbudget);
        if let Phase::Feasibility { s_hi } = phase {
            limit(s_hi - s, -ds);
        }
        alpha
    }

    /// Newton centering; returns false when the line search stalls.
    fn center(&self, x: &mut Vec<f64>, s: &mut f64, phase: Phase, tau: f64, ws: &mut Workspace, iters: &mut usize, mut stop: impl FnMut(&Self, &[f64]) -> bool) -> Result<bool, IntraopError> {
        let mut dc = vec![0.0; self.dc_need.len()];
        let mut phi = self
            .barrier(x, *s, phase, tau, &mut dc)
            .ok_or_else(|| IntraopError::SolverFailure("iterate left the interior".into()))?;
        for _ in 0..MAX_NEWTON {
            let (gdx, ds) = match self.newton(x, *s, phase, tau, ws) {
                Some(v) => v,
                None => return Ok(false),
            };
            *iters += 1;
            if -gdx / 2.0 <= NEWTON_TOL {
                return Ok(true);
            }
            let mut alpha = (0.99 * self.max_step(x, &ws.dx, *s, ds, phase)).min(1.0);
            let mut accepted = false;
            while alpha > 1e-16 {
                for (k, t) in ws.trial.iter_mut().enumerate() {
                    *t = x[k] + alpha * ws.dx[k];
                }
                let s_new = *s + alpha * ds;
                if let Some(v) = self.barrier(&ws.trial, s_new, phase, tau, &mut dc) {
                    let roundoff = 1e-13 * (phi.abs() + 1.0);
                    if v <= phi + 0.01 * alpha * gdx || (v <= phi + roundoff && alpha * gdx.abs() < roundoff) {
                        std::mem::swap(x, &mut ws.trial);
                        *s = s_new;
                        phi = v;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Ok(false);
            }
            if stop(self, x) {
                return Ok(true);
            }
        }
        Ok(true)
    }

    pub(crate) fn solve(&self, opts: &BarrierOptions) -> Result<Outcome, IntraopError> {
        let mut x = self.start_point();
        let mut iterations = 0;
        let mut ws = self.workspace();
        let mut dc = vec![0.0; self.dc_need.len()];

        self.dc_values(&x, &mut dc);
        let worst = dc.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if worst <= 0.0 {
            let mut s = 1.0 - worst;
            let s_hi = s + 1.0 + s.abs();
            let phase = Phase::Feasibility { s_hi };
            let m1 = (self.n_inequalities() + 1) as f64;
            let mut tau = 1.0;
            let feasible = |red: &Self, x: &[f64]| {
                let mut v = vec![0.0; red.dc_need.len()];
                red.dc_values(x, &mut v);
                v.iter().all(|g| *g > 0.0)
            };
            loop {
                self.center(&mut x, &mut s, phase, tau, &mut ws, &mut iterations, feasible)?;
                if feasible(self, &x) {
                    break;
                }
                if s - m1 / tau > 0.0 || m1 / tau < 1e-12 {
                    return Ok(Outcome::Infeasible);
                }
                tau *= BARRIER_GROWTH;
            }
        }

        let m2 = self.n_inequalities() as f64;
        let mut tau = m2 / self.objective(&x).abs().max(1.0);
        let mut s = 0.0;
        loop {
            self.center(&mut x, &mut s, Phase::Optimality, tau, &mut ws, &mut iterations, |_, _| false)?;
            let f = self.objective(&x);
            let gap = m2 / tau;
            let done = gap <= opts.gap_tol || opts.stop_above.is_some_and(|v| f > v);
            if done || tau > 1e15 {
                return Ok(Outcome::Solved(BarrierSolution { x, objective: f, bound: f + gap, iterations }));
            }
            tau *= BARRIER_GROWTH;
        }
    }

    /// Maps a reduced point back to per-tuple `(c, p, ξ, λ)`.
    pub(crate) fn reconstruct(&self, inst: &IntraInstance, sol: &BarrierSolution) -> RelaxedSolution {
        let m = inst.n_tuples();
        let pm = inst.p_max();
        let mut c = vec![0.0; m];
        let mut p = vec![0.0; m];
        let mut xi = vec![1.0; m];
        let mut lambda = vec![0.0; m];
        for (i, tp) in self.free.iter().enumerate() {
            let (ci, u, l) = (sol.x[3 * i], sol.x[3 * i + 1], sol.x[3 * i + 2]);
            c[tp.t] = ci;
            p[tp.t] = u.max(l) * pm;
            lambda[tp.t] = l * pm;
            xi[tp.t] = 1.0 + u * tp.h;
        }
        for (j, tp) in self.fixed.iter().enumerate() {
            let u = self.u(&sol.x, j);
            c[tp.t] = 1.0;
            p[tp.t] = u * pm;
            lambda[tp.t] = u * pm;
            xi[tp.t] = 1.0 + u * tp.h;
        }
        let ln2 = std::f64::consts::LN_2;
        RelaxedSolution {
            c,
            p,
            xi,
            lambda,
            objective_bits: sol.objective / ln2,
            bound_bits: sol.bound / ln2,
            iterations: sol.iterations,
            fixings: self.fixings.clone(),
        }
    }

    /// Free tuple whose `c` is closest to 1/2; ties go to the lowest tuple.
    pub(crate) fn most_fractional(&self, sol: &BarrierSolution) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, tp) in self.free.iter().enumerate() {
            let c = sol.x[3 * i];
            let frac = c.min(1.0 - c);
            match best {
                Some((bt, bf)) if frac < bf - 1e-12 || (frac <= bf + 1e-12 && tp.t > bt) => {}
                _ => best = Some((tp.t, frac)),
            }
        }
        best.map(|(t, _)| t)
    }

    /// Free tuple with the largest relaxed `c`; ties go to the lowest tuple.
    pub(crate) fn most_assigned(&self, sol: &BarrierSolution) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, tp) in self.free.iter().enumerate() {
            let c = sol.x[3 * i];
            match best {
                Some((bt, bc)) if c < bc - 1e-12 || (c <= bc + 1e-12 && tp.t > bt) => {}
                _ => best = Some((tp.t, c)),
            }
        }
        best.map(|(t, _)| t)
    }
}

fn invert_sym3(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Option<[f64; 9]> {
    // [[a b c] [b d e] [c e f]]
    let c00 = d * f - e * e;
    let c01 = c * e - b * f;
    let c02 = b * e - c * d;
    let det = a * c00 + b * c01 + c * c02;
    if !(det.is_finite() && det > 0.0) {
        return None;
    }
    let c11 = a * f - c * c;
    let c12 = b * c - a * e;
    let c22 = a * d - b * b;
    let r = 1.0 / det;
    Some([
        c00 * r, c01 * r, c02 * r,
        c01 * r, c11 * r, c12 * r,
        c02 * r, c12 * r, c22 * r,
    ])
}

fn mat3_vec(m: &[f64; 9], v: [f64; 3]) -> [f64; 3] {
    [
        m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
        m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
        m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
    ]
}

/// In-place Cholesky solve of the dense SPD system `m·x = b`.
fn cholesky_solve(m: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    for j in 0..n {
        let mut d = m[j * n + j];
        for k in 0..j {
            d -= m[j * n + k] * m[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        m[j * n + j] = d;
        for i in j + 1..n {
            let mut v = m[i * n + j];
            for k in 0..j {
                v -= m[i * n + k] * m[j * n + k];
            }
            m[i * n + j] = v / d;
        }
    }
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= m[i * n + k] * b[k];
        }
        b[i] = v / m[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= m[k * n + i] * b[k];
        }
        b[i] = v / m[i * n + i];
    }
    true
}
