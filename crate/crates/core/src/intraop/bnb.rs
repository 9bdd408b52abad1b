use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::LN_2;
use std::time::Instant;

use serde::Serialize;

use super::instance::{IntraSolution, SolverStats};
use super::model::ConvexMIModel;
use super::relax::{BarrierOptions, Fix, Outcome, Reduced};
use super::waterfill::waterfill_min_power;
use super::IntraopError;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    /// Nodes whose bound does not beat the incumbent by more than this many
    /// bits are pruned.
    pub prune_tol: f64,
    /// Duality gap, in bits, at which a node relaxation counts as solved.
    pub gap_tol: f64,
    /// Dive from the root to an integral point before the search starts.
    pub dive: bool,
    /// Stop a node solve once its relaxation provably beats the incumbent.
    pub early_stop: bool,
    pub max_nodes: usize,
    /// Record every processed node.
    pub trace: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self { prune_tol: 1e-6, gap_tol: 1e-8, dive: true, early_stop: true, max_nodes: 50_000_000, trace: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Branched,
    Leaf,
    Pruned,
    Infeasible,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Branched => "branched",
            NodeStatus::Leaf => "leaf",
            NodeStatus::Pruned => "pruned",
            NodeStatus::Infeasible => "infeasible",
        }
    }
}

/// One line of the node trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRecord {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Relaxation bound in bits; the parent's bound for nodes pruned unsolved,
    /// `None` for infeasible nodes.
    pub bound: Option<f64>,
    pub incumbent: Option<f64>,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbReport {
    pub solution: IntraSolution,
    pub root_bound: f64,
    pub trace: Vec<NodeRecord>,
}

struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    fixings: Vec<Fix>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Highest bound first, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(other.id.cmp(&self.id))
    }
}

struct Incumbent {
    value: f64,
    fixings: Vec<Fix>,
    c: Vec<f64>,
    lambda: Vec<f64>,
}

/// Solves the model to binary optimality with default options.
pub fn branch_and_bound(model: &ConvexMIModel) -> Result<IntraSolution, IntraopError> {
    branch_and_bound_with(model, &BnbOptions::default()).map(|r| r.solution)
}

/// Best-first branch-and-bound over the continuous relaxation, branching on
/// the most fractional `c_t`.
pub fn branch_and_bound_with(model: &ConvexMIModel, opts: &BnbOptions) -> Result<BnbReport, IntraopError> {
    let start = Instant::now();
    let inst = model.instance();
    if !dc_targets_attainable(model) {
        return Err(IntraopError::Infeasible);
    }

    let barrier = |stop: Option<f64>| BarrierOptions { gap_tol: opts.gap_tol * LN_2, stop_above: stop };
    let mut iterations = 0;
    let mut incumbent: Option<Incumbent> = None;
    let mut trace = Vec::new();

    let root_fix = vec![Fix::Free; inst.n_tuples()];
    let root = Reduced::new(inst, &root_fix).ok_or(IntraopError::Infeasible)?;
    let root_sol = match root.solve(&barrier(None))? {
        Outcome::Infeasible => return Err(IntraopError::Infeasible),
        Outcome::Solved(s) => s,
    };
    iterations += root_sol.iterations;
    let root_bound = root_sol.bound / LN_2;

    if opts.dive {
        let mut red = root.clone();
        let mut sol = root_sol.clone();
        loop {
            if red.is_integral() {
                offer(&mut incumbent, &red, &sol, model);
                break;
            }
            let t = red.most_assigned(&sol).expect("non-integral node has a free tuple");
            let mut fix = red.fixings.clone();
            fix[t] = Fix::One;
            red = match Reduced::new(inst, &fix) {
                Some(r) => r,
                None => break,
            };
            sol = match red.solve(&barrier(None))? {
                Outcome::Infeasible => break,
                Outcome::Solved(s) => s,
            };
            iterations += sol.iterations;
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, parent: None, depth: 0, bound: f64::INFINITY, fixings: root_fix });
    let mut next_id = 1;
    let mut nodes = 0;
    let incumbent_value = |inc: &Option<Incumbent>| inc.as_ref().map(|i| i.value);

    while let Some(node) = heap.pop() {
        nodes += 1;
        if nodes > opts.max_nodes {
            return Err(IntraopError::SolverFailure(format!("node limit of {} reached", opts.max_nodes)));
        }
        let mut record = |bound: Option<f64>, status: NodeStatus, inc: Option<f64>| {
            if opts.trace {
                trace.push(NodeRecord {
                    node: node.id,
                    parent: node.parent,
                    depth: node.depth,
                    bound,
                    incumbent: inc,
                    status,
                });
            }
        };
        let best = incumbent_value(&incumbent);
        if best.is_some_and(|v| node.bound <= v + opts.prune_tol) {
            record(Some(node.bound), NodeStatus::Pruned, best);
            continue;
        }
        let red = match Reduced::new(inst, &node.fixings) {
            Some(r) => r,
            None => {
                record(None, NodeStatus::Infeasible, best);
                continue;
            }
        };
        let stop = match (opts.early_stop && !red.is_integral(), best) {
            (true, Some(v)) => Some((v + opts.prune_tol) * LN_2),
            _ => None,
        };
        let sol = match red.solve(&barrier(stop))? {
            Outcome::Infeasible => {
                record(None, NodeStatus::Infeasible, best);
                continue;
            }
            Outcome::Solved(s) => s,
        };
        iterations += sol.iterations;
        let bound = sol.bound / LN_2;
        if best.is_some_and(|v| bound <= v + opts.prune_tol) {
            record(Some(bound), NodeStatus::Pruned, best);
            continue;
        }
        if red.is_integral() {
            offer(&mut incumbent, &red, &sol, model);
            record(Some(bound), NodeStatus::Leaf, incumbent_value(&incumbent));
            continue;
        }
        record(Some(bound), NodeStatus::Branched, best);
        let t = red.most_fractional(&sol).expect("non-integral node has a free tuple");
        for value in [Fix::One, Fix::Zero] {
            let mut fixings = red.fixings.clone();
            fixings[t] = value;
            heap.push(Node { id: next_id, parent: Some(node.id), depth: node.depth + 1, bound, fixings });
            next_id += 1;
        }
    }

    let inc = incumbent.ok_or(IntraopError::Infeasible)?;
    let mut solution = to_solution(model, &inc);
    solution.solver_stats =
        SolverStats { nodes, relaxation_iterations: iterations, wall_time_s: start.elapsed().as_secs_f64() };
    Ok(BnbReport { solution, root_bound, trace })
}

/// Quick necessary condition: every DC user served alone on the whole band
/// must fit in the budget, and so must their sum.
fn dc_targets_attainable(model: &ConvexMIModel) -> bool {
    let inst = model.instance();
    let mut total = 0.0;
    for k in inst.n_ndc()..inst.n_users() {
        let bits = inst.required_bits(k);
        if bits > 0.0 {
            let gains: Vec<f64> = (0..inst.n_subcarriers()).map(|l| inst.gain(k, l)).collect();
            total += waterfill_min_power(&gains, bits).iter().sum::<f64>();
        }
    }
    total <= inst.p_max()
}

fn offer(incumbent: &mut Option<Incumbent>, red: &Reduced, sol: &super::relax::BarrierSolution, model: &ConvexMIModel) {
    let relaxed = red.reconstruct(model.instance(), sol);
    let value = relaxed.objective_bits;
    if incumbent.as_ref().is_none_or(|i| value > i.value) {
        *incumbent = Some(Incumbent {
            value,
            fixings: red.fixings.clone(),
            c: relaxed.c,
            lambda: relaxed.lambda,
        });
    }
}

fn to_solution(model: &ConvexMIModel, inc: &Incumbent) -> IntraSolution {
    let inst = model.instance();
    let mut owner = vec![0; inst.n_subcarriers()];
    let mut powers = vec![0.0; inst.n_tuples()];
    for t in 0..inst.n_tuples() {
        if inc.fixings[t] == Fix::One {
            debug_assert_eq!(inc.c[t], 1.0);
            owner[inst.subcarrier_of(t)] = inst.user_of(t);
            powers[t] = inc.lambda[t];
        }
    }
    IntraSolution::from_assignment(inst, &owner, &powers)
}
