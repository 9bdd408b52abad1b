use std::time::Instant;

use super::config::{dbm_to_watts, ExperimentConfig};
use super::output::{sort_rows, ResultRow, Status};
use super::{run_pool, substream, trial_seed, HarnessError};
use crate::channel::{sample_channel, ChannelProfile, GridSpec};
use crate::interop::{
    active_priorities, allocate_fragments, allocate_subcarrier_gain, compute_demand, operator_throughput_with_guard,
    ContentionMemory, DemandReport,
};
use crate::intraop::{
    branch_and_bound_with, build_instance, linearize, oracle_exhaustive, BnbOptions, IntraInstance, IntraopError,
    NodeRecord,
};

const EXP_INTEROP: u64 = 0;
const EXP_DIVERSITY: u64 = 1;
const EXP_INTRAOP: u64 = 2;

/// Stream for the fragment contention draw.
const CONTENTION_STREAM: u64 = 1;

struct SharingJob {
    point: usize,
    trial: usize,
    operators: usize,
    users: usize,
}

/// Both sharing schemes on every (operator count, users per operator) pair of
/// the top-level sweep.
pub fn run_interop_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    sharing_sweep(cfg, "interop", EXP_INTEROP, &cfg.operators.values(), &cfg.users_per_operator.values())
}

/// Both sharing schemes over the users-per-operator sweep of the
/// `[diversity]` block.
pub fn run_diversity_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    let d = &cfg.diversity;
    sharing_sweep(cfg, "diversity", EXP_DIVERSITY, &d.operators.values(), &d.users_per_operator.values())
}

fn sharing_sweep(
    cfg: &ExperimentConfig,
    name: &str,
    experiment: u64,
    operators: &[usize],
    users: &[usize],
) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let grid = cfg.grid_spec()?;
    let profile = cfg.channel_profile()?;
    let mut jobs = Vec::new();
    let mut point = 0;
    for &n in operators {
        cfg.sharing_policy(n)?;
        for &k in users {
            jobs.extend((0..cfg.trials).map(|trial| SharingJob { point, trial, operators: n, users: k }));
            point += 1;
        }
    }
    let mut rows: Vec<ResultRow> = run_pool(&jobs, cfg.threads, |job| {
        let seed = trial_seed(cfg.master_seed, experiment, job.point, job.trial);
        sharing_trial(cfg, &grid, &profile, name, job, seed)
    })
    .into_iter()
    .flatten()
    .collect();
    sort_rows(&mut rows);
    Ok(rows)
}

fn sharing_trial(
    cfg: &ExperimentConfig,
    grid: &GridSpec,
    profile: &ChannelProfile,
    name: &str,
    job: &SharingJob,
    seed: u64,
) -> Vec<ResultRow> {
    let base = ResultRow {
        experiment: name.to_string(),
        point: job.point,
        trial: job.trial,
        seed,
        operators: Some(job.operators),
        users_per_operator: Some(job.users),
        p_max_dbm: None,
        scheme: String::new(),
        value: None,
        gap: None,
        status: Status::Ok,
        message: String::new(),
        nodes: None,
        wall_time_s: None,
    };
    let fail = |msg: String| {
        ["subcarrier_gain", "fragmentation"]
            .into_iter()
            .map(|s| ResultRow { scheme: s.into(), status: Status::Error, message: msg.clone(), ..base.clone() })
            .collect::<Vec<_>>()
    };

    let n = job.operators;
    let n_sub = grid.n_subcarriers();
    let p_max = vec![cfg.p_max_per_operator; n];
    let ch = match sample_channel(grid, profile, &vec![job.users; n], seed) {
        Ok(ch) => ch,
        Err(e) => return fail(e.to_string()),
    };
    let policy = cfg.sharing_policy(n).expect("policy validated before the sweep");
    let avg_snr: Vec<f64> = (0..n).map(|op| ch.mean_gain(op)).collect();
    let demand = if cfg.policy.rate_targets.is_empty() {
        DemandReport::overloaded(n_sub, avg_snr, p_max.clone())
    } else {
        let delta = (0..n)
            .map(|op| compute_demand(cfg.policy.rate_targets[op], p_max[op], avg_snr[op], n_sub).subcarriers)
            .collect();
        DemandReport { delta, avg_snr, p_max: p_max.clone() }
    };
    let act = match active_priorities(&policy, &demand, n_sub) {
        Ok(a) => a,
        Err(e) => return fail(e.to_string()),
    };

    let guard = cfg.policy.guard_subcarriers;
    let timed = |f: &dyn Fn() -> Result<f64, String>| {
        let start = Instant::now();
        let r = f();
        (r, cfg.record_wall_time.then(|| start.elapsed().as_secs_f64()))
    };
    let gain = timed(&|| {
        let alloc = allocate_subcarrier_gain(&ch, &act).map_err(|e| e.to_string())?;
        operator_throughput_with_guard(&alloc, &ch, &p_max, guard).map(|t| t.total).map_err(|e| e.to_string())
    });
    let frag = timed(&|| {
        // Each trial is its own contention period.
        let mut memory = ContentionMemory::default();
        let alloc = allocate_fragments(&act, &policy, grid, substream(seed, CONTENTION_STREAM), &mut memory)
            .map_err(|e| e.to_string())?;
        operator_throughput_with_guard(&alloc, &ch, &p_max, guard).map(|t| t.total).map_err(|e| e.to_string())
    });
    let gap = match (&gain.0, &frag.0) {
        (Ok(a), Ok(b)) => Some(a - b),
        _ => None,
    };
    [("subcarrier_gain", gain), ("fragmentation", frag)]
        .into_iter()
        .map(|(scheme, (r, wall))| {
            let (value, status, message) = match r {
                Ok(v) => (Some(v), Status::Ok, String::new()),
                Err(m) => (None, Status::Error, m),
            };
            ResultRow { scheme: scheme.into(), value, gap, status, message, wall_time_s: wall, ..base.clone() }
        })
        .collect()
}

/// The intra-operator instance of one trial: one operator's users on a
/// contiguous `L`-subcarrier band of the configured bandwidth.
pub fn intraop_instance(cfg: &ExperimentConfig, trial: usize, p_max_w: f64) -> Result<IntraInstance, HarnessError> {
    let io = &cfg.intraop;
    let grid = GridSpec::contiguous(cfg.grid.bandwidth_hz, io.subcarriers)
        .map_err(|e| HarnessError::Config { field: "intraop.subcarriers".into(), message: e.to_string() })?;
    let profile = cfg.channel_profile()?;
    // The channel depends on the trial only, so every power level sees the
    // same instances.
    let seed = trial_seed(cfg.master_seed, EXP_INTRAOP, 0, trial);
    let ch = sample_channel(&grid, &profile, &[io.users], seed)
        .map_err(|e| HarnessError::Config { field: "intraop".into(), message: e.to_string() })?;
    let gains = (0..io.users).map(|k| ch.user_gains(0, k).to_vec()).collect();
    build_instance(gains, io.ndc_users, io.dc_targets.clone(), p_max_w)
        .map_err(|e| HarnessError::Config { field: "intraop".into(), message: e.to_string() })
}

/// Branch-and-bound node trace of one (power level, trial) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraopTrace {
    pub point: usize,
    pub trial: usize,
    pub nodes: Vec<NodeRecord>,
}

/// Oracle and branch-and-bound on every (power level, trial) instance.
pub fn run_intraop_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    intraop_inner(cfg, false).map(|r| r.0)
}

/// [`run_intraop_experiment`] that also keeps every branch-and-bound trace.
pub fn run_intraop_experiment_traced(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ResultRow>, Vec<IntraopTrace>), HarnessError> {
    intraop_inner(cfg, true)
}

fn intraop_inner(cfg: &ExperimentConfig, trace: bool) -> Result<(Vec<ResultRow>, Vec<IntraopTrace>), HarnessError> {
    cfg.validate()?;
    let levels = &cfg.intraop.p_max_dbm;
    let jobs: Vec<(usize, usize)> =
        (0..levels.len()).flat_map(|p| (0..cfg.trials).map(move |t| (p, t))).collect();
    // Instances are built up front so configuration problems surface as errors.
    let instances = jobs
        .iter()
        .map(|&(p, t)| intraop_instance(cfg, t, dbm_to_watts(levels[p])))
        .collect::<Result<Vec<_>, _>>()?;
    let indexed: Vec<usize> = (0..jobs.len()).collect();
    let results = run_pool(&indexed, cfg.threads, |&i| {
        let (point, trial) = jobs[i];
        intraop_trial(cfg, &instances[i], point, trial, levels[point], trace)
    });
    let mut rows = Vec::with_capacity(2 * jobs.len());
    let mut traces = Vec::new();
    for (r, t) in results {
        rows.extend(r);
        traces.extend(t);
    }
    sort_rows(&mut rows);
    Ok((rows, traces))
}

fn intraop_trial(
    cfg: &ExperimentConfig,
    inst: &IntraInstance,
    point: usize,
    trial: usize,
    dbm: f64,
    trace: bool,
) -> (Vec<ResultRow>, Option<IntraopTrace>) {
    let seed = trial_seed(cfg.master_seed, EXP_INTRAOP, 0, trial);
    let wall = |t: f64| cfg.record_wall_time.then_some(t);
    let oracle = oracle_exhaustive(inst);
    let opts = BnbOptions { trace, ..BnbOptions::default() };
    let bnb = branch_and_bound_with(&linearize(inst), &opts);

    let gap = match (&oracle, &bnb) {
        (Ok(o), Ok(b)) => {
            let (o, b) = (o.objective_ndc_sum_rate, b.solution.objective_ndc_sum_rate);
            Some(if o.abs() > 0.0 { (o - b) / o } else { o - b })
        }
        _ => None,
    };
    let row = |scheme: &str, r: Result<(f64, usize, f64), &IntraopError>| {
        let (value, status, message, nodes, wall_time_s) = match r {
            Ok((v, n, t)) => (Some(v), Status::Ok, String::new(), Some(n), wall(t)),
            Err(IntraopError::Infeasible) => (None, Status::Infeasible, String::new(), None, None),
            Err(e) => (None, Status::Error, e.to_string(), None, None),
        };
        ResultRow {
            experiment: "intraop".into(),
            point,
            trial,
            seed,
            operators: None,
            users_per_operator: None,
            p_max_dbm: Some(dbm),
            scheme: scheme.into(),
            value,
            gap,
            status,
            message,
            nodes,
            wall_time_s,
        }
    };
    let stats = |s: &crate::intraop::IntraSolution| (s.objective_ndc_sum_rate, s.solver_stats.nodes, s.solver_stats.wall_time_s);
    let rows = vec![
        row("oracle", oracle.as_ref().map(stats)),
        row("branch_and_bound", bnb.as_ref().map(|r| stats(&r.solution))),
    ];
    let tr = match bnb {
        Ok(r) if trace => Some(IntraopTrace { point, trial, nodes: r.trace }),
        _ => None,
    };
    (rows, tr)
}
