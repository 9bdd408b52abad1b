//! The seven acceptance criteria, one test each. Every test prints a single
//! `criterion N ...: PASS|FAIL` line with the measured numbers before it
//! asserts.

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shared_spectrum::channel::{sample_channel, ChannelProfile, GridSpec};
use shared_spectrum::harness::{
    dbm_to_watts, intraop_instance, run_diversity_sweep, run_interop_sweep, run_intraop_experiment, summarize,
    ExperimentConfig, Status,
};
use shared_spectrum::interop::{
    active_priorities, allocate_fragments, allocate_subcarrier_gain, ContentionMemory, DemandReport, PriorityRule,
    SharingPolicy,
};
use shared_spectrum::intraop::{
    branch_and_bound, build_instance, check_solution, linearize, oracle_exhaustive, oracle_table, waterfill_level,
    ConstraintTag, IntraInstance, IntraopError, Sense, VarKind,
};

fn report(n: usize, name: &str, ok: bool, detail: &str) -> bool {
    println!("criterion {n} ({name}): {} | {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

#[test]
fn criterion_1_subcarrier_sharing_beats_fragments() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    assert_eq!(cfg.trials, 100);
    assert_eq!(cfg.operators.values(), vec![2, 3, 4, 5, 6]);
    let rows = run_interop_sweep(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let s = summarize(&rows);

    let mut ok = rows.iter().all(|r| r.status == Status::Ok) && secs < 300.0;
    let mut detail = Vec::new();
    for p in &s {
        let (g, f) = (p.scheme_mean("subcarrier_gain").unwrap(), p.scheme_mean("fragmentation").unwrap());
        ok &= p.gaps == 100 && g >= f;
        detail.push(format!("N={}: {g:.4} vs {f:.4} gap {:.4}±{:.4}", p.operators.unwrap(), p.gap_mean, p.gap_se));
    }
    for w in s.windows(2) {
        let slack = (w[0].gap_se.powi(2) + w[1].gap_se.powi(2)).sqrt();
        ok &= w[1].gap_mean >= w[0].gap_mean - slack;
    }
    let detail = format!("{}; {secs:.1} s", detail.join("; "));
    assert!(report(1, "mean throughput ordering and gap trend over operator count", ok, &detail));
}

#[test]
fn criterion_2_three_region_gap_shape() {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let users = cfg.diversity.users_per_operator.values();
    assert_eq!(cfg.diversity.operators.values(), vec![3]);
    // Quotas for three equal operators on 512 subcarriers are (171, 171, 170).
    assert_eq!((users[0], *users.last().unwrap()), (1, 170));
    let rows = run_diversity_sweep(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let s = summarize(&rows);

    let first = &s[0];
    let last = s.last().unwrap();
    let peak = s[1..s.len() - 1].iter().max_by(|a, b| a.gap_mean.total_cmp(&b.gap_mean)).unwrap();
    // One-sided 95% test on the difference of independent trial means.
    let significant = |end: &shared_spectrum::harness::PointSummary| {
        peak.gap_mean - end.gap_mean > 1.645 * (peak.gap_se.powi(2) + end.gap_se.powi(2)).sqrt()
    };
    let ok = rows.iter().all(|r| r.status == Status::Ok) && significant(first) && significant(last) && secs < 600.0;
    let curve: Vec<String> =
        s.iter().map(|p| format!("K={}:{:.4}±{:.4}", p.users_per_operator.unwrap(), p.gap_mean, p.gap_se)).collect();
    let detail = format!(
        "interior peak K={} gap {:.4}; endpoints {:.4} and {:.4}; curve {}; {secs:.1} s",
        peak.users_per_operator.unwrap(),
        peak.gap_mean,
        first.gap_mean,
        last.gap_mean,
        curve.join(" ")
    );
    assert!(report(2, "gap peaks strictly inside the users-per-operator sweep", ok, &detail));
}

#[test]
fn criterion_3_branch_and_bound_matches_oracle() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig { trials: 20, record_wall_time: true, ..ExperimentConfig::default() };
    cfg.threads = 0;
    let io = &cfg.intraop;
    assert_eq!((io.users, io.ndc_users, io.subcarriers), (4, 2, 8));
    assert_eq!(io.dc_targets, vec![1.4, 1.6]);
    assert!(io.p_max_dbm.len() >= 5);
    let rows = run_intraop_experiment(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let mut ok = true;
    let (mut compared, mut infeasible, mut worst_rel, mut worst_excess, mut worst_oracle_s) = (0, 0, 0.0f64, f64::MIN, 0.0f64);
    for pair in rows.chunks(2) {
        let (o, b) = (&pair[0], &pair[1]);
        assert_eq!((o.scheme.as_str(), b.scheme.as_str()), ("oracle", "branch_and_bound"));
        assert_eq!((o.point, o.trial), (b.point, b.trial));
        match (o.status, b.status) {
            (Status::Ok, Status::Ok) => {
                let (ov, bv) = (o.value.unwrap(), b.value.unwrap());
                let rel = (ov - bv).abs() / ov.abs().max(1e-12);
                worst_rel = worst_rel.max(rel);
                worst_excess = worst_excess.max(bv - ov);
                worst_oracle_s = worst_oracle_s.max(o.wall_time_s.unwrap());
                ok &= rel <= 0.05 && bv <= ov + 1e-6 && o.nodes.unwrap() <= 65_536;
                compared += 1;
            }
            (Status::Infeasible, Status::Infeasible) => infeasible += 1,
            _ => ok = false,
        }
    }
    ok &= worst_oracle_s < 60.0 && compared >= 20;
    let detail = format!(
        "{compared} instances compared, {infeasible} infeasible on both; max relative gap {worst_rel:.2e}; \
         max excess over oracle {worst_excess:.2e}; slowest oracle {worst_oracle_s:.2} s; {secs:.1} s"
    );
    assert!(report(3, "branch-and-bound within 5% of exhaustive search", ok, &detail));
}

/// Feasible interval of `λ_t` under N1 to N4 with `c_t`, `p_t` fixed.
fn lambda_interval(inst: &IntraInstance, t: usize, c: f64, p: f64) -> (f64, f64) {
    let model = linearize(inst);
    let lam = model.var(VarKind::Lambda, t);
    let mut x = vec![0.0; model.n_vars()];
    x[model.var(VarKind::C, t)] = c;
    x[model.var(VarKind::P, t)] = p;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for con in model.linear_constraints() {
        let mine = matches!(con.tag,
            ConstraintTag::N1 { t: u } | ConstraintTag::N2 { t: u } | ConstraintTag::N3 { t: u } | ConstraintTag::N4 { t: u } if u == t);
        if !mine {
            continue;
        }
        let a = con.terms.iter().find(|(i, _)| *i == lam).unwrap().1;
        let rest: f64 = con.terms.iter().filter(|(i, _)| *i != lam).map(|(i, v)| v * x[*i]).sum();
        let bound = (con.rhs - rest) / a;
        match (con.sense, a > 0.0) {
            (Sense::Le, true) | (Sense::Ge, false) => hi = hi.min(bound),
            (Sense::Ge, true) | (Sense::Le, false) => lo = lo.max(bound),
            (Sense::Eq, _) => {
                lo = lo.max(bound);
                hi = hi.min(bound);
            }
        }
    }
    (lo, hi)
}

fn random_instance(rng: &mut ChaCha8Rng, k: usize, l: usize) -> IntraInstance {
    let gains = (0..k).map(|_| (0..l).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect()).collect();
    let k1 = rng.gen_range(1..=k);
    let targets = (0..k - k1).map(|_| rng.gen_range(0.0..1.5)).collect();
    build_instance(gains, k1, targets, rng.gen_range(0.5..5.0)).unwrap()
}

#[test]
fn criterion_4_linearization_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    // (a) (1 + p·h)^c = 1 + c·p·h for binary c, bit for bit.
    let mut identity_ok = true;
    for _ in 0..10_000 {
        let (p, h) = (rng.gen_range(0.0..10.0), 10f64.powf(rng.gen_range(-3.0..15.0)));
        for c in [0.0f64, 1.0] {
            identity_ok &= (1.0 + p * h).powf(c) == 1.0 + c * p * h;
        }
    }

    // (b) N1 to N4 pin λ to c·p.
    let inst = random_instance(&mut rng, 3, 4);
    let mut worst_pin = 0.0f64;
    for _ in 0..10_000 {
        let t = rng.gen_range(0..inst.n_tuples());
        let c = rng.gen_range(0..=1) as f64;
        let p = rng.gen_range(0.0..=inst.p_max());
        let (lo, hi) = lambda_interval(&inst, t, c, p);
        worst_pin = worst_pin.max((lo - c * p).abs()).max((hi - c * p).abs());
    }

    // (c) Sum rate, product of slacks and their geometric mean rank the
    // assignments identically.
    let mut ranked = 0;
    let mut argmax_ok = true;
    while ranked < 50 {
        let inst = random_instance(&mut rng, 2, 3);
        let table = oracle_table(&inst).unwrap();
        if table.iter().all(|(_, s)| s.is_none()) {
            continue;
        }
        let model = linearize(&inst);
        let m = inst.n_tuples();
        let mut scores: Vec<(usize, [f64; 3])> = Vec::new();
        for (idx, (owner, split)) in table.iter().enumerate() {
            let Some(split) = split else { continue };
            let mut c = vec![0.0; m];
            for (sc, &k) in owner.iter().enumerate() {
                c[inst.tuple(k, sc)] = 1.0;
            }
            let xi: Vec<f64> = (0..m).map(|t| 1.0 + c[t] * split.powers[t] * inst.gain_t(t)).collect();
            let x = model.pack(&c, &split.powers, &xi, &split.powers);
            let product: f64 = (0..m).filter(|&t| !inst.is_dc(inst.user_of(t))).map(|t| xi[t]).product();
            scores.push((idx, [split.objective, product, model.objective(&x)]));
        }
        let argmax = |j: usize| {
            let best = scores.iter().map(|s| s.1[j]).fold(f64::NEG_INFINITY, f64::max);
            scores.iter().find(|s| s.1[j] >= best * (1.0 - 1e-12)).unwrap().0
        };
        let winners = [argmax(0), argmax(1), argmax(2)];
        // Ties resolve to the same assignment only up to rounding, so compare
        // the other objectives at each winner.
        for &w in &winners {
            let at = scores.iter().find(|s| s.0 == w).unwrap().1;
            for j in 0..3 {
                let best = scores.iter().map(|s| s.1[j]).fold(f64::NEG_INFINITY, f64::max);
                argmax_ok &= at[j] >= best * (1.0 - 1e-9);
            }
        }
        let oracle = oracle_exhaustive(&inst).unwrap();
        argmax_ok &= (oracle.objective_ndc_sum_rate - scores.iter().find(|s| s.0 == winners[0]).unwrap().1[0]).abs() <= 1e-9;
        ranked += 1;
    }

    let ok = identity_ok && worst_pin <= 1e-9 && argmax_ok;
    let detail = format!(
        "binary identity exact: {identity_ok}; max |λ bound − c·p| over 10^4 samples {worst_pin:.1e}; \
         argmax agreement on {ranked} instances: {argmax_ok}"
    );
    assert!(report(4, "linearization exactness", ok, &detail));
}

/// Relative KKT residual of a max-rate split.
fn kkt_residual(gains: &[f64], powers: &[f64]) -> f64 {
    let active: Vec<usize> = (0..gains.len()).filter(|&i| powers[i] > 0.0).collect();
    if active.is_empty() {
        return 0.0;
    }
    let marginal = |i: usize| gains[i] / (1.0 + powers[i] * gains[i]);
    let nu = active.iter().map(|&i| marginal(i)).sum::<f64>() / active.len() as f64;
    let spread = active.iter().map(|&i| (marginal(i) - nu).abs() / nu).fold(0.0, f64::max);
    let idle = (0..gains.len()).filter(|i| !active.contains(i)).map(|i| ((gains[i] - nu) / nu).max(0.0)).fold(0.0, f64::max);
    spread.max(idle)
}

#[test]
fn criterion_5_feasibility_tolerances() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut solutions = 0;
    let mut worst = 0.0f64;
    let mut all_pass = true;
    let mut consistent = true;
    let check = |inst: &IntraInstance, worst: &mut f64, all_pass: &mut bool, consistent: &mut bool| {
        match (oracle_exhaustive(inst), branch_and_bound(&linearize(inst))) {
            (Ok(o), Ok(b)) => {
                for sol in [&o, &b] {
                    let r = check_solution(sol, inst);
                    *worst = worst.max(r.max_residual()).max(r.xi_violation).max(r.probe.residual_after);
                    *all_pass &= r.passes(1e-6);
                }
                2
            }
            (Err(IntraopError::Infeasible), Err(IntraopError::Infeasible)) => 0,
            _ => {
                *consistent = false;
                0
            }
        }
    };
    for _ in 0..200 {
        let k = rng.gen_range(1..=3);
        let l = rng.gen_range(1..=4);
        let inst = random_instance(&mut rng, k, l);
        solutions += check(&inst, &mut worst, &mut all_pass, &mut consistent);
    }
    let cfg = ExperimentConfig::default();
    for (trial, dbm) in [(0, -85.0), (1, -80.0), (2, -75.0), (3, -70.0), (4, -65.0)] {
        let inst = intraop_instance(&cfg, trial, dbm_to_watts(dbm)).unwrap();
        solutions += check(&inst, &mut worst, &mut all_pass, &mut consistent);
    }

    let (mut worst_budget, mut worst_kkt) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..64);
        let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-3.0..16.0))).collect();
        let budget = 10f64.powf(rng.gen_range(-15.0..1.0));
        let (p, _) = waterfill_level(&gains, budget);
        worst_budget = worst_budget.max((p.iter().sum::<f64>() - budget).abs() / budget);
        worst_kkt = worst_kkt.max(kkt_residual(&gains, &p));
    }

    let ok = all_pass && consistent && worst <= 1e-6 && worst_budget <= 1e-10 && worst_kkt <= 1e-8;
    let detail = format!(
        "{solutions} solutions, max residual {worst:.1e}, infeasibility consistent: {consistent}; \
         water-filling over 10^4 draws: budget error {worst_budget:.1e}, KKT residual {worst_kkt:.1e}; {:.1} s",
        start.elapsed().as_secs_f64()
    );
    assert!(report(5, "feasibility tolerances", ok, &detail));
}

#[test]
fn criterion_6_proportional_quotas() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst_excess, mut agreement_cases, mut agreement_ok, mut partitions_ok) = (f64::MIN, 0, true, true);
    for case in 0..1000 {
        let n = rng.gen_range(2..=6);
        let n_sub = rng.gen_range(16..=512);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let sum: f64 = w.iter().sum();
        let rho: Vec<f64> = w.iter().map(|x| x / sum).collect();
        let policy = SharingPolicy::new(rho.clone(), vec![None; n], vec![1; n]).unwrap();
        // Every fourth case puts all demands on one side of the entitlement.
        let delta: Vec<usize> = rho
            .iter()
            .map(|r| {
                let eta = r * n_sub as f64;
                match case % 4 {
                    0 => eta.ceil() as usize + rng.gen_range(0..100),
                    _ => rng.gen_range(1..=n_sub),
                }
            })
            .collect();
        let all_over = delta.iter().zip(&rho).all(|(&d, r)| d as f64 >= r * n_sub as f64);
        let all_under = delta.iter().zip(&rho).all(|(&d, r)| d as f64 <= r * n_sub as f64);
        let demand = DemandReport { delta, avg_snr: vec![1e12; n], p_max: vec![4.0; n] };
        let act = active_priorities(&policy, &demand, n_sub).unwrap();
        if all_over || all_under {
            agreement_cases += 1;
            agreement_ok &= act.rule == PriorityRule::Agreement && act.rho_act == rho;
        }

        let grid = GridSpec::contiguous(10e6, n_sub).unwrap();
        let ch = sample_channel(&grid, &ChannelProfile::default(), &vec![2; n], case as u64).unwrap();
        let gain = allocate_subcarrier_gain(&ch, &act).unwrap();
        partitions_ok &= gain.validate(&grid).is_ok();
        let mut allocations = vec![gain];
        if act.quota.iter().all(|&q| q > 0) {
            let frag = allocate_fragments(&act, &policy, &grid, case as u64, &mut ContentionMemory::default()).unwrap();
            partitions_ok &= frag.validate(&grid).is_ok();
            allocations.push(frag);
        }
        let r = &act.rho_act;
        for alloc in &allocations {
            let s = alloc.sizes();
            for i in 0..n {
                for j in 0..n {
                    let skew = (s[i] as f64 * r[j] - s[j] as f64 * r[i]).abs();
                    // Two subcarriers' worth: one rounding unit on each side.
                    worst_excess = worst_excess.max(skew - (r[i] + r[j]));
                }
            }
        }
    }
    let ok = worst_excess <= 1e-9 && agreement_ok && agreement_cases >= 250 && partitions_ok;
    let detail = format!(
        "1000 cases; max skew above slack {worst_excess:.2e}; same-side demands kept ρ in {agreement_cases} cases: \
         {agreement_ok}; partitions valid: {partitions_ok}"
    );
    assert!(report(6, "proportional quotas", ok, &detail));
}

#[test]
fn criterion_7_byte_identical_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "trials = 5\n[diversity]\nusers_per_operator = [1, 20, 170]\n[intraop]\nsubcarriers = 5\n")
        .unwrap();
    let cfg = cfg.to_str().unwrap();
    let mut identical = true;
    let mut sizes = Vec::new();
    for (sub, format) in [("interop", "csv"), ("diversity", "json"), ("intraop", "csv")] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{sub}-{run}.{format}"));
            let status = Command::new(env!("CARGO_BIN_EXE_spectrum-share"))
                .args([sub, "--config", cfg, "--seed", "42", "--format", format, "--out", out.to_str().unwrap()])
                .output()
                .unwrap();
            assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
            outputs.push(std::fs::read(&out).unwrap());
        }
        identical &= outputs[0] == outputs[1];
        sizes.push(format!("{sub}: {} bytes", outputs[0].len()));
    }
    // Library path with different worker counts.
    let mut a = ExperimentConfig { trials: 4, threads: 1, ..ExperimentConfig::default() };
    a.master_seed = 42;
    let b = ExperimentConfig { threads: 4, ..a.clone() };
    identical &= run_interop_sweep(&a).unwrap() == run_interop_sweep(&b).unwrap();

    let detail = format!("{}; thread count independent", sizes.join(", "));
    assert!(report(7, "byte-identical reruns", identical, &detail));
}
