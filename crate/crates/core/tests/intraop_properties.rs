use proptest::prelude::*;
use shared_spectrum::intraop::{
    branch_and_bound, build_instance, check_solution, linearize, oracle_exhaustive, oracle_table, waterfill_level,
    waterfill_min_power, ConstraintTag, IntraInstance, IntraopError, Sense, VarKind,
};

fn instance(max_users: usize, max_subcarriers: usize) -> impl Strategy<Value = IntraInstance> {
    (1..=max_users, 1..=max_subcarriers)
        .prop_flat_map(|(k, l)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.05f64..20.0, l), k),
                1..=k,
                proptest::collection::vec(0.0f64..1.2, k),
                0.5f64..8.0,
            )
        })
        .prop_map(|(gains, k1, targets, p)| {
            let k = gains.len();
            build_instance(gains, k1, targets[..k - k1].to_vec(), p).unwrap()
        })
}

/// Relative KKT residual of a max-rate split: active channels share the
/// marginal `h/(1+p·h)`, idle ones have `h` no larger than it.
fn kkt_residual(gains: &[f64], powers: &[f64]) -> f64 {
    let active: Vec<usize> = (0..gains.len()).filter(|&i| powers[i] > 0.0).collect();
    if active.is_empty() {
        return 0.0;
    }
    let marginal = |i: usize| gains[i] / (1.0 + powers[i] * gains[i]);
    let nu = active.iter().map(|&i| marginal(i)).sum::<f64>() / active.len() as f64;
    let spread = active.iter().map(|&i| (marginal(i) - nu).abs() / nu).fold(0.0, f64::max);
    let idle = (0..gains.len())
        .filter(|i| !active.contains(i))
        .map(|i| ((gains[i] - nu) / nu).max(0.0))
        .fold(0.0, f64::max);
    spread.max(idle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn waterfilling_conserves_budget_and_meets_kkt(
        gains in proptest::collection::vec(1e-3f64..1e3, 1..40),
        budget in 1e-4f64..1e3,
    ) {
        let (p, level) = waterfill_level(&gains, budget);
        let used: f64 = p.iter().sum();
        prop_assert!((used - budget).abs() <= 1e-10 * budget, "used {} of {}", used, budget);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!(kkt_residual(&gains, &p) <= 1e-8);
        for (h, x) in gains.iter().zip(&p) {
            if *x > 0.0 {
                prop_assert!((x + 1.0 / h - level).abs() <= 1e-9 * level);
            }
        }
    }

    #[test]
    fn min_power_meets_rate_and_kkt(
        gains in proptest::collection::vec(1e-2f64..1e3, 1..20),
        bits in 0.01f64..40.0,
    ) {
        let p = waterfill_min_power(&gains, bits);
        let rate: f64 = gains.iter().zip(&p).map(|(h, x)| (1.0 + x * h).log2()).sum();
        prop_assert!((rate - bits).abs() <= 1e-9 * bits.max(1.0), "{} vs {}", rate, bits);
        prop_assert!(kkt_residual(&gains, &p) <= 1e-8);
    }

    #[test]
    fn solver_outputs_pass_the_checker(inst in instance(3, 4)) {
        let oracle = oracle_exhaustive(&inst);
        let bnb = branch_and_bound(&linearize(&inst));
        match (oracle, bnb) {
            (Ok(o), Ok(b)) => {
                for sol in [&o, &b] {
                    let report = check_solution(sol, &inst);
                    prop_assert!(report.passes(1e-6), "{:?}", report);
                    prop_assert!(report.objective_mismatch <= 1e-9);
                    prop_assert!(report.probe.improves_or_keeps());
                }
                let scale = o.objective_ndc_sum_rate.abs().max(1.0);
                prop_assert!(b.objective_ndc_sum_rate <= o.objective_ndc_sum_rate + 1e-6);
                prop_assert!((o.objective_ndc_sum_rate - b.objective_ndc_sum_rate) / scale <= 1e-6);
            }
            (Err(IntraopError::Infeasible), Err(IntraopError::Infeasible)) => {}
            (o, b) => prop_assert!(false, "oracle {:?} vs bnb {:?}", o.err(), b.err()),
        }
    }

    #[test]
    fn mccormick_rows_pin_lambda(
        inst in instance(2, 3),
        c in 0u8..=1,
        frac in 0.0f64..=1.0,
    ) {
        let model = linearize(&inst);
        let pm = inst.p_max();
        let p = frac * pm;
        let t = 0;
        let lam = model.var(VarKind::Lambda, t);
        let mut x = vec![0.0; model.n_vars()];
        x[model.var(VarKind::C, t)] = c as f64;
        x[model.var(VarKind::P, t)] = p;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for con in model.linear_constraints() {
            let mine = matches!(con.tag,
                ConstraintTag::N1 { t: u } | ConstraintTag::N2 { t: u } | ConstraintTag::N3 { t: u } | ConstraintTag::N4 { t: u } if u == t);
            if !mine {
                continue;
            }
            let a = con.terms.iter().find(|(i, _)| *i == lam).map(|(_, a)| *a).unwrap();
            let rest: f64 = con.terms.iter().filter(|(i, _)| *i != lam).map(|(i, v)| v * x[*i]).sum();
            let bound = (con.rhs - rest) / a;
            match (con.sense, a > 0.0) {
                (Sense::Le, true) | (Sense::Ge, false) => hi = hi.min(bound),
                (Sense::Ge, true) | (Sense::Le, false) => lo = lo.max(bound),
                (Sense::Eq, _) => { lo = lo.max(bound); hi = hi.min(bound); }
            }
        }
        let target = c as f64 * p;
        prop_assert!(hi - lo <= 1e-9, "interval [{}, {}]", lo, hi);
        prop_assert!((lo - target).abs() <= 1e-9 && (hi - target).abs() <= 1e-9);
    }

    #[test]
    fn oracle_picks_the_table_maximum(inst in instance(2, 3)) {
        let table = oracle_table(&inst).unwrap();
        let best = table.iter().filter_map(|(_, s)| s.as_ref().map(|s| s.objective)).fold(f64::NEG_INFINITY, f64::max);
        match oracle_exhaustive(&inst) {
            Ok(sol) => prop_assert!((sol.objective_ndc_sum_rate - best).abs() <= 1e-9 * best.abs().max(1.0)),
            Err(e) => {
                prop_assert_eq!(e, IntraopError::Infeasible);
                prop_assert!(best == f64::NEG_INFINITY);
            }
        }
    }
}
