use super::*;

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

fn hand_instance() -> IntraInstance {
    build_instance(vec![vec![1.0, 4.0], vec![3.0, 1.0]], 1, vec![1.0], 2.0).unwrap()
}

#[test]
fn power_split_hand_enumeration() {
    let inst = hand_instance();
    // DC user 1 on subcarrier 0 needs (2^2 - 1)/3 = 1 W; NDC fills 1 W on h = 4.
    let best = oracle_power_split(&[1, 0], &inst).unwrap().unwrap();
    assert!((best.objective - 5f64.log2()).abs() < 1e-12);
    assert!((best.powers[inst.tuple(1, 0)] - 1.0).abs() < 1e-12);
    assert!((best.powers[inst.tuple(0, 1)] - 1.0).abs() < 1e-12);
    // DC user with nothing cannot meet a positive target.
    assert_eq!(oracle_power_split(&[0, 0], &inst).unwrap(), None);
    // DC on h = 1 needs 3 W > 2 W.
    assert_eq!(oracle_power_split(&[0, 1], &inst).unwrap(), None);
    // Both subcarriers to DC: NDC rate 0 but feasible.
    assert_eq!(oracle_power_split(&[1, 1], &inst).unwrap().unwrap().objective, 0.0);

    let sol = oracle_exhaustive(&inst).unwrap();
    assert_eq!(sol.owners().unwrap(), vec![1, 0]);
    assert!((sol.objective_ndc_sum_rate - 5f64.log2()).abs() < 1e-12);
    assert_eq!(sol.solver_stats.nodes, 4);
}

#[test]
fn power_split_without_dc_is_waterfilling() {
    let inst = build_instance(vec![vec![2.0, 1.0, 0.5]], 1, vec![], 1.0).unwrap();
    let split = oracle_power_split(&[0, 0, 0], &inst).unwrap().unwrap();
    let wf = waterfill_max_rate(&[2.0, 1.0, 0.5], 1.0);
    assert_eq!(split.powers, wf);
    let sol = oracle_exhaustive(&inst).unwrap();
    assert!((sol.objective_ndc_sum_rate - total_rate(&[2.0, 1.0, 0.5], &wf)).abs() < 1e-12);
}

#[test]
fn power_split_rejects_bad_assignment() {
    let inst = hand_instance();
    assert!(oracle_power_split(&[0], &inst).is_err());
    assert!(oracle_power_split(&[0, 2], &inst).is_err());
}

#[test]
fn oracle_size_guard() {
    let inst = build_instance(vec![vec![1.0; 10]; 4], 4, vec![], 1.0).unwrap();
    assert!(matches!(oracle_exhaustive(&inst), Err(IntraopError::TooLarge { .. })));
}

#[test]
fn bnb_two_by_two_all_to_ndc() {
    let inst = build_instance(vec![vec![1.0, 1.0], vec![1.0, 1.0]], 1, vec![0.0], 2.0).unwrap();
    let sol = branch_and_bound(&linearize(&inst)).unwrap();
    assert_eq!(sol.c, vec![vec![1, 1], vec![0, 0]]);
    assert!((sol.p[0][0] - 1.0).abs() < 1e-6 && (sol.p[0][1] - 1.0).abs() < 1e-6);
    assert!((sol.objective_ndc_sum_rate - 2.0).abs() < 1e-6);
    assert!(sol.objective_ndc_sum_rate <= 2.0 + 1e-9);
}

#[test]
fn bnb_hand_instance_matches_oracle() {
    let inst = hand_instance();
    let report = branch_and_bound_with(&linearize(&inst), &BnbOptions { trace: true, ..Default::default() }).unwrap();
    let sol = &report.solution;
    assert_eq!(sol.owners().unwrap(), vec![1, 0]);
    assert!((sol.objective_ndc_sum_rate - 5f64.log2()).abs() < 1e-6);
    assert!(sol.objective_ndc_sum_rate <= 5f64.log2() + 1e-9);
    assert!(report.root_bound >= sol.objective_ndc_sum_rate);
    assert!(check_solution(sol, &inst).passes(1e-6));
    assert_eq!(report.trace[0].node, 0);
    assert_eq!(report.trace.len(), sol.solver_stats.nodes);
}

#[test]
fn infeasible_instances_are_reported() {
    let zero_power = build_instance(vec![vec![1.0, 1.0], vec![1.0, 1.0]], 1, vec![1.0], 0.0).unwrap();
    assert_eq!(branch_and_bound(&linearize(&zero_power)), Err(IntraopError::Infeasible));
    assert_eq!(oracle_exhaustive(&zero_power), Err(IntraopError::Infeasible));
    let fixed = vec![Fix::Free; 4];
    assert_eq!(solve_relaxation(&linearize(&zero_power), &fixed, 1e-6).unwrap(), Relaxation::Infeasible);

    // Passes the quick check (each DC user alone fits) but not jointly on two subcarriers.
    let tight = build_instance(vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]], 1, vec![1.5, 1.5], 7.0).unwrap();
    assert_eq!(branch_and_bound(&linearize(&tight)), Err(IntraopError::Infeasible));
    assert_eq!(oracle_exhaustive(&tight), Err(IntraopError::Infeasible));
}

#[test]
fn relaxation_with_all_c_fixed_matches_power_split() {
    let inst = build_instance(
        vec![vec![2.0, 0.5, 1.0, 3.0], vec![1.0, 2.5, 0.7, 0.4], vec![0.9, 1.1, 2.2, 1.3]],
        2,
        vec![0.3],
        3.0,
    )
    .unwrap();
    let model = linearize(&inst);
    for owner in [[0, 1, 2, 0], [2, 2, 0, 1], [1, 0, 2, 2]] {
        let mut fixed = vec![Fix::Zero; inst.n_tuples()];
        for (sc, &k) in owner.iter().enumerate() {
            fixed[inst.tuple(k, sc)] = Fix::One;
        }
        let oracle = oracle_power_split(&owner, &inst).unwrap().unwrap();
        match solve_relaxation(&model, &fixed, 1e-6).unwrap() {
            Relaxation::Solved(r) => {
                assert!(
                    ((r.objective_bits - oracle.objective) / oracle.objective).abs() < 1e-4,
                    "{owner:?}: {} vs {}",
                    r.objective_bits,
                    oracle.objective
                );
                assert!(r.objective_bits <= oracle.objective + 1e-9);
                assert!(r.bound_bits >= oracle.objective - 1e-9);
            }
            Relaxation::Infeasible => panic!("{owner:?} should be feasible"),
        }
    }
}

#[test]
fn relaxation_dominates_binary_optimum() {
    let inst = build_instance(vec![vec![1.0, 2.0, 0.5], vec![0.3, 1.5, 2.0]], 2, vec![], 1.0).unwrap();
    let model = linearize(&inst);
    let best = oracle_exhaustive(&inst).unwrap().objective_ndc_sum_rate;
    match solve_relaxation(&model, &[Fix::Free; 6], 1e-6).unwrap() {
        Relaxation::Solved(r) => {
            assert!(r.bound_bits >= best);
            assert!(r.duality_gap_bits() <= 1e-6);
            assert!(r.geometric_mean(6) >= 1.0);
        }
        Relaxation::Infeasible => panic!("relaxation is feasible"),
    }
}

#[test]
fn relaxation_propagates_single_candidates() {
    let inst = build_instance(vec![vec![1.0, 1.0], vec![1.0, 1.0]], 1, vec![0.2], 1.0).unwrap();
    let model = linearize(&inst);
    let fixed = vec![Fix::Zero, Fix::Free, Fix::Free, Fix::One];
    let Relaxation::Solved(r) = solve_relaxation(&model, &fixed, 1e-6).unwrap() else {
        panic!("feasible")
    };
    assert_eq!(r.fixings, vec![Fix::Zero, Fix::Zero, Fix::One, Fix::One]);
    assert_eq!(r.c, vec![0.0, 0.0, 1.0, 1.0]);
    let all_zero = vec![Fix::Zero, Fix::Free, Fix::Zero, Fix::Free];
    assert_eq!(solve_relaxation(&model, &all_zero, 1e-6).unwrap(), Relaxation::Infeasible);
}

#[test]
fn check_flags_inflated_power() {
    let inst = hand_instance();
    let mut sol = oracle_exhaustive(&inst).unwrap();
    let clean = check_solution(&sol, &inst);
    assert!(clean.max_residual() <= 1e-9, "{clean:?}");
    assert!(clean.probe.improves_or_keeps());
    sol.p[0][1] += 0.5;
    let report = check_solution(&sol, &inst);
    assert!(report.c4_budget > 0.4);
    assert!(report.lambda_exactness > 0.4);
    assert!(!report.passes(1e-6));
}

#[test]
fn check_reports_slack_gap_and_probe() {
    let inst = hand_instance();
    let mut sol = oracle_exhaustive(&inst).unwrap();
    sol.xi[0][1] -= 0.25;
    let report = check_solution(&sol, &inst);
    assert!((report.xi_gap[0][1] + 0.25).abs() < 1e-12);
    assert_eq!(report.xi_violation, 0.0);
    assert!(report.probe.after_bits > report.probe.before_bits);
    assert!(report.probe.residual_after <= 1e-12);
    assert!((report.probe.after_bits - log2_1p(4.0)).abs() < 1e-12);
}

#[test]
fn single_user_oracle_is_waterfilling() {
    let gains = vec![0.7, 1.9, 0.2, 5.0, 1.1];
    let inst = build_instance(vec![gains.clone()], 1, vec![], 2.5).unwrap();
    let sol = oracle_exhaustive(&inst).unwrap();
    let wf = waterfill_max_rate(&gains, 2.5);
    assert!((sol.objective_ndc_sum_rate - total_rate(&gains, &wf)).abs() < 1e-12);
    let bnb = branch_and_bound(&linearize(&inst)).unwrap();
    assert!((bnb.objective_ndc_sum_rate - sol.objective_ndc_sum_rate).abs() < 1e-6);
}
