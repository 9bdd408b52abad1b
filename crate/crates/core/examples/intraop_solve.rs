//! One intra-operator instance: linearized model, branch-and-bound with a
//! node trace, the exhaustive oracle, and the solution checker.

use shared_spectrum::harness::{dbm_to_watts, intraop_instance, ExperimentConfig};
use shared_spectrum::intraop::{branch_and_bound_with, check_solution, linearize, oracle_exhaustive, BnbOptions};

fn main() {
    let cfg = ExperimentConfig::default();
    let inst = intraop_instance(&cfg, 0, dbm_to_watts(-75.0)).unwrap();
    let model = linearize(&inst);
    println!(
        "{} users ({} NDC) x {} subcarriers, P = {:.3e} W, {} linear rows",
        inst.n_users(),
        inst.n_ndc(),
        inst.n_subcarriers(),
        inst.p_max(),
        model.linear_constraints().len()
    );

    let report = branch_and_bound_with(&model, &BnbOptions { trace: true, ..BnbOptions::default() }).unwrap();
    let sol = &report.solution;
    println!(
        "branch-and-bound: {:.6} bits/s/Hz, root bound {:.3}, {} nodes, {} Newton steps",
        sol.objective_ndc_sum_rate, report.root_bound, sol.solver_stats.nodes, sol.solver_stats.relaxation_iterations
    );
    for n in report.trace.iter().take(5) {
        println!("  node {} depth {} bound {:?} {}", n.node, n.depth, n.bound, n.status.as_str());
    }
    println!("owners {:?}", sol.owners().unwrap());

    let oracle = oracle_exhaustive(&inst).unwrap();
    println!("oracle: {:.6} bits/s/Hz over {} assignments", oracle.objective_ndc_sum_rate, oracle.solver_stats.nodes);

    let check = check_solution(sol, &inst);
    println!("max residual {:.2e}, passes 1e-6: {}", check.max_residual(), check.passes(1e-6));
}
