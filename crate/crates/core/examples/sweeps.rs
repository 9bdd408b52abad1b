//! Small versions of the three experiments through the harness, printed as
//! per-point summaries. `cargo run --release --example sweeps`.

use shared_spectrum::harness::{
    run_diversity_sweep, run_interop_sweep, run_intraop_experiment, summarize, CountOrList, ExperimentConfig,
};

fn main() {
    let mut cfg = ExperimentConfig { trials: 10, ..ExperimentConfig::default() };
    cfg.diversity.users_per_operator = CountOrList::Many(vec![1, 5, 20, 80, 170]);
    cfg.intraop.subcarriers = 6;

    let runs = [
        ("operators", run_interop_sweep(&cfg).unwrap()),
        ("users per operator", run_diversity_sweep(&cfg).unwrap()),
        ("P_max", run_intraop_experiment(&cfg).unwrap()),
    ];
    for (axis, rows) in runs {
        println!("sweep over {axis}:");
        for p in summarize(&rows) {
            let x = p.operators.map(|n| format!("N={n}")).unwrap_or_default()
                + &p.users_per_operator.map(|k| format!(" K={k}")).unwrap_or_default()
                + &p.p_max_dbm.map(|d| format!("{d} dBm")).unwrap_or_default();
            let schemes: Vec<String> = p.schemes.iter().map(|(s, m, _)| format!("{s} {m:.4}")).collect();
            println!("  {x:>12}: {} | gap {:.4} ± {:.4}", schemes.join(", "), p.gap_mean, p.gap_se);
        }
    }
}
