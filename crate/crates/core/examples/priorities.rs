//! Phase 1: how demands turn agreed weights into active priorities and quotas.

use shared_spectrum::interop::{active_priorities, compute_demand, DemandReport, SharingPolicy};

fn main() {
    let n_sub = 512;
    let policy = SharingPolicy::equal(3).unwrap();

    // Demand from a rate target at an average SNR per watt.
    let avg_snr = 5e13;
    for target in [10.0, 200.0, 5000.0, 1e6] {
        let d = compute_demand(target, 4.0, avg_snr, n_sub);
        println!("target {target:>9} bits/s/Hz -> {} subcarriers (overloaded: {})", d.subcarriers, d.overloaded);
    }

    for delta in [vec![300, 400, 512], vec![100, 120, 90], vec![100, 300, 250], vec![100, 200, 150]] {
        let demand = DemandReport { delta: delta.clone(), avg_snr: vec![avg_snr; 3], p_max: vec![4.0; 3] };
        let act = active_priorities(&policy, &demand, n_sub).unwrap();
        let rho: Vec<String> = act.rho_act.iter().map(|r| format!("{r:.4}")).collect();
        println!("demands {delta:?}: {:?} rho_act [{}] quotas {:?}", act.rule, rho.join(", "), act.quota);
    }
}
