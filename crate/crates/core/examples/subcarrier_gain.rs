//! Phase 2 on a small grid, step by step, then the same allocation on the
//! reference grid compared with fragment sharing.

use shared_spectrum::channel::{sample_channel, ChannelProfile, ChannelRealization, GridSpec};
use shared_spectrum::interop::{
    active_priorities, allocate_fragments, allocate_subcarrier_gain, allocate_subcarrier_gain_traced,
    operator_throughput, ActivePriorities, ContentionMemory, DemandReport, PriorityRule, SharingPolicy,
};

fn main() {
    let table = vec![vec![vec![9.0, 1.0, 8.0, 2.0]], vec![vec![3.0, 7.0, 2.0, 6.0]]];
    let ch = ChannelRealization::from_table(table, 0).unwrap();
    let act = ActivePriorities::from_shares(vec![0.5, 0.5], 4, PriorityRule::Agreement);
    let (alloc, steps) = allocate_subcarrier_gain_traced(&ch, &act).unwrap();
    for s in &steps {
        println!("op {} user {} takes subcarrier {} (ratios {:?})", s.operator, s.user, s.subcarrier, s.ratios);
    }
    println!("sets {:?}\n", alloc.sets);

    let grid = GridSpec::default();
    let n = 4;
    let ch = sample_channel(&grid, &ChannelProfile::default(), &vec![20; n], 7).unwrap();
    let policy = SharingPolicy::equal(n).unwrap();
    let demand = DemandReport::overloaded(512, (0..n).map(|op| ch.mean_gain(op)).collect(), vec![4.0; n]);
    let act = active_priorities(&policy, &demand, 512).unwrap();
    let gain = allocate_subcarrier_gain(&ch, &act).unwrap();
    let frag = allocate_fragments(&act, &policy, &grid, 7, &mut ContentionMemory::default()).unwrap();
    for (name, a) in [("subcarrier gain", &gain), ("fragmentation", &frag)] {
        let t = operator_throughput(a, &ch, &vec![4.0; n]).unwrap();
        let per: Vec<String> = t.per_operator.iter().map(|x| format!("{x:.3}")).collect();
        println!("{name:>15}: total {:.4} bits/s/Hz, per operator [{}]", t.total, per.join(", "));
    }
}
