//! Fragment placement with end preferences and contention memory on a grid
//! split into two bands.

use shared_spectrum::channel::GridSpec;
use shared_spectrum::interop::{allocate_fragments, ActivePriorities, ContentionMemory, PriorityRule, SharingPolicy};

fn main() {
    // Two 5 MHz bands separated by a 2 MHz hole.
    let grid = GridSpec::build(10e6, 512, &[(0.0, 5e6), (7e6, 5e6)]).unwrap();
    let act = ActivePriorities::from_shares(vec![0.3, 0.3, 0.4], 512, PriorityRule::Agreement);
    // Operators 0 and 1 both want the low end; operator 2 wants the high end.
    let policy = SharingPolicy::equal(3)
        .unwrap()
        .with_preferences(vec![Some(0), Some(0), Some(1)])
        .unwrap()
        .with_min_fragment(vec![8, 8, 8])
        .unwrap();

    let mut memory = ContentionMemory::default();
    for period in 0..4u64 {
        let alloc = allocate_fragments(&act, &policy, &grid, 100 + period, &mut memory).unwrap();
        alloc.validate(&grid).unwrap();
        let runs: Vec<String> = alloc
            .fragments
            .iter()
            .enumerate()
            .map(|(op, f)| format!("op{op}: {:?}", f.iter().map(|r| (r.start, r.len)).collect::<Vec<_>>()))
            .collect();
        println!("period {period}: low-end winner {:?}; {}", memory.last_winner(0), runs.join("  "));
    }
}
