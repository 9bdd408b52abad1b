//! Water-filling for maximum rate under a budget and for minimum power under a
//! rate target.

use shared_spectrum::intraop::{total_rate, waterfill_level, waterfill_min_power};

fn main() {
    let gains = [8.0, 4.0, 1.0, 0.25];
    for budget in [0.1, 1.0, 5.0] {
        let (p, level) = waterfill_level(&gains, budget);
        println!("budget {budget}: level {level:.4}, powers {p:.4?}, rate {:.4} bits", total_rate(&gains, &p));
    }
    for bits in [1.0, 4.0, 10.0] {
        let p = waterfill_min_power(&gains, bits);
        println!("target {bits} bits: power {:.4} W, powers {p:.4?}", p.iter().sum::<f64>());
    }
}
