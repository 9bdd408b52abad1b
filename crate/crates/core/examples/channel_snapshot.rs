//! One fading snapshot on the reference grid: per-subcarrier gains and the
//! rate each user would get at an equal power split.

use shared_spectrum::channel::{sample_channel, subcarrier_rate, ChannelProfile, GridSpec};

fn main() {
    let grid = GridSpec::default();
    let profile = ChannelProfile::default();
    println!("{} subcarriers, spacing {:.2} Hz", grid.n_subcarriers(), grid.spacing());
    println!("tap delays (us): {:?}", profile.path_delays().iter().map(|d| d * 1e6).collect::<Vec<_>>());

    let ch = sample_channel(&grid, &profile, &[2, 3], 2024).expect("valid inputs");
    let p_per_sc = 4.0 / grid.n_subcarriers() as f64;
    for op in 0..ch.n_operators() {
        for user in 0..ch.n_users(op) {
            let g = ch.user_gains(op, user);
            let (lo, hi) = g.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
            let rate: f64 = g.iter().map(|&h| subcarrier_rate(p_per_sc, h)).sum::<f64>() / g.len() as f64;
            println!("op {op} user {user}: gain {lo:.3e}..{hi:.3e} /W, {rate:.2} bits/s/Hz at equal split");
        }
    }
    println!("operator 0 mean gain {:.3e} /W", ch.mean_gain(0));
}
