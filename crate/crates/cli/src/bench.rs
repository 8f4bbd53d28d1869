//! Water-filling solver micro-benchmark.

use std::hint::black_box;
use std::time::Instant;

use eirp_core::waterfill::{allocate, PowerUser, RateCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Timing of `allocate` at one user count.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub users: usize,
    pub median_ns: f64,
    pub p90_ns: f64,
    pub allocs_per_sec: f64,
}

/// A random slot-sized instance: PRB counts up to 50, gains over 30 dB,
/// noise over 20 dB, budget strictly between the minimum and maximum
/// spends.
pub fn random_instance(n: usize, rng: &mut impl Rng) -> (Vec<PowerUser>, f64) {
    let users: Vec<PowerUser> = (0..n)
        .map(|id| {
            let p_max = 0.73;
            PowerUser {
                ue_id: id,
                num_prbs: rng.gen_range(1..=50),
                max_gain: 10f64.powf(rng.gen_range(0.0..3.0)),
                rate: RateCurve::new(1.2e5, 1e-3 * 10f64.powf(-rng.gen_range(0.0..2.0))),
                p_min: p_max * rng.gen_range(1e-3..0.1),
                p_max,
            }
        })
        .collect();
    let lo: f64 = users.iter().map(|u| u.cost() * u.p_min).sum();
    let hi: f64 = users.iter().map(|u| u.cost() * u.p_max).sum();
    let b = lo + rng.gen_range(0.05..0.95) * (hi - lo);
    (users, b)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

/// Times `iters` solves on fresh random instances of `users` users.
pub fn bench_users(users: usize, iters: usize, seed: u64) -> BenchRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances: Vec<_> = (0..iters).map(|_| random_instance(users, &mut rng)).collect();
    let mut times = Vec::with_capacity(iters);
    let total = Instant::now();
    for (u, b) in &instances {
        let t = Instant::now();
        let a = allocate(black_box(u), black_box(*b), 1.0);
        times.push(t.elapsed().as_nanos() as f64);
        black_box(a.ok());
    }
    let wall = total.elapsed().as_secs_f64();
    times.sort_by(f64::total_cmp);
    BenchRow {
        users,
        median_ns: percentile(&times, 0.5),
        p90_ns: percentile(&times, 0.9),
        allocs_per_sec: iters as f64 / wall,
    }
}

pub fn bench_table(max_users: usize, iters: usize) -> Vec<BenchRow> {
    (1..=max_users).map(|n| bench_users(n, iters, n as u64)).collect()
}
