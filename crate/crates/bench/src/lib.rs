//! Fixed inputs shared by the benchmarks.

use fairline_core::aoi::{self, RateSet};
use fairline_core::{Rng, Scenario, WindowVector};
use rand::{Rng as _, SeedableRng};

/// Windows spread across the default bounds.
pub fn sample_windows(n: usize) -> WindowVector {
    let step = if n > 1 { 130.0 / (n - 1) as f64 } else { 0.0 };
    WindowVector::new((0..n).map(|i| 20.0 + step * i as f64).collect())
}

/// The default scenario with `n` vehicles 4 m/s apart.
pub fn fleet(n: usize) -> Scenario {
    let speeds: Vec<f64> = (0..n).map(|i| 20.0 + 4.0 * i as f64).collect();
    Scenario::default_highway().with_lane_speeds(&speeds).expect("valid fleet")
}

pub fn fleet_rates(n: usize) -> RateSet {
    aoi::rate_set(&sample_windows(n), &fleet(n)).expect("feasible rates")
}

/// `n` points near the unit simplex in `m` dimensions, mostly nondominated.
pub fn random_front(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|x| x / sum).collect()
        })
        .collect()
}
