//! Workloads shared by the benchmarks.

use hypersep_core::{EngineConfig, Point, SeparationState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `count` points with integer coordinates in `[0, 1000)`.
pub fn integer_points(n: usize, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| Point::new(i as u64, (0..n).map(|_| rng.random_range(0..1000) as f64).collect())).collect()
}

pub fn solved(n: usize, count: usize, seed: u64) -> SeparationState {
    let mut s = SeparationState::new(n, EngineConfig::default(), seed).expect("valid config");
    let mut rng = s.next_rng();
    s.run(integer_points(n, count, seed), &mut rng).expect("random integer points separate");
    s
}
