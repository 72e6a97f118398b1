#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stackgov_core::BimatrixGame;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn table(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect()
}

/// Continuous payoffs, so games are nondegenerate with probability one.
pub fn general_sum(rng: &mut ChaCha8Rng, max_dim: usize) -> BimatrixGame {
    let n = rng.gen_range(1..=max_dim);
    let m = rng.gen_range(1..=max_dim);
    BimatrixGame::maximizing(table(rng, n, m), table(rng, n, m)).unwrap()
}

pub fn zero_sum(rng: &mut ChaCha8Rng, max_dim: usize) -> BimatrixGame {
    let n = rng.gen_range(1..=max_dim);
    let m = rng.gen_range(1..=max_dim);
    BimatrixGame::zero_sum(table(rng, n, m)).unwrap()
}

/// Integer payoffs in `-3..=3`, which produce plenty of exact ties.
pub fn integer_game(rng: &mut ChaCha8Rng, max_dim: usize) -> BimatrixGame {
    let n = rng.gen_range(1..=max_dim);
    let m = rng.gen_range(1..=max_dim);
    let mut t = || (0..n).map(|_| (0..m).map(|_| f64::from(rng.gen_range(-3i32..=3))).collect()).collect();
    let a = t();
    let b = t();
    BimatrixGame::maximizing(a, b).unwrap()
}
