//! Shared helpers for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use threelp::model::{idx, Vec23};

/// Random augmented state with every entry in a physically plausible box.
pub fn random_state(rng: &mut impl Rng) -> Vec23 {
    let mut q = Vec23::zeros();
    for i in 0..idx::D {
        let bound = match i {
            _ if idx::X.contains(&i) || idx::P.contains(&i) => 0.5,
            _ if idx::XDOT.contains(&i) => 1.0,
            _ if i == idx::F1X || i == idx::F1Y => 50.0,
            _ => 20.0,
        };
        q[i] = rng.random_range(-bound..=bound);
    }
    q[idx::D] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    q
}

pub fn random_states(seed: u64, n: usize) -> Vec<Vec23> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_state(&mut rng)).collect()
}

pub fn max_abs_diff(a: &Vec23, b: &Vec23) -> f64 {
    (a - b).amax()
}

/// Negates every lateral entry, the support side included.
pub fn mirror(q: &Vec23) -> Vec23 {
    let mut m = *q;
    for i in 0..q.len() {
        if idx::is_lateral(i) {
            m[i] = -m[i];
        }
    }
    m
}
