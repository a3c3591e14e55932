#![allow(dead_code)]

use eve_core::{index_of_primitivity, sa_operator, Policy, SAOperator, TabularMDP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random deterministic MDP that is primitive under every strictly positive policy.
pub fn random_mdp(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> TabularMDP {
    loop {
        let ns = rng.random_range(1..=max_states);
        let na = rng.random_range(1..=max_actions);
        let next: Vec<usize> = (0..ns * na).map(|_| rng.random_range(0..ns)).collect();
        let mdp = TabularMDP::new(ns, na, next, 0).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(ns, na)).unwrap();
        if index_of_primitivity(op.matrix()).is_ok() {
            return mdp;
        }
    }
}

pub fn random_policy(rng: &mut ChaCha8Rng, ns: usize, na: usize) -> Policy {
    let w: Vec<f64> = (0..ns * na).map(|_| rng.random_range(0.05..1.0)).collect();
    Policy::from_weights(ns, na, w).unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> SAOperator {
    let mdp = random_mdp(rng, max_states, max_actions);
    let pi0 = random_policy(rng, mdp.n_states(), mdp.n_actions());
    sa_operator(&mdp, &pi0).unwrap()
}

pub fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.1f64..10.0)).collect()
}
