#![allow(dead_code)]

use rumdp::instance::{generate, GenConfig, RumdpInstance};
use rumdp::mdp::{DeterministicPolicy, Mdp};

/// The small corpus: 2..=5 states, 2..=3 actions, 1..=3 reward dimensions.
pub fn small_corpus(count: u64) -> Vec<RumdpInstance> {
    (0..count)
        .map(|seed| {
            let n = 2 + (seed % 4) as usize;
            let m = 2 + (seed / 4 % 2) as usize;
            let d = 1 + (seed / 8 % 3) as usize;
            generate(&GenConfig::new(n, m, d, 1000 + seed)).unwrap()
        })
        .collect()
}

pub fn policy_from_index(mdp: &Mdp, mut index: usize) -> DeterministicPolicy {
    let m = mdp.n_actions();
    let actions = (0..mdp.n_states())
        .map(|_| {
            let a = index % m;
            index /= m;
            a
        })
        .collect();
    DeterministicPolicy::new(actions)
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}
