//! Enumeration of nondominated policies: the set of deterministic policies
//! that are optimal for at least one reward in the polytope.

mod approx;
mod brute;
mod gt;
mod witness;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{DeterministicPolicy, Mdp, OccupancyFrequency};
use crate::reward::{RewardPolytope, DEGENERATE_RADIUS};

pub use approx::{enumerate_approx_gt, ApproxSession};
pub use brute::{brute_force_nondominated, BRUTE_FORCE_LIMIT, DEFAULT_MARGIN};
pub use gt::{enumerate_gt, enumerate_gt_with, GtOptions};
pub use witness::{enumerate_pi_witness, enumerate_pi_witness_timed, find_witness_reward, WITNESS_EPS};

/// Canonical identity of a policy: the deterministic extraction of its
/// occupancy, so actions in unreachable states collapse to 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyKey(Vec<usize>);

impl PolicyKey {
    pub fn from_occupancy(f: &OccupancyFrequency, n_actions: usize) -> Self {
        PolicyKey(f.deterministic_policy(n_actions).into_actions())
    }

    pub fn new(actions: Vec<usize>) -> Self {
        PolicyKey(actions)
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NondominatedEntry {
    pub key: PolicyKey,
    pub policy: DeterministicPolicy,
    pub occupancy: OccupancyFrequency,
    /// Reward weights at which `policy` was found optimal.
    pub witness_w: Vec<f64>,
}

impl NondominatedEntry {
    pub fn new(mdp: &Mdp, policy: DeterministicPolicy, witness_w: Vec<f64>) -> Result<Self> {
        let occupancy = mdp.occupancy_of(&policy)?;
        Ok(Self::with_occupancy(mdp, policy, occupancy, witness_w))
    }

    pub fn with_occupancy(
        mdp: &Mdp,
        policy: DeterministicPolicy,
        occupancy: OccupancyFrequency,
        witness_w: Vec<f64>,
    ) -> Self {
        NondominatedEntry {
            key: PolicyKey::from_occupancy(&occupancy, mdp.n_actions()),
            policy,
            occupancy,
            witness_w,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnumStats {
    pub regions: usize,
    pub lp_count: usize,
    /// Wall-clock milliseconds; kept out of serialized dumps.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// The set Γ: entries in discovery order plus a key index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NondominatedSet {
    entries: Vec<NondominatedEntry>,
    index: HashMap<PolicyKey, usize>,
    pub stats: EnumStats,
}

impl NondominatedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = NondominatedEntry>) -> Self {
        let mut set = Self::new();
        for e in entries {
            set.insert(e);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[NondominatedEntry] {
        &self.entries
    }

    pub fn get(&self, key: &PolicyKey) -> Option<&NondominatedEntry> {
        self.index.get(key).map(|&i| &self.entries[i])
    }

    pub fn position(&self, key: &PolicyKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn contains(&self, key: &PolicyKey) -> bool {
        self.index.contains_key(key)
    }

    /// Inserts unless the key is present; returns whether it was new.
    pub fn insert(&mut self, entry: NondominatedEntry) -> bool {
        if self.index.contains_key(&entry.key) {
            return false;
        }
        self.index.insert(entry.key.clone(), self.entries.len());
        self.entries.push(entry);
        true
    }

    /// Keys in ascending order, for set comparisons.
    pub fn sorted_keys(&self) -> Vec<PolicyKey> {
        let mut keys: Vec<PolicyKey> = self.entries.iter().map(|e| e.key.clone()).collect();
        keys.sort();
        keys
    }

    /// A copy keeping only the first `k` entries.
    pub fn truncated(&self, k: usize) -> Self {
        Self::from_entries(self.entries.iter().take(k).cloned())
    }
}

/// Stopping rule for approximate traversal. Unset caps are unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    pub max_policies: Option<usize>,
    /// Number of completed lines.
    pub max_lines: Option<usize>,
    pub max_millis: Option<u64>,
    /// Consecutive lines that add nothing before stopping.
    pub stall_lines: Option<usize>,
}

impl EnumerationBudget {
    pub fn is_bounded(&self) -> bool {
        self.max_policies.is_some()
            || self.max_lines.is_some()
            || self.max_millis.is_some()
            || self.stall_lines.is_some()
    }
}

/// Minimum relative Bellman gap for a starting reward to count as generic.
const START_GAP: f64 = 1e-7;
const START_PROBES: usize = 32;
const START_SEED: u64 = 0x5eed_5eed;

/// Smallest gap `V(s) - Q(s, a)` over non-chosen actions, relative to the
/// value scale. Infinite with a single action.
pub(crate) fn bellman_gap(mdp: &Mdp, reward: &[f64], policy: &DeterministicPolicy, v: &[f64]) -> Result<f64> {
    let q = mdp.q_function(reward, v)?;
    let m = mdp.n_actions();
    let scale = 1.0 + reward.iter().fold(0.0_f64, |acc, r| acc.max(r.abs())) / (1.0 - mdp.gamma());
    let mut gap = f64::INFINITY;
    for s in 0..mdp.n_states() {
        for a in 0..m {
            if a != policy.action(s) {
                gap = gap.min(v[s] - q[s * m + a]);
            }
        }
    }
    Ok(gap / scale)
}

/// A starting reward strictly inside one optimality region.
///
/// The Chebyshev center is tried first. When it sits on a region boundary
/// (for linear reward maps every region is a cone through the origin, so a
/// polytope centered at the origin puts its center on all of them at once)
/// the start moves half the inscribed radius along fixed pseudo-random
/// directions until the optimal policy is strict.
pub(crate) fn generic_start(mdp: &Mdp, polytope: &RewardPolytope) -> Result<(Vec<f64>, DeterministicPolicy)> {
    let (center, radius) = polytope.chebyshev_center();
    if radius <= DEGENERATE_RADIUS {
        return Err(Error::DegeneratePolytope(radius));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(START_SEED);
    let mut best: Option<(f64, Vec<f64>, DeterministicPolicy)> = None;
    for probe in 0..=START_PROBES {
        let w = if probe == 0 {
            center.to_vec()
        } else {
            let u = random_direction(&mut rng, center.len());
            center.iter().zip(&u).map(|(c, x)| c + 0.5 * radius * x).collect()
        };
        let r = polytope.to_full_reward(&w)?;
        let (policy, v) = mdp.solve_optimal(&r)?;
        let gap = bellman_gap(mdp, &r, &policy, &v)?;
        if gap > START_GAP {
            return Ok((w, policy));
        }
        if best.as_ref().is_none_or(|(g, _, _)| gap > *g) {
            best = Some((gap, w, policy));
        }
    }
    let (_, w, policy) = best.expect("at least one probe");
    Ok((w, policy))
}

/// Uniform direction on the unit sphere.
pub(crate) fn random_direction<R: rand::Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let len = crate::reward::norm(&u);
        if len > 1e-12 {
            return u.into_iter().map(|x| x / len).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::tests::stay_switch;

    #[test]
    fn insert_is_first_writer_wins() {
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let a = NondominatedEntry::new(&mdp, DeterministicPolicy::new(vec![0, 1]), vec![1.0]).unwrap();
        let mut b = a.clone();
        b.witness_w = vec![2.0];
        let mut set = NondominatedSet::new();
        assert!(set.insert(a));
        assert!(!set.insert(b));
        assert_eq!(set.len(), 1);
        assert_eq!(set.entries()[0].witness_w, vec![1.0]);
    }

    #[test]
    fn unreachable_actions_collapse() {
        // from s0 with stay, s1 is never visited
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let a = NondominatedEntry::new(&mdp, DeterministicPolicy::new(vec![0, 0]), vec![]).unwrap();
        let b = NondominatedEntry::new(&mdp, DeterministicPolicy::new(vec![0, 1]), vec![]).unwrap();
        assert_eq!(a.key, b.key);
        assert_eq!(a.key.actions(), &[0, 0]);
    }

    #[test]
    fn budget_boundedness() {
        assert!(!EnumerationBudget::default().is_bounded());
        let b = EnumerationBudget {
            stall_lines: Some(3),
            ..Default::default()
        };
        assert!(b.is_bounded());
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        for dim in 1..5 {
            let u = random_direction(&mut rng, dim);
            assert!((crate::reward::norm(&u) - 1.0).abs() < 1e-12);
        }
    }
}
