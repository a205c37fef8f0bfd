//! Anytime traversal along random lines through the polytope.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::geometry::{default_delta, line_crossings, reward_opt_region, Crossing};
use crate::mdp::{DeterministicPolicy, Mdp};
use crate::reward::RewardPolytope;

use super::{random_direction, EnumerationBudget, NondominatedEntry, NondominatedSet};

/// Safety cap on regions crossed by one half-line.
const MAX_STEPS_PER_SIDE: usize = 100_000;

/// Incremental state of the line walker, so callers can inspect the set
/// between lines.
pub struct ApproxSession<'a> {
    mdp: &'a Mdp,
    polytope: &'a RewardPolytope,
    rng: Xoshiro256PlusPlus,
    delta: f64,
    set: NondominatedSet,
    lines: usize,
    stalled: usize,
    clock: Stopwatch,
}

impl<'a> ApproxSession<'a> {
    pub fn new(mdp: &'a Mdp, polytope: &'a RewardPolytope, seed: u64) -> Self {
        ApproxSession {
            mdp,
            polytope,
            rng: Xoshiro256PlusPlus::seed_from_u64(seed),
            delta: default_delta(polytope),
            set: NondominatedSet::new(),
            lines: 0,
            stalled: 0,
            clock: Stopwatch::start(),
        }
    }

    pub fn lines(&self) -> usize {
        self.lines
    }

    pub fn set(&self) -> &NondominatedSet {
        &self.set
    }

    pub fn into_set(mut self) -> NondominatedSet {
        self.set.stats.wall_ms = self.clock.elapsed_ms();
        self.set
    }

    pub fn elapsed_ms(&self) -> f64 {
        self.clock.elapsed_ms()
    }

    /// Whether any cap of `budget` has been reached.
    pub fn exhausted(&self, budget: &EnumerationBudget) -> bool {
        budget.max_lines.is_some_and(|cap| self.lines >= cap)
            || budget.stall_lines.is_some_and(|cap| self.stalled >= cap)
            || budget.max_policies.is_some_and(|cap| self.set.len() >= cap)
            || budget
                .max_millis
                .is_some_and(|cap| self.clock.elapsed_ms() >= cap as f64)
    }

    fn record(&mut self, policy: DeterministicPolicy, w: Vec<f64>) -> Result<usize> {
        let entry = NondominatedEntry::new(self.mdp, policy, w)?;
        Ok(usize::from(self.set.insert(entry)))
    }

    /// Walks one random line in both directions; returns how many new
    /// policies it added.
    pub fn walk_line(&mut self) -> Result<usize> {
        let start = self.polytope.sample_interior(&mut self.rng);
        let direction = random_direction(&mut self.rng, self.polytope.dim());
        let r = self.polytope.to_full_reward(&start)?;
        let (policy, _) = self.mdp.solve_optimal(&r)?;
        let mut added = self.record(policy.clone(), start.clone())?;

        let region = reward_opt_region(self.mdp, self.polytope, &start, &policy)?;
        self.set.stats.regions += 1;
        let first = line_crossings(&region, self.polytope, &start, &direction, self.delta);
        let backward: Vec<f64> = direction.iter().map(|x| -x).collect();
        added += self.walk(&policy, first.forward, &direction)?;
        added += self.walk(&policy, first.backward, &backward)?;

        self.lines += 1;
        if added == 0 {
            self.stalled += 1;
        } else {
            self.stalled = 0;
        }
        Ok(added)
    }

    /// Follows one half-line from its first crossing until it leaves the
    /// polytope. Each step moves strictly forward, by at least `delta`.
    fn walk(&mut self, from: &DeterministicPolicy, first: Crossing, direction: &[f64]) -> Result<usize> {
        let mut added = 0;
        let mut policy = from.clone();
        let mut crossing = first;
        for _ in 0..MAX_STEPS_PER_SIDE {
            let Crossing::Region { point, .. } = crossing else {
                break;
            };
            let r = self.polytope.to_full_reward(&point)?;
            let (next, _) = self.mdp.solve_optimal_from(&r, Some(&policy))?;
            added += self.record(next.clone(), point.clone())?;
            let region = reward_opt_region(self.mdp, self.polytope, &point, &next)?;
            self.set.stats.regions += 1;
            crossing = line_crossings(&region, self.polytope, &point, direction, self.delta).forward;
            policy = next;
        }
        Ok(added)
    }
}

/// Approximate traversal: random lines until the budget runs out. Hitting a
/// cap is a normal finish.
pub fn enumerate_approx_gt(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    budget: &EnumerationBudget,
    seed: u64,
) -> Result<NondominatedSet> {
    if !budget.is_bounded() {
        return Err(Error::PreconditionViolated(
            "approximate traversal needs at least one finite budget cap".into(),
        ));
    }
    let mut session = ApproxSession::new(mdp, polytope, seed);
    while !session.exhausted(budget) {
        session.walk_line()?;
    }
    Ok(session.into_set())
}
