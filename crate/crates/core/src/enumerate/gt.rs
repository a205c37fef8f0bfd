//! Exact geometric traversal: breadth-first over adjacent optimality regions.

use std::collections::HashSet;

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::geometry::{adjacent_reward, default_delta, reward_opt_region};
use crate::mdp::{DeterministicPolicy, Mdp, OccupancyFrequency};
use crate::par::Pool;
use crate::reward::RewardPolytope;

use super::{generic_start, NondominatedEntry, NondominatedSet};

/// A facet is crossed only when the crossing point clears every other
/// constraint by more than this fraction of `delta`; thinner contacts are
/// lower-dimensional and lead nowhere new.
const MIN_MARGIN_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct GtOptions {
    /// Worker threads for region expansion; 1 (or 0 without the `parallel`
    /// feature) runs inline, 0 uses the global pool.
    pub threads: usize,
    /// Facet-crossing offset; defaults to [`default_delta`].
    pub delta: Option<f64>,
    pub max_policies: Option<usize>,
    pub max_millis: Option<u64>,
}

impl GtOptions {
    pub fn single_threaded() -> Self {
        GtOptions {
            threads: 1,
            ..Default::default()
        }
    }
}

struct Neighbor {
    policy: DeterministicPolicy,
    occupancy: OccupancyFrequency,
    w: Vec<f64>,
}

struct Expansion {
    neighbors: Vec<Neighbor>,
    lps: usize,
}

fn expand(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    policy: &DeterministicPolicy,
    w: &[f64],
    delta: f64,
) -> Result<Expansion> {
    let region = reward_opt_region(mdp, polytope, w, policy)?;
    let mut neighbors = Vec::new();
    for h in 0..region.hyperplanes.len() {
        let Some(point) = adjacent_reward(&region, h, polytope, delta)? else {
            continue;
        };
        if point.margin <= MIN_MARGIN_FRACTION * delta {
            continue;
        }
        let r = polytope.to_full_reward(&point.w)?;
        let (next, _) = mdp.solve_optimal_from(&r, Some(policy))?;
        if &next == policy {
            continue;
        }
        let occupancy = mdp.occupancy_of(&next)?;
        neighbors.push(Neighbor {
            policy: next,
            occupancy,
            w: point.w,
        });
    }
    Ok(Expansion {
        neighbors,
        lps: region.hyperplanes.len(),
    })
}

/// All nondominated policies whose optimality region has interior within
/// the polytope, single-threaded with default settings.
pub fn enumerate_gt(mdp: &Mdp, polytope: &RewardPolytope) -> Result<NondominatedSet> {
    enumerate_gt_with(mdp, polytope, &GtOptions::single_threaded())
}

/// Geometric traversal with explicit options.
///
/// Regions are expanded layer by layer; within a layer the expansions may run
/// in parallel, but results are merged in agenda order, so the output is the
/// same for every thread count.
pub fn enumerate_gt_with(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    opts: &GtOptions,
) -> Result<NondominatedSet> {
    let clock = Stopwatch::start();
    let delta = opts.delta.unwrap_or_else(|| default_delta(polytope));
    if delta <= 0.0 {
        return Err(Error::PreconditionViolated("delta must be positive".into()));
    }
    let pool = Pool::new(opts.threads);

    let (w0, pi0) = generic_start(mdp, polytope)?;
    let mut set = NondominatedSet::new();
    let mut visited: HashSet<DeterministicPolicy> = HashSet::new();
    visited.insert(pi0.clone());
    set.insert(NondominatedEntry::new(mdp, pi0.clone(), w0.clone())?);

    let mut layer = vec![(pi0, w0)];
    while !layer.is_empty() {
        let results = pool.map(&layer, |(pi, w)| expand(mdp, polytope, pi, w, delta));
        let mut next = Vec::new();
        for result in results {
            let expansion = result?;
            set.stats.regions += 1;
            set.stats.lp_count += expansion.lps;
            for nb in expansion.neighbors {
                if !visited.insert(nb.policy.clone()) {
                    continue;
                }
                next.push((nb.policy.clone(), nb.w.clone()));
                set.insert(NondominatedEntry::with_occupancy(
                    mdp,
                    nb.policy,
                    nb.occupancy,
                    nb.w,
                ));
            }
        }
        let over_count = opts.max_policies.is_some_and(|cap| set.len() > cap);
        let over_time = opts
            .max_millis
            .is_some_and(|cap| clock.elapsed_ms() > cap as f64);
        if (over_count || over_time) && !next.is_empty() {
            set.stats.wall_ms = clock.elapsed_ms();
            return Err(Error::BudgetExceeded {
                partial: Box::new(set),
            });
        }
        layer = next;
    }
    set.stats.wall_ms = clock.elapsed_ms();
    Ok(set)
}
