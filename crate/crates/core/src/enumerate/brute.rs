//! Exhaustive oracle: test every deterministic policy for strict optimality
//! somewhere in the polytope.

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::mdp::{DeterministicPolicy, Mdp};
use crate::reward::RewardPolytope;

use super::{NondominatedEntry, NondominatedSet};

pub const BRUTE_FORCE_LIMIT: usize = 100_000;
pub const DEFAULT_MARGIN: f64 = 1e-8;

/// Keeps each policy whose value beats every other distinct policy by more
/// than `margin` at some reward in the polytope.
pub fn brute_force_nondominated(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    margin: f64,
) -> Result<NondominatedSet> {
    let clock = Stopwatch::start();
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let count = (m as f64).powi(n as i32);
    if count > BRUTE_FORCE_LIMIT as f64 {
        return Err(Error::InstanceTooLarge {
            policies: count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    // Distinct occupancies, in lexicographic policy order.
    let mut candidates = NondominatedSet::new();
    let mut actions = vec![0usize; n];
    loop {
        let policy = DeterministicPolicy::new(actions.clone());
        candidates.insert(NondominatedEntry::new(mdp, policy, Vec::new())?);
        let Some(s) = (0..n).rev().find(|&s| actions[s] + 1 < m) else {
            break;
        };
        actions[s] += 1;
        actions[s + 1..].iter_mut().for_each(|x| *x = 0);
    }
    let projected: Vec<Vec<f64>> = candidates
        .entries()
        .iter()
        .map(|e| polytope.project(&e.occupancy))
        .collect();

    let d = polytope.dim();
    let mut out = NondominatedSet::new();
    for (i, entry) in candidates.entries().iter().enumerate() {
        // maximize eps  s.t.  A w <= b,  (p_j - p_i)^T w + eps <= 0  for j != i
        let mut objective = vec![0.0; d + 1];
        objective[d] = 1.0;
        let mut lp = LinearProgram::new(Sense::Maximize, objective);
        for (row, &rhs) in polytope.rows().zip(polytope.b()) {
            let mut coeffs = row.to_vec();
            coeffs.push(0.0);
            lp.le(coeffs, rhs);
        }
        for (j, p_j) in projected.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut coeffs: Vec<f64> = p_j.iter().zip(&projected[i]).map(|(a, b)| a - b).collect();
            coeffs.push(1.0);
            lp.le(coeffs, 0.0);
        }
        let result = solve_lp(&lp)?;
        out.stats.lp_count += 1;
        match result.status {
            LpStatus::Optimal => {
                let mut w = result.solution.expect("optimal LP has a solution");
                let eps = w.pop().expect("margin variable");
                if eps > margin {
                    let policy = DeterministicPolicy::new(entry.key.actions().to_vec());
                    out.insert(NondominatedEntry {
                        key: entry.key.clone(),
                        policy,
                        occupancy: entry.occupancy.clone(),
                        witness_w: w,
                    });
                }
            }
            LpStatus::Infeasible => return Err(Error::InfeasiblePolytope),
            LpStatus::Unbounded if candidates.len() == 1 => {
                // no competitor: the only policy is optimal everywhere
                let w = polytope.chebyshev_center().0.to_vec();
                out.insert(NondominatedEntry {
                    witness_w: w,
                    ..entry.clone()
                });
            }
            LpStatus::Unbounded => {
                return Err(Error::LpNumericalFailure(
                    "brute-force LP unbounded over a bounded polytope".into(),
                ))
            }
        }
    }
    out.stats.regions = candidates.len();
    out.stats.wall_ms = clock.elapsed_ms();
    Ok(out)
}
