//! Witness-based enumeration: grow Γ by searching, for each known policy and
//! each single-state action change, for a reward under which the changed
//! policy beats everything found so far.

use std::collections::VecDeque;

use crate::clock::Stopwatch;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::mdp::Mdp;
use crate::reward::RewardPolytope;

use super::{generic_start, NondominatedEntry, NondominatedSet, PolicyKey};

/// A witness must beat every known policy by more than this value margin.
pub const WITNESS_EPS: f64 = 1e-8;

enum Search {
    /// The local change is the policy itself or already in Γ.
    Skipped,
    NotFound,
    Found(Vec<f64>),
}

fn search(
    mdp: &Mdp,
    f: &NondominatedEntry,
    s: usize,
    a: usize,
    gamma_set: &NondominatedSet,
    projected: &[Vec<f64>],
    polytope: &RewardPolytope,
) -> Result<Search> {
    if a == f.policy.action(s) {
        return Ok(Search::Skipped);
    }
    let local = mdp.occupancy_of(&f.policy.with_action(s, a))?;
    if gamma_set.contains(&PolicyKey::from_occupancy(&local, mdp.n_actions())) {
        return Ok(Search::Skipped);
    }
    let p_local = polytope.project(&local);
    let d = polytope.dim();

    // maximize eps  s.t.  A w <= b,  (p_g - p_local)^T w + eps <= 0  for g in Γ
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for (row, &rhs) in polytope.rows().zip(polytope.b()) {
        let mut coeffs = row.to_vec();
        coeffs.push(0.0);
        lp.le(coeffs, rhs);
    }
    for p_g in projected {
        let mut coeffs: Vec<f64> = p_g.iter().zip(&p_local).map(|(g, l)| g - l).collect();
        coeffs.push(1.0);
        lp.le(coeffs, 0.0);
    }
    let out = solve_lp(&lp)?;
    match out.status {
        LpStatus::Optimal => {
            let mut w = out.solution.expect("optimal LP has a solution");
            let eps = w.pop().expect("margin variable");
            Ok(if eps > WITNESS_EPS {
                Search::Found(w)
            } else {
                Search::NotFound
            })
        }
        LpStatus::Infeasible => Err(Error::LpNumericalFailure(
            "witness LP infeasible over a nonempty polytope".into(),
        )),
        LpStatus::Unbounded => Err(Error::LpNumericalFailure(
            "witness LP unbounded over a bounded polytope".into(),
        )),
    }
}

/// Reward weights under which `f` with action `a` in state `s` beats every
/// policy in `gamma_set` by more than [`WITNESS_EPS`], if any exist.
pub fn find_witness_reward(
    mdp: &Mdp,
    f: &NondominatedEntry,
    s: usize,
    a: usize,
    gamma_set: &NondominatedSet,
    polytope: &RewardPolytope,
) -> Result<Option<Vec<f64>>> {
    if s >= mdp.n_states() || a >= mdp.n_actions() {
        return Err(Error::PreconditionViolated(format!(
            "state-action ({s}, {a}) out of range"
        )));
    }
    let projected: Vec<Vec<f64>> = gamma_set
        .entries()
        .iter()
        .map(|e| polytope.project(&e.occupancy))
        .collect();
    match search(mdp, f, s, a, gamma_set, &projected, polytope)? {
        Search::Found(w) => Ok(Some(w)),
        _ => Ok(None),
    }
}

/// Enumerates Γ by witness search with a FIFO agenda.
pub fn enumerate_pi_witness(mdp: &Mdp, polytope: &RewardPolytope) -> Result<NondominatedSet> {
    enumerate_pi_witness_timed(mdp, polytope, None)
}

/// As [`enumerate_pi_witness`], giving up with [`Error::BudgetExceeded`] once
/// `max_millis` has elapsed with work still queued.
pub fn enumerate_pi_witness_timed(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    max_millis: Option<u64>,
) -> Result<NondominatedSet> {
    let clock = Stopwatch::start();
    let (w0, pi0) = generic_start(mdp, polytope)?;
    let mut set = NondominatedSet::new();
    let first = NondominatedEntry::new(mdp, pi0, w0)?;
    let mut projected = vec![polytope.project(&first.occupancy)];
    set.insert(first);

    let mut agenda = VecDeque::from([0usize]);
    while let Some(i) = agenda.pop_front() {
        if max_millis.is_some_and(|cap| clock.elapsed_ms() > cap as f64) {
            set.stats.wall_ms = clock.elapsed_ms();
            return Err(Error::BudgetExceeded {
                partial: Box::new(set),
            });
        }
        let f = set.entries()[i].clone();
        set.stats.regions += 1;
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                loop {
                    let found = search(mdp, &f, s, a, &set, &projected, polytope)?;
                    let w = match found {
                        Search::Skipped => break,
                        Search::NotFound => {
                            set.stats.lp_count += 1;
                            break;
                        }
                        Search::Found(w) => {
                            set.stats.lp_count += 1;
                            w
                        }
                    };
                    let r = polytope.to_full_reward(&w)?;
                    let (policy, _) = mdp.solve_optimal(&r)?;
                    let entry = NondominatedEntry::new(mdp, policy, w)?;
                    let p = polytope.project(&entry.occupancy);
                    if !set.insert(entry) {
                        break;
                    }
                    projected.push(p);
                    agenda.push_back(set.len() - 1);
                }
            }
        }
    }
    set.stats.wall_ms = clock.elapsed_ms();
    Ok(set)
}
