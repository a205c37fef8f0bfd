//! Reward optimality regions and the moves between them.
//!
//! For a fixed policy `π`, `V^π(w) = (I - γ T_π)^{-1} (Φ w)_π` is linear in the
//! reward weights, so each Bellman condition `Q^π(s, a) <= V^π(s)` is one
//! half-space in weight space. The intersection of those half-spaces is the
//! set of rewards under which `π` stays optimal.

use nalgebra::DMatrix;
use rand::Rng;

use crate::enumerate::random_direction;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::mdp::{dot, solve_matrix, DeterministicPolicy, Mdp};
use crate::reward::{norm, RewardPoint, RewardPolytope};

/// Normals shorter than this are dropped as vacuous.
pub const MIN_NORMAL: f64 = 1e-12;
/// Hyperplanes closer than this (normal and offset) are merged.
pub const DEDUP_TOL: f64 = 1e-9;
/// Line/hyperplane pairs with `|c^T u|` at or below this are parallel.
pub const PARALLEL_TOL: f64 = 1e-12;
/// Allowed Bellman slack of the anchor, relative to the value scale.
pub const ANCHOR_TOL: f64 = 1e-9;

/// The half-space `normal^T w <= offset`, with `‖normal‖ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
    /// The state-action pair whose Bellman condition produced it.
    pub tag: (usize, usize),
    /// Norm of the raw Bellman-slack row before normalization.
    pub scale: f64,
}

impl Hyperplane {
    /// Signed distance `normal^T w - offset`; positive means violated.
    pub fn eval(&self, w: &[f64]) -> f64 {
        dot(&self.normal, w) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRegion {
    pub hyperplanes: Vec<Hyperplane>,
    pub anchor: RewardPoint,
    pub policy: DeterministicPolicy,
}

impl OptRegion {
    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        self.hyperplanes.iter().all(|h| h.eval(w) <= tol)
    }
}

/// A point across one facet of a region, with its clearance from every other
/// constraint of the crossing LP.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentPoint {
    pub w: Vec<f64>,
    pub margin: f64,
}

/// Default facet-crossing offset: `1e-6 (1 + ‖b‖∞)`.
pub fn default_delta(polytope: &RewardPolytope) -> f64 {
    let b_inf = polytope.b().iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    1e-6 * (1.0 + b_inf)
}

/// Weight-space coefficients of `V^π`: row `s` of the `n × d` result dotted
/// with `w` gives `V^π(s)` under reward `Φ w`.
pub fn value_coefficients(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    policy: &DeterministicPolicy,
) -> Result<DMatrix<f64>> {
    let n = mdp.n_states();
    let d = polytope.dim();
    let rhs = DMatrix::from_fn(n, d, |s, k| {
        polytope.basis_row(mdp.pair(s, policy.action(s)))[k]
    });
    solve_matrix(&mdp.policy_system(policy), &rhs)
}

/// A Bellman-slack row tagged with its state-action pair.
pub type SlackRow = ((usize, usize), Vec<f64>);

/// Raw Bellman-slack rows `Q(s, a) - V(s)` as linear functions of `w`, one
/// per non-chosen action, in `(s, a)` order.
pub fn bellman_slack_rows(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    policy: &DeterministicPolicy,
) -> Result<Vec<SlackRow>> {
    let n = mdp.n_states();
    let d = polytope.dim();
    let x = value_coefficients(mdp, polytope, policy)?;
    let gamma = mdp.gamma();
    let mut rows = Vec::with_capacity(n * (mdp.n_actions() - 1));
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            if a == policy.action(s) {
                continue;
            }
            let phi = polytope.basis_row(mdp.pair(s, a));
            let t = mdp.transition_row(s, a);
            let c: Vec<f64> = (0..d)
                .map(|k| {
                    let expected: f64 = t.iter().enumerate().map(|(sp, p)| p * x[(sp, k)]).sum();
                    phi[k] + gamma * expected - x[(s, k)]
                })
                .collect();
            rows.push(((s, a), c));
        }
    }
    Ok(rows)
}

/// Half-spaces over `w` on which `policy` is optimal, anchored at `w`.
pub fn reward_opt_region(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    w: &[f64],
    policy: &DeterministicPolicy,
) -> Result<OptRegion> {
    if w.len() != polytope.dim() {
        return Err(Error::shape("reward weights", polytope.dim(), w.len()));
    }
    if polytope.n_pairs() != mdp.n_pairs() {
        return Err(Error::shape("basis rows", mdp.n_pairs(), polytope.n_pairs()));
    }
    let anchor = polytope.point(w.to_vec())?;
    let r_max = anchor.r.iter().fold(0.0_f64, |acc, r| acc.max(r.abs()));
    let tol = ANCHOR_TOL * (1.0 + r_max / (1.0 - mdp.gamma()));

    let mut hyperplanes: Vec<Hyperplane> = Vec::new();
    for (tag, c) in bellman_slack_rows(mdp, polytope, policy)? {
        let slack = dot(&c, w);
        if slack > tol {
            return Err(Error::PreconditionViolated(format!(
                "policy is not optimal at the anchor: action {} in state {} improves by {slack:e}",
                tag.1, tag.0
            )));
        }
        let scale = norm(&c);
        if scale < MIN_NORMAL {
            continue;
        }
        let normal: Vec<f64> = c.iter().map(|x| x / scale).collect();
        let duplicate = hyperplanes.iter().any(|h| {
            h.offset.abs() <= DEDUP_TOL
                && h.normal.iter().zip(&normal).all(|(p, q)| (p - q).abs() <= DEDUP_TOL)
        });
        if !duplicate {
            hyperplanes.push(Hyperplane {
                normal,
                offset: 0.0,
                tag,
                scale,
            });
        }
    }
    Ok(OptRegion {
        hyperplanes,
        anchor,
        policy: policy.clone(),
    })
}

/// Finds a reward across hyperplane `h` of `region`: inside the polytope,
/// inside every other half-space of the region, and at least `delta` past
/// `h`.
///
/// Among such points it returns the one on `normal_h^T w = offset_h + delta`
/// that is farthest from every other constraint, so the step lands just
/// across the middle of the shared facet rather than at one of its corners.
/// `None` means no part of the polytope lies across `h`.
pub fn adjacent_reward(
    region: &OptRegion,
    h: usize,
    polytope: &RewardPolytope,
    delta: f64,
) -> Result<Option<AdjacentPoint>> {
    let d = polytope.dim();
    let crossing = region
        .hyperplanes
        .get(h)
        .ok_or_else(|| Error::PreconditionViolated(format!("hyperplane index {h} out of range")))?;
    if delta <= 0.0 {
        return Err(Error::PreconditionViolated("delta must be positive".into()));
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for (row, &rhs) in polytope.rows().zip(polytope.b()) {
        let mut coeffs = row.to_vec();
        coeffs.push(norm(row));
        lp.le(coeffs, rhs);
    }
    for (i, other) in region.hyperplanes.iter().enumerate() {
        if i == h {
            continue;
        }
        let mut coeffs = other.normal.clone();
        coeffs.push(1.0);
        lp.le(coeffs, other.offset);
    }
    let mut coeffs = crossing.normal.clone();
    coeffs.push(0.0);
    lp.equal(coeffs, crossing.offset + delta);

    let out = solve_lp(&lp)?;
    match out.status {
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::LpNumericalFailure(
            "facet-crossing LP unbounded over a bounded polytope".into(),
        )),
        LpStatus::Optimal => {
            let mut w = out.solution.expect("optimal LP has a solution");
            let margin = w.pop().expect("margin variable");
            if margin < -crate::lp::FEASIBILITY_TOL {
                Ok(None)
            } else {
                Ok(Some(AdjacentPoint { w, margin }))
            }
        }
    }
}

/// Where a ray from inside a region first leaves it.
#[derive(Debug, Clone, PartialEq)]
pub enum Crossing {
    /// Crosses a region hyperplane at parameter `t`; `point` is `delta` beyond.
    Region { t: f64, point: Vec<f64> },
    /// Leaves the reward polytope first (or the step past the crossing does).
    LeavesPolytope,
    /// No region hyperplane ahead.
    Open,
}

impl Crossing {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            Crossing::Region { point, .. } => Some(point),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineCrossings {
    pub forward: Crossing,
    pub backward: Crossing,
}

fn line_parameters<'a>(
    planes: impl Iterator<Item = (&'a [f64], f64)>,
    origin: &[f64],
    direction: &[f64],
) -> (Option<f64>, Option<f64>) {
    let mut pos: Option<f64> = None;
    let mut neg: Option<f64> = None;
    for (normal, offset) in planes {
        let rate = dot(normal, direction);
        if rate.abs() <= PARALLEL_TOL {
            continue;
        }
        let t = (offset - dot(normal, origin)) / rate;
        if t > 0.0 {
            pos = Some(pos.map_or(t, |p| p.min(t)));
        } else if t < 0.0 {
            neg = Some(neg.map_or(t, |n| n.max(t)));
        }
    }
    (pos, neg)
}

/// Nearest region crossings along `origin + t direction` in both directions.
pub fn line_crossings(
    region: &OptRegion,
    polytope: &RewardPolytope,
    origin: &[f64],
    direction: &[f64],
    delta: f64,
) -> LineCrossings {
    let (t_pos, t_neg) = line_parameters(
        region
            .hyperplanes
            .iter()
            .map(|h| (h.normal.as_slice(), h.offset)),
        origin,
        direction,
    );
    let (r_pos, r_neg) = line_parameters(polytope.rows().zip(polytope.b().iter().copied()), origin, direction);

    let side = |t: Option<f64>, t_r: Option<f64>, step: f64| -> Crossing {
        let Some(t) = t else {
            return Crossing::Open;
        };
        if let Some(t_r) = t_r {
            if t_r.abs() < t.abs() {
                return Crossing::LeavesPolytope;
            }
        }
        let s = t + step;
        let point: Vec<f64> = origin.iter().zip(direction).map(|(o, u)| o + s * u).collect();
        if polytope.contains(&point, 0.0) {
            Crossing::Region { t, point }
        } else {
            Crossing::LeavesPolytope
        }
    };
    LineCrossings {
        forward: side(t_pos, r_pos, delta),
        backward: side(t_neg, r_neg, -delta),
    }
}

/// The (at most two) rewards just past the region boundary along a line.
pub fn line_exit_points(
    region: &OptRegion,
    polytope: &RewardPolytope,
    origin: &[f64],
    direction: &[f64],
    delta: f64,
) -> Vec<Vec<f64>> {
    let crossings = line_crossings(region, polytope, origin, direction, delta);
    [crossings.forward, crossings.backward]
        .into_iter()
        .filter_map(|c| match c {
            Crossing::Region { point, .. } => Some(point),
            _ => None,
        })
        .collect()
}

/// Hit-and-run samples from `region ∩ polytope`, started at `start`.
///
/// Each step picks a uniform direction and a uniform point on the chord
/// through the current point. A start slightly outside a constraint is
/// treated as lying on it.
pub fn sample_region<R: Rng + ?Sized>(
    region: &OptRegion,
    polytope: &RewardPolytope,
    start: &[f64],
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let rows = polytope
        .rows()
        .zip(polytope.b())
        .map(|(a, &b)| (a, b))
        .chain(region.hyperplanes.iter().map(|h| (h.normal.as_slice(), h.offset)));
    let rows: Vec<(&[f64], f64)> = rows.collect();
    let mut x = start.to_vec();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = random_direction(rng, x.len());
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (a, b) in &rows {
            let rate = dot(a, &u);
            let room = (b - dot(a, &x)).max(0.0);
            if rate > PARALLEL_TOL {
                hi = hi.min(room / rate);
            } else if rate < -PARALLEL_TOL {
                lo = lo.max(room / rate);
            }
        }
        if lo.is_finite() && hi.is_finite() && hi > lo {
            let t = rng.random_range(lo..=hi);
            x.iter_mut().zip(&u).for_each(|(xi, ui)| *xi += t * ui);
        }
        out.push(x.clone());
    }
    out
}
