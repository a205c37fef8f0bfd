//! Minimax regret over a set of nondominated policies.
//!
//! The regret of an occupancy `f` is `max_{w in R, g in Γ} (Φw)^T (g - f)`.
//! Every LP here runs in weight space, with occupancies projected through
//! `Φ^T`.

use crate::clock::Stopwatch;
use crate::enumerate::{NondominatedSet, PolicyKey};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::mdp::{dot, Mdp, OccupancyFrequency};
use crate::reward::RewardPolytope;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_ITERATION_CAP: usize = 10_000;
/// Weights at or below this are left out of a solution's support.
pub const SUPPORT_TOL: f64 = 1e-9;

/// How a solution was expressed by its solver.
#[derive(Debug, Clone, PartialEq)]
pub enum Mixture {
    /// Convex weights over the solving set, in entry order.
    Weights(Vec<f64>),
    /// A bare occupancy frequency from constraint generation.
    Occupancy(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialPair {
    /// Position of `g` in the set it was drawn from.
    pub index: usize,
    pub g: OccupancyFrequency,
    pub r_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretSolution {
    pub regret: f64,
    pub mixture: Mixture,
    /// The occupancy the solution plays: `Σ c_i g_i` or the master LP's `f`.
    pub occupancy: Vec<f64>,
    /// Policies with weight above [`SUPPORT_TOL`]. For constraint generation
    /// these come from projecting `f` onto the hull of Γ.
    pub support: Vec<(PolicyKey, f64)>,
    /// Weight-space distance (L1) between `f` and its support mixture.
    pub support_residual: f64,
    pub gen_pairs: Vec<AdversarialPair>,
    pub iterations: usize,
    pub lp_count: usize,
    pub wall_ms: f64,
}

fn adversary_lp(polytope: &RewardPolytope, direction: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut lp = LinearProgram::new(Sense::Maximize, direction.to_vec());
    for (row, &rhs) in polytope.rows().zip(polytope.b()) {
        lp.le(row.to_vec(), rhs);
    }
    let out = solve_lp(&lp)?;
    match out.status {
        LpStatus::Optimal => Ok((
            out.solution.expect("optimal LP has a solution"),
            out.objective_value.expect("optimal LP has a value"),
        )),
        LpStatus::Infeasible => Err(Error::InfeasiblePolytope),
        LpStatus::Unbounded => Err(Error::UnboundedPolytope),
    }
}

fn max_regret_counted(
    f: &[f64],
    gamma_set: &NondominatedSet,
    polytope: &RewardPolytope,
    lp_count: &mut usize,
) -> Result<(AdversarialPair, f64)> {
    if gamma_set.is_empty() {
        return Err(Error::EmptyGamma);
    }
    if f.len() != polytope.n_pairs() {
        return Err(Error::shape("occupancy", polytope.n_pairs(), f.len()));
    }
    let p_f = polytope.project(f);
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (i, entry) in gamma_set.entries().iter().enumerate() {
        let p_g = polytope.project(&entry.occupancy);
        let direction: Vec<f64> = p_g.iter().zip(&p_f).map(|(g, f)| g - f).collect();
        let (w, value) = adversary_lp(polytope, &direction)?;
        *lp_count += 1;
        if best.as_ref().is_none_or(|(_, _, v)| value > *v) {
            best = Some((i, w, value));
        }
    }
    let (index, r_w, value) = best.expect("nonempty set");
    Ok((
        AdversarialPair {
            index,
            g: gamma_set.entries()[index].occupancy.clone(),
            r_w,
        },
        value,
    ))
}

/// The worst-case regret of playing `f`, with the adversary that attains it.
/// Ties go to the lowest Γ index.
pub fn max_regret(
    f: &[f64],
    gamma_set: &NondominatedSet,
    polytope: &RewardPolytope,
) -> Result<(AdversarialPair, f64)> {
    max_regret_counted(f, gamma_set, polytope, &mut 0)
}

/// `Σ c_i g_i` over the entries of `gamma_set`.
pub fn mix_occupancies(weights: &[f64], gamma_set: &NondominatedSet) -> Result<Vec<f64>> {
    if weights.len() != gamma_set.len() {
        return Err(Error::shape("mixture weights", gamma_set.len(), weights.len()));
    }
    let n_pairs = gamma_set.entries().first().map_or(0, |e| e.occupancy.len());
    let mut f = vec![0.0; n_pairs];
    for (c, entry) in weights.iter().zip(gamma_set.entries()) {
        for (x, g) in f.iter_mut().zip(entry.occupancy.iter()) {
            *x += c * g;
        }
    }
    Ok(f)
}

/// Max regret of an occupancy against `gamma_set`.
pub fn evaluate_regret(f: &[f64], gamma_set: &NondominatedSet, polytope: &RewardPolytope) -> Result<f64> {
    max_regret(f, gamma_set, polytope).map(|(_, v)| v)
}

impl RegretSolution {
    /// Regret of this solution's occupancy against a (possibly larger) set.
    pub fn evaluate(&self, gamma_set: &NondominatedSet, polytope: &RewardPolytope) -> Result<f64> {
        evaluate_regret(&self.occupancy, gamma_set, polytope)
    }
}

fn support_of(weights: &[f64], gamma_set: &NondominatedSet) -> Vec<(PolicyKey, f64)> {
    weights
        .iter()
        .zip(gamma_set.entries())
        .filter(|(c, _)| **c > SUPPORT_TOL)
        .map(|(c, e)| (e.key.clone(), *c))
        .collect()
}

/// Minimax regret as one LP over convex weights on Γ.
///
/// Variables are the weights `c`, the regret `δ`, and per-policy dual
/// multipliers `z_i >= 0` of the adversary's LP: minimize `δ` subject to
/// `Σ c = 1`, `δ >= b^T z_i`, and `A^T z_i + P c = p_i`, where `P` holds the
/// projected occupancies `p_i = Φ^T g_i` as columns.
pub fn solve_xu_mannor(polytope: &RewardPolytope, gamma_set: &NondominatedSet) -> Result<RegretSolution> {
    let clock = Stopwatch::start();
    if gamma_set.is_empty() {
        return Err(Error::EmptyGamma);
    }
    let k = gamma_set.len();
    let d = polytope.dim();
    let q = polytope.n_rows();
    let projected: Vec<Vec<f64>> = gamma_set
        .entries()
        .iter()
        .map(|e| polytope.project(&e.occupancy))
        .collect();

    let n_vars = k + 1 + k * q;
    let delta = k;
    let z = |i: usize, row: usize| k + 1 + i * q + row;
    let mut objective = vec![0.0; n_vars];
    objective[delta] = 1.0;
    let mut lp = LinearProgram::new(Sense::Minimize, objective);
    for j in 0..n_vars {
        if j != delta {
            lp.nonnegative(j);
        }
    }
    let mut sum = vec![0.0; n_vars];
    sum[..k].iter_mut().for_each(|x| *x = 1.0);
    lp.equal(sum, 1.0);
    for (i, p_i) in projected.iter().enumerate() {
        let mut row = vec![0.0; n_vars];
        row[delta] = 1.0;
        for (r, b) in polytope.b().iter().enumerate() {
            row[z(i, r)] = -b;
        }
        lp.ge(row, 0.0);
        for j in 0..d {
            let mut row = vec![0.0; n_vars];
            for (r, a) in polytope.rows().enumerate() {
                row[z(i, r)] = a[j];
            }
            for (l, p_l) in projected.iter().enumerate() {
                row[l] = p_l[j];
            }
            lp.equal(row, p_i[j]);
        }
    }
    let out = solve_lp(&lp)?;
    if out.status != LpStatus::Optimal {
        return Err(Error::LpNumericalFailure(format!(
            "minimax regret LP reported {:?}",
            out.status
        )));
    }
    let x = out.solution.expect("optimal LP has a solution");
    let mut weights: Vec<f64> = x[..k].iter().map(|c| c.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|c| *c /= total);
    let occupancy = mix_occupancies(&weights, gamma_set)?;
    Ok(RegretSolution {
        regret: x[delta],
        support: support_of(&weights, gamma_set),
        support_residual: 0.0,
        mixture: Mixture::Weights(weights),
        occupancy,
        gen_pairs: Vec::new(),
        iterations: 1,
        lp_count: 1,
        wall_ms: clock.elapsed_ms(),
    })
}

/// Convex weights over Γ whose projected mixture is L1-closest to `p_f`.
fn decompose(p_f: &[f64], projected: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let k = projected.len();
    let d = p_f.len();
    // variables: c (k), e_plus (d), e_minus (d)
    let n_vars = k + 2 * d;
    let mut objective = vec![0.0; n_vars];
    objective[k..].iter_mut().for_each(|x| *x = 1.0);
    let mut lp = LinearProgram::new(Sense::Minimize, objective);
    for j in 0..n_vars {
        lp.nonnegative(j);
    }
    let mut sum = vec![0.0; n_vars];
    sum[..k].iter_mut().for_each(|x| *x = 1.0);
    lp.equal(sum, 1.0);
    for j in 0..d {
        let mut row = vec![0.0; n_vars];
        for (l, p) in projected.iter().enumerate() {
            row[l] = p[j];
        }
        row[k + j] = 1.0;
        row[k + d + j] = -1.0;
        lp.equal(row, p_f[j]);
    }
    let out = solve_lp(&lp)?;
    match (out.status, out.solution, out.objective_value) {
        (LpStatus::Optimal, Some(x), Some(residual)) => {
            let mut weights: Vec<f64> = x[..k].iter().map(|c| c.max(0.0)).collect();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|c| *c /= total);
            Ok((weights, residual))
        }
        (status, _, _) => Err(Error::LpNumericalFailure(format!(
            "mixture decomposition LP reported {status:?}"
        ))),
    }
}

/// Master LP: minimize `δ` over occupancies `f >= 0` with
/// `Σ_a f(s', a) - γ Σ_{s,a} T(s, a, s') f(s, a) = α(s')` and one regret cut
/// `r_i^T g_i - r_i^T f <= δ` per generated pair.
fn master(mdp: &Mdp, cuts: &[(Vec<f64>, f64)]) -> Result<(Vec<f64>, f64)> {
    let nm = mdp.n_pairs();
    let n = mdp.n_states();
    let m = mdp.n_actions();
    let delta = nm;
    let mut objective = vec![0.0; nm + 1];
    objective[delta] = 1.0;
    let mut lp = LinearProgram::new(Sense::Minimize, objective);
    for j in 0..nm {
        lp.nonnegative(j);
    }
    for s_next in 0..n {
        let mut row = vec![0.0; nm + 1];
        for s in 0..n {
            for a in 0..m {
                let pair = mdp.pair(s, a);
                let stay = if s == s_next { 1.0 } else { 0.0 };
                row[pair] = stay - mdp.gamma() * mdp.transition_row(s, a)[s_next];
            }
        }
        lp.equal(row, mdp.alpha()[s_next]);
    }
    for (r, value) in cuts {
        let mut row: Vec<f64> = r.iter().map(|x| -x).collect();
        row.push(-1.0);
        lp.le(row, -value);
    }
    let out = solve_lp(&lp)?;
    match (out.status, out.solution) {
        (LpStatus::Optimal, Some(mut x)) => {
            let d = x.pop().expect("delta variable");
            Ok((x, d))
        }
        (status, _) => Err(Error::LpNumericalFailure(format!(
            "constraint generation master LP reported {status:?}"
        ))),
    }
}

/// Minimax regret by constraint generation with the default iteration cap.
pub fn solve_icg_nd(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    gamma_set: &NondominatedSet,
    tol: f64,
) -> Result<RegretSolution> {
    solve_icg_nd_capped(mdp, polytope, gamma_set, tol, DEFAULT_ITERATION_CAP)
}

/// Alternates the master LP with the adversary search until the adversary's
/// regret exceeds the master's `δ` by at most `tol`.
pub fn solve_icg_nd_capped(
    mdp: &Mdp,
    polytope: &RewardPolytope,
    gamma_set: &NondominatedSet,
    tol: f64,
    max_iterations: usize,
) -> Result<RegretSolution> {
    let clock = Stopwatch::start();
    if gamma_set.is_empty() {
        return Err(Error::EmptyGamma);
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::PreconditionViolated("tolerance must be positive".into()));
    }
    if mdp.n_pairs() != polytope.n_pairs() {
        return Err(Error::shape("basis rows", mdp.n_pairs(), polytope.n_pairs()));
    }

    // Seed with the best policy of Γ at the Chebyshev center.
    let center = polytope.chebyshev_center().0.to_vec();
    let r_center = polytope.to_full_reward(&center)?;
    let seed = gamma_set
        .entries()
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, e)| {
            let v = dot(&r_center, &e.occupancy);
            match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((i, v)),
            }
        })
        .expect("nonempty set");
    let mut gen_pairs = vec![AdversarialPair {
        index: seed.0,
        g: gamma_set.entries()[seed.0].occupancy.clone(),
        r_w: center,
    }];
    let mut cuts = vec![(r_center, seed.1)];

    let mut lp_count = 0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (f, delta) = master(mdp, &cuts)?;
        lp_count += 1;
        let (pair, regret) = max_regret_counted(&f, gamma_set, polytope, &mut lp_count)?;
        let done = regret <= delta + tol;
        if done || iterations >= max_iterations {
            let projected: Vec<Vec<f64>> = gamma_set
                .entries()
                .iter()
                .map(|e| polytope.project(&e.occupancy))
                .collect();
            let (weights, residual) = decompose(&polytope.project(&f), &projected)?;
            lp_count += 1;
            let solution = RegretSolution {
                regret: delta.max(0.0),
                support: support_of(&weights, gamma_set),
                support_residual: residual,
                mixture: Mixture::Occupancy(f.clone()),
                occupancy: f,
                gen_pairs,
                iterations,
                lp_count,
                wall_ms: clock.elapsed_ms(),
            };
            if done {
                return Ok(solution);
            }
            return Err(Error::IterationCap {
                best: Box::new(solution),
            });
        }
        let r = polytope.to_full_reward(&pair.r_w)?;
        let value = dot(&r, &pair.g);
        cuts.push((r, value));
        gen_pairs.push(pair);
    }
}
