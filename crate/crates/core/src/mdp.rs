//! Finite discounted MDPs with the reward held separately.
//!
//! State-action pairs are laid out row-major: pair `(s, a)` lives at index
//! `s * n_actions + a` in every `nm`-length vector (rewards, Q-functions,
//! occupancy frequencies) and the transition kernel is stored as `nm` rows
//! of length `n`.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability rows and the initial distribution must sum to one within this.
pub const STOCHASTIC_TOL: f64 = 1e-9;
/// Actions whose Q-value is within this of the maximum count as tied.
pub const TIE_TOL: f64 = 1e-9;
/// States with less occupancy mass than this are treated as unreachable.
pub const ZERO_MASS: f64 = 1e-12;

const MAX_POLICY_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    alpha: Vec<f64>,
    gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeterministicPolicy(Vec<usize>);

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        DeterministicPolicy(actions)
    }

    pub fn uniform(n_states: usize, action: usize) -> Self {
        DeterministicPolicy(vec![action; n_states])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub fn into_actions(self) -> Vec<usize> {
        self.0
    }

    /// The same policy with the action in state `s` replaced by `a`.
    pub fn with_action(&self, s: usize, a: usize) -> Self {
        let mut actions = self.0.clone();
        actions[s] = a;
        DeterministicPolicy(actions)
    }
}

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                $name(values)
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

real_vector!(
    /// Expected discounted return from each start state.
    ValueFunction
);
real_vector!(
    /// Action values indexed by state-action pair.
    QFunction
);
real_vector!(
    /// Discounted state-action visitation mass induced by a policy and the
    /// initial distribution.
    OccupancyFrequency
);

impl Mdp {
    /// Builds an MDP after checking that every transition row and `alpha`
    /// are probability vectors and that `0 <= gamma < 1`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        alpha: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp(
                "state and action counts must be positive".into(),
            ));
        }
        let nm = n_states * n_actions;
        if transition.len() != nm * n_states {
            return Err(Error::shape("transition", nm * n_states, transition.len()));
        }
        if alpha.len() != n_states {
            return Err(Error::shape("alpha", n_states, alpha.len()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidMdp(format!(
                "discount {gamma} outside [0, 1)"
            )));
        }
        for (row_idx, row) in transition.chunks(n_states).enumerate() {
            check_distribution(row).map_err(|msg| {
                Error::InvalidMdp(format!(
                    "transition row (s={}, a={}): {msg}",
                    row_idx / n_actions,
                    row_idx % n_actions
                ))
            })?;
        }
        check_distribution(&alpha).map_err(|msg| Error::InvalidMdp(format!("alpha: {msg}")))?;
        Ok(Mdp {
            n_states,
            n_actions,
            transition,
            alpha,
            gamma,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    #[inline]
    pub fn pair(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// `T(s, a, ·)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = self.pair(s, a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    /// Generalized `E` over all state-action pairs, `nm × n`:
    /// `E(sa, s') = T(s, a, s') - [s = s'] / gamma`.
    pub fn build_e_matrix(&self) -> Result<DMatrix<f64>> {
        if self.gamma <= 0.0 {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        let n = self.n_states;
        let inv_gamma = 1.0 / self.gamma;
        Ok(DMatrix::from_fn(self.n_pairs(), n, |row, col| {
            let s = row / self.n_actions;
            let t = self.transition[row * n + col];
            if s == col {
                t - inv_gamma
            } else {
                t
            }
        }))
    }

    /// `I - gamma * T_pi`.
    pub(crate) fn policy_system(&self, policy: &DeterministicPolicy) -> DMatrix<f64> {
        let n = self.n_states;
        DMatrix::from_fn(n, n, |s, col| {
            let t = self.transition_row(s, policy.action(s))[col];
            let diag = if s == col { 1.0 } else { 0.0 };
            diag - self.gamma * t
        })
    }

    fn check_policy(&self, policy: &DeterministicPolicy) -> Result<()> {
        if policy.actions().len() != self.n_states {
            return Err(Error::shape("policy", self.n_states, policy.actions().len()));
        }
        if let Some(&a) = policy.actions().iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::InvalidMdp(format!(
                "policy action {a} out of range (n_actions = {})",
                self.n_actions
            )));
        }
        Ok(())
    }

    fn check_reward(&self, reward: &[f64]) -> Result<()> {
        if reward.len() != self.n_pairs() {
            return Err(Error::shape("reward", self.n_pairs(), reward.len()));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidMdp("reward has non-finite entries".into()));
        }
        Ok(())
    }

    /// Exact policy evaluation: solves `(I - gamma T_pi) V = r_pi`.
    pub fn evaluate_policy(
        &self,
        reward: &[f64],
        policy: &DeterministicPolicy,
    ) -> Result<ValueFunction> {
        self.check_reward(reward)?;
        self.check_policy(policy)?;
        let system = self.policy_system(policy);
        let rhs = DVector::from_fn(self.n_states, |s, _| reward[self.pair(s, policy.action(s))]);
        solve_refined(&system, &rhs).map(|v| ValueFunction(v.data.into()))
    }

    /// `Q(s, a) = r(s, a) + gamma * sum_s' T(s, a, s') V(s')`.
    pub fn q_function(&self, reward: &[f64], v: &[f64]) -> Result<QFunction> {
        if reward.len() != self.n_pairs() {
            return Err(Error::shape("reward", self.n_pairs(), reward.len()));
        }
        if v.len() != self.n_states {
            return Err(Error::shape("value function", self.n_states, v.len()));
        }
        let q = self
            .transition
            .chunks(self.n_states)
            .zip(reward)
            .map(|(row, r)| r + self.gamma * dot(row, v))
            .collect();
        Ok(QFunction(q))
    }

    /// Policy iteration with exact evaluation, optionally warm-started.
    ///
    /// The returned policy is canonical: in every state it takes the smallest
    /// action index whose Q-value is within [`TIE_TOL`] of the maximum.
    pub fn solve_optimal(&self, reward: &[f64]) -> Result<(DeterministicPolicy, ValueFunction)> {
        self.solve_optimal_from(reward, None)
    }

    pub fn solve_optimal_from(
        &self,
        reward: &[f64],
        init: Option<&DeterministicPolicy>,
    ) -> Result<(DeterministicPolicy, ValueFunction)> {
        self.check_reward(reward)?;
        let mut policy = match init {
            Some(p) => {
                self.check_policy(p)?;
                p.clone()
            }
            None => DeterministicPolicy::uniform(self.n_states, 0),
        };
        let scale = reward.iter().fold(0.0_f64, |acc, r| acc.max(r.abs())) / (1.0 - self.gamma);
        let improve_tol = 1e-12 * (1.0 + scale);
        let m = self.n_actions;

        let mut v = self.evaluate_policy(reward, &policy)?;
        for _ in 0..MAX_POLICY_ITERATIONS {
            let q = self.q_function(reward, &v)?;
            let mut changed = false;
            let mut next = policy.clone();
            for s in 0..self.n_states {
                let row = &q[s * m..(s + 1) * m];
                let current = policy.action(s);
                let (best, best_q) = argmax(row);
                if best_q > row[current] + improve_tol {
                    next.0[s] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            policy = next;
            v = self.evaluate_policy(reward, &policy)?;
        }

        // Canonical tie-break. A switch among tied actions moves V by at most
        // TIE_TOL / (1 - gamma), so this settles in a couple of rounds.
        for _ in 0..8 {
            let q = self.q_function(reward, &v)?;
            let canonical = DeterministicPolicy(
                (0..self.n_states)
                    .map(|s| canonical_action(&q[s * m..(s + 1) * m]))
                    .collect(),
            );
            if canonical == policy {
                break;
            }
            policy = canonical;
            v = self.evaluate_policy(reward, &policy)?;
        }
        Ok((policy, v))
    }

    /// Occupancy frequency of a deterministic policy: solves
    /// `(I - gamma T_pi)^T f' = alpha` and places `f'(s)` at `(s, pi(s))`.
    pub fn occupancy_of(&self, policy: &DeterministicPolicy) -> Result<OccupancyFrequency> {
        self.check_policy(policy)?;
        let system = self.policy_system(policy).transpose();
        let rhs = DVector::from_column_slice(&self.alpha);
        let mass = solve_refined(&system, &rhs)?;
        let mut f = vec![0.0; self.n_pairs()];
        for s in 0..self.n_states {
            f[self.pair(s, policy.action(s))] = mass[s];
        }
        Ok(OccupancyFrequency(f))
    }

    /// `max |gamma E^T f + alpha|`, computed without dividing by gamma.
    pub fn occupancy_residual(&self, f: &[f64]) -> f64 {
        let n = self.n_states;
        let mut out: Vec<f64> = self.alpha.clone();
        for (pair, &mass) in f.iter().enumerate() {
            let s = pair / self.n_actions;
            let row = &self.transition[pair * n..(pair + 1) * n];
            for (o, t) in out.iter_mut().zip(row) {
                *o += self.gamma * t * mass;
            }
            out[s] -= mass;
        }
        out.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

impl OccupancyFrequency {
    /// Total mass in each state.
    pub fn state_mass(&self, n_actions: usize) -> Vec<f64> {
        self.0.chunks(n_actions).map(|c| c.iter().sum()).collect()
    }

    /// Row-stochastic `n × m` policy; zero-mass states put all weight on action 0.
    pub fn stochastic_policy(&self, n_actions: usize) -> Vec<Vec<f64>> {
        self.0
            .chunks(n_actions)
            .map(|row| {
                let mass: f64 = row.iter().sum();
                if mass < ZERO_MASS {
                    let mut out = vec![0.0; n_actions];
                    out[0] = 1.0;
                    out
                } else {
                    row.iter().map(|x| x / mass).collect()
                }
            })
            .collect()
    }

    /// `argmax_a f(s, a)` with smallest-index tie-break; zero-mass states get action 0.
    pub fn deterministic_policy(&self, n_actions: usize) -> DeterministicPolicy {
        DeterministicPolicy(
            self.0
                .chunks(n_actions)
                .map(|row| {
                    let mass: f64 = row.iter().sum();
                    if mass < ZERO_MASS {
                        0
                    } else {
                        argmax(row).0
                    }
                })
                .collect(),
        )
    }

    /// `r^T f`.
    pub fn value(&self, reward: &[f64]) -> f64 {
        dot(reward, &self.0)
    }
}

/// `r^T f`.
pub fn value_of_occupancy(reward: &[f64], f: &OccupancyFrequency) -> Result<f64> {
    if reward.len() != f.len() {
        return Err(Error::shape("reward", f.len(), reward.len()));
    }
    Ok(f.value(reward))
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(format!("entry {x} is negative or not finite"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(format!("sums to {sum}, expected 1"));
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First index of the maximum.
fn argmax(row: &[f64]) -> (usize, f64) {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
}

fn canonical_action(row: &[f64]) -> usize {
    let (_, max) = argmax(row);
    row.iter()
        .position(|&q| q >= max - TIE_TOL)
        .unwrap_or(0)
}

/// LU solve with one step of iterative refinement.
pub(crate) fn solve_refined(system: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = system.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or(Error::LinearSolveFailure("singular policy system"))?;
    let residual = rhs - system * &x;
    if let Some(correction) = lu.solve(&residual) {
        x += correction;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolveFailure("non-finite solution"));
    }
    let residual = (rhs - system * &x).amax();
    if residual > 1e-10 * (1.0 + rhs.amax()) {
        return Err(Error::LinearSolveFailure("residual above 1e-10"));
    }
    Ok(x)
}

/// Multi right-hand-side variant used for symbolic value functions.
pub(crate) fn solve_matrix(system: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = system.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or(Error::LinearSolveFailure("singular policy system"))?;
    let residual = rhs - system * &x;
    if let Some(correction) = lu.solve(&residual) {
        x += correction;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolveFailure("non-finite solution"));
    }
    Ok(x)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Two states, actions {stay, switch}.
    pub(crate) fn stay_switch(gamma: f64, alpha: Vec<f64>) -> Mdp {
        #[rustfmt::skip]
        let t = vec![
            1.0, 0.0, // s0 stay
            0.0, 1.0, // s0 switch
            0.0, 1.0, // s1 stay
            1.0, 0.0, // s1 switch
        ];
        Mdp::new(2, 2, t, alpha, gamma).unwrap()
    }

    const STAY: usize = 0;
    const SWITCH: usize = 1;

    #[test]
    fn rejects_bad_rows() {
        let err = Mdp::new(1, 1, vec![0.5], vec![1.0], 0.9).unwrap_err();
        assert!(matches!(err, Error::InvalidMdp(_)));
        assert!(Mdp::new(1, 1, vec![1.0], vec![0.9], 0.9).is_err());
        assert!(Mdp::new(1, 1, vec![1.0], vec![1.0], 1.0).is_err());
        assert!(Mdp::new(1, 2, vec![1.0], vec![1.0], 0.5).is_err());
    }

    #[test]
    fn e_matrix_diagonal_and_rows() {
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let e = mdp.build_e_matrix().unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 1.0 - 1.0 / 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(0, 0)], -1.0 / 9.0, epsilon = 1e-12);
        // switch from s0 lands in s1
        assert_eq!(e[(1, 1)], 1.0);
        assert_abs_diff_eq!(e[(1, 0)], -1.0 / 0.9, epsilon = 1e-15);
        for row in e.row_iter() {
            assert_abs_diff_eq!(row.sum(), 1.0 - 1.0 / 0.9, epsilon = 1e-12);
        }
    }

    #[test]
    fn e_matrix_needs_positive_gamma() {
        let mdp = stay_switch(0.0, vec![1.0, 0.0]);
        assert!(matches!(mdp.build_e_matrix(), Err(Error::InvalidDiscount(_))));
    }

    #[test]
    fn evaluate_stay_switch() {
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let r = vec![1.0, 0.0, 0.0, 0.0];
        let pi = DeterministicPolicy::new(vec![STAY, SWITCH]);
        let v = mdp.evaluate_policy(&r, &pi).unwrap();
        assert_abs_diff_eq!(v[0], 10.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], 9.0, epsilon = 1e-10);

        let q = mdp.q_function(&r, &v).unwrap();
        assert_abs_diff_eq!(q[mdp.pair(0, SWITCH)], 8.1, epsilon = 1e-10);
        for s in 0..2 {
            assert_abs_diff_eq!(q[mdp.pair(s, pi.action(s))], v[s], epsilon = 1e-10);
        }

        let zero = mdp.evaluate_policy(&[0.0; 4], &pi).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn solve_stay_switch() {
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let (pi, v) = mdp.solve_optimal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(pi.actions(), &[STAY, SWITCH]);
        assert_abs_diff_eq!(v[0], 10.0, epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], 9.0, epsilon = 1e-10);

        let (pi, v) = mdp.solve_optimal(&[0.0; 4]).unwrap();
        assert_eq!(pi.actions(), &[0, 0]);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn occupancy_stay_switch() {
        let pi = DeterministicPolicy::new(vec![STAY, SWITCH]);
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let f = mdp.occupancy_of(&pi).unwrap();
        assert_abs_diff_eq!(f[mdp.pair(0, STAY)], 10.0, epsilon = 1e-10);
        for (i, &x) in f.iter().enumerate() {
            if i != mdp.pair(0, STAY) {
                assert_eq!(x, 0.0);
            }
        }
        assert_abs_diff_eq!(value_of_occupancy(&[1.0, 0.0, 0.0, 0.0], &f).unwrap(), 10.0, epsilon = 1e-10);
        assert_eq!(value_of_occupancy(&[0.0; 4], &f).unwrap(), 0.0);

        let mdp = stay_switch(0.9, vec![0.0, 1.0]);
        let f = mdp.occupancy_of(&pi).unwrap();
        assert_abs_diff_eq!(f[mdp.pair(1, SWITCH)], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f[mdp.pair(0, STAY)], 9.0, epsilon = 1e-10);
        assert!(mdp.occupancy_residual(&f) < 1e-12);
    }

    #[test]
    fn policy_of_conventions() {
        let f = OccupancyFrequency::new(vec![0.4, 0.6, 0.0, 0.0]);
        let rows = f.stochastic_policy(2);
        assert_abs_diff_eq!(rows[0][0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(rows[0][1], 0.6, epsilon = 1e-15);
        assert_eq!(rows[1], vec![1.0, 0.0]);
        assert_eq!(f.deterministic_policy(2).actions(), &[1, 0]);

        // unreachable state with a nonzero policy action still maps to 0
        let mdp = stay_switch(0.9, vec![1.0, 0.0]);
        let pi = DeterministicPolicy::new(vec![STAY, SWITCH]);
        let f = mdp.occupancy_of(&pi).unwrap();
        assert_eq!(f.deterministic_policy(2).actions(), &[STAY, 0]);
    }

    #[test]
    fn tie_break_is_smallest_index() {
        // one state, three actions with identical self-loops
        let mdp = Mdp::new(1, 3, vec![1.0; 3], vec![1.0], 0.5).unwrap();
        let (pi, _) = mdp.solve_optimal(&[0.2, 0.7, 0.7]).unwrap();
        assert_eq!(pi.actions(), &[1]);
        let (pi, _) = mdp.solve_optimal(&[0.7, 0.7, 0.7 + 1e-12]).unwrap();
        assert_eq!(pi.actions(), &[0]);
    }
}
