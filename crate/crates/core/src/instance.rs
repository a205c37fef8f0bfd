//! Seeded random instances.
//!
//! The generator draws from `Xoshiro256PlusPlus` seeded through SplitMix64
//! (`seed_from_u64`), so a seed names the same instance on every platform.
//! Per state-action pair it samples `transition_support` distinct successors
//! and splits the mass with normalized `Exp(1)` draws (a flat Dirichlet).
//! Basis columns are uniform on `[-1, 1]` and then orthonormalized.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp1, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::reward::{box_constraints, norm, RewardPolytope};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    Uniform,
    /// All initial mass on state 0.
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolytopeMode {
    Box,
    /// The box plus `reward_dim` random cuts `c^T w <= β`, each keeping the
    /// origin strictly inside.
    RandomHalfspaces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub reward_dim: usize,
    pub gamma: f64,
    pub seed: u64,
    pub transition_support: usize,
    pub alpha_mode: AlphaMode,
    pub polytope_mode: PolytopeMode,
    pub box_halfwidth: f64,
}

impl GenConfig {
    /// Defaults: `gamma = 0.95`, support `min(n, 4)`, uniform `alpha`, box of
    /// half-width 1.
    pub fn new(n_states: usize, n_actions: usize, reward_dim: usize, seed: u64) -> Self {
        GenConfig {
            n_states,
            n_actions,
            reward_dim,
            gamma: 0.95,
            seed,
            transition_support: n_states.min(4),
            alpha_mode: AlphaMode::Uniform,
            polytope_mode: PolytopeMode::Box,
            box_halfwidth: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::PreconditionViolated(msg));
        if self.n_states == 0 || self.n_actions == 0 {
            return bad("state and action counts must be positive".into());
        }
        if self.reward_dim == 0 || self.reward_dim > self.n_states * self.n_actions {
            return bad(format!(
                "reward_dim must be in 1..={}",
                self.n_states * self.n_actions
            ));
        }
        if self.transition_support == 0 || self.transition_support > self.n_states {
            return bad(format!(
                "transition_support must be in 1..={}",
                self.n_states
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        if !(self.box_halfwidth > 0.0 && self.box_halfwidth.is_finite()) {
            return bad("box_halfwidth must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RumdpInstance {
    pub mdp: Mdp,
    pub polytope: RewardPolytope,
    /// The generator settings, when the instance came from [`generate`].
    pub meta: Option<GenConfig>,
}

/// Modified Gram-Schmidt on the columns of a row-major `rows × cols` matrix.
fn orthonormalize_columns(data: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    for j in 0..cols {
        for k in 0..j {
            let proj: f64 = (0..rows).map(|i| data[i * cols + j] * data[i * cols + k]).sum();
            for i in 0..rows {
                data[i * cols + j] -= proj * data[i * cols + k];
            }
        }
        let len = (0..rows).map(|i| data[i * cols + j].powi(2)).sum::<f64>().sqrt();
        if len < 1e-10 {
            return Err(Error::InvalidRewardModel("random basis lost rank".into()));
        }
        for i in 0..rows {
            data[i * cols + j] /= len;
        }
    }
    Ok(())
}

pub fn generate(config: &GenConfig) -> Result<RumdpInstance> {
    config.validate()?;
    let n = config.n_states;
    let m = config.n_actions;
    let d = config.reward_dim;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed);

    let mut transition = vec![0.0; n * m * n];
    for pair in 0..n * m {
        let successors = sample(&mut rng, n, config.transition_support);
        let weights: Vec<f64> = (0..config.transition_support)
            .map(|_| Exp1.sample(&mut rng))
            .collect();
        let total: f64 = weights.iter().sum();
        for (sp, wt) in successors.iter().zip(&weights) {
            transition[pair * n + sp] = wt / total;
        }
    }
    let alpha = match config.alpha_mode {
        AlphaMode::Uniform => vec![1.0 / n as f64; n],
        AlphaMode::PointMass => {
            let mut a = vec![0.0; n];
            a[0] = 1.0;
            a
        }
    };
    let mdp = Mdp::new(n, m, transition, alpha, config.gamma)?;

    let mut basis: Vec<f64> = (0..n * m * d).map(|_| rng.random_range(-1.0..=1.0)).collect();
    orthonormalize_columns(&mut basis, n * m, d)?;

    let h = config.box_halfwidth;
    let (mut a_rows, mut b) = box_constraints(d, -h, h);
    if config.polytope_mode == PolytopeMode::RandomHalfspaces {
        for _ in 0..d {
            let c: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = norm(&c).max(1e-12);
            a_rows.push(c.iter().map(|x| x / len).collect());
            b.push(rng.random_range(0.2..=1.0) * h);
        }
    }
    let polytope = RewardPolytope::with_basis(n * m, d, a_rows, b, basis)?;
    Ok(RumdpInstance {
        mdp,
        polytope,
        meta: Some(config.clone()),
    })
}
