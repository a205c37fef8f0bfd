//! Browser bindings: a two-dimensional reward space, its partition into
//! optimality regions, minimax regret over the partition, and the anytime
//! line walker one line at a time.

use rumdp::enumerate::{enumerate_gt, ApproxSession, NondominatedSet, PolicyKey};
use rumdp::instance::{generate, GenConfig, RumdpInstance};
use rumdp::regret::{max_regret, solve_xu_mannor};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsError> {
    serde_json::to_string(value).map_err(js_err)
}

#[derive(Serialize)]
struct PolicyView {
    actions: Vec<usize>,
    witness: Vec<f64>,
}

#[derive(Serialize)]
struct Partition {
    lo: Vec<f64>,
    hi: Vec<f64>,
    resolution: usize,
    /// Row-major from `lo`, x fastest; the index of the optimal policy in
    /// `policies`, or -1 outside the polytope.
    cells: Vec<i32>,
    policies: Vec<PolicyView>,
}

#[derive(Serialize)]
struct WeightView {
    policy: usize,
    weight: f64,
}

#[derive(Serialize)]
struct RegretView {
    regret: f64,
    mixture: Vec<WeightView>,
    /// The reward where the mixture does worst, and the policy that wins there.
    adversary_w: Vec<f64>,
    adversary_policy: usize,
}

#[derive(Serialize)]
struct WalkView {
    lines: usize,
    added: usize,
    /// Indices into the partition's policy list.
    found: Vec<usize>,
    /// Where each found policy was first seen.
    points: Vec<Vec<f64>>,
    total: usize,
    /// Relative regret error of the best mixture over the found policies.
    rel_error: Option<f64>,
}

#[wasm_bindgen]
pub struct DemoSession {
    instance: RumdpInstance,
    gamma: NondominatedSet,
    exact_regret: f64,
    seed: u64,
    lines: usize,
}

impl DemoSession {
    fn index_of(&self, key: &PolicyKey) -> Option<usize> {
        self.gamma.position(key)
    }

    /// Replays the walker up to `lines`; sessions borrow the instance, so
    /// none is kept between calls.
    fn replay(&self, lines: usize) -> Result<(NondominatedSet, usize), JsError> {
        let mut session = ApproxSession::new(&self.instance.mdp, &self.instance.polytope, self.seed);
        let mut added = 0;
        for _ in 0..lines {
            added = session.walk_line().map_err(js_err)?;
        }
        Ok((session.into_set(), added))
    }
}

#[wasm_bindgen]
impl DemoSession {
    /// A random instance with a two-dimensional reward space.
    #[wasm_bindgen(constructor)]
    pub fn new(states: usize, actions: usize, seed: u64) -> Result<DemoSession, JsError> {
        let mut cfg = GenConfig::new(states, actions, 2, seed);
        cfg.transition_support = states.min(3);
        let instance = generate(&cfg).map_err(js_err)?;
        let gamma = enumerate_gt(&instance.mdp, &instance.polytope).map_err(js_err)?;
        let exact_regret = solve_xu_mannor(&instance.polytope, &gamma).map_err(js_err)?.regret;
        Ok(DemoSession {
            instance,
            gamma,
            exact_regret,
            seed,
            lines: 0,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn policy_count(&self) -> usize {
        self.gamma.len()
    }

    /// The optimal policy on a `resolution × resolution` grid.
    pub fn partition_json(&self, resolution: usize) -> Result<String, JsError> {
        let poly = &self.instance.polytope;
        let (lo, hi) = poly.bounding_box();
        let res = resolution.clamp(2, 512);
        let mut cells = Vec::with_capacity(res * res);
        for iy in 0..res {
            for ix in 0..res {
                let w = [
                    lo[0] + (ix as f64 + 0.5) / res as f64 * (hi[0] - lo[0]),
                    lo[1] + (iy as f64 + 0.5) / res as f64 * (hi[1] - lo[1]),
                ];
                if !poly.contains(&w, 0.0) {
                    cells.push(-1);
                    continue;
                }
                let r = poly.to_full_reward(&w).map_err(js_err)?;
                let (pi, _) = self.instance.mdp.solve_optimal(&r).map_err(js_err)?;
                let f = self.instance.mdp.occupancy_of(&pi).map_err(js_err)?;
                let key = PolicyKey::from_occupancy(&f, self.instance.mdp.n_actions());
                cells.push(self.index_of(&key).map_or(-1, |i| i as i32));
            }
        }
        let policies = self
            .gamma
            .entries()
            .iter()
            .map(|e| PolicyView {
                actions: e.key.actions().to_vec(),
                witness: e.witness_w.clone(),
            })
            .collect();
        to_json(&Partition {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            resolution: res,
            cells,
            policies,
        })
    }

    /// Minimax-regret mixture over every nondominated policy.
    pub fn regret_json(&self) -> Result<String, JsError> {
        let poly = &self.instance.polytope;
        let sol = solve_xu_mannor(poly, &self.gamma).map_err(js_err)?;
        let (pair, _) = max_regret(&sol.occupancy, &self.gamma, poly).map_err(js_err)?;
        let mixture = sol
            .support
            .iter()
            .filter_map(|(key, weight)| {
                self.index_of(key).map(|policy| WeightView {
                    policy,
                    weight: *weight,
                })
            })
            .collect();
        to_json(&RegretView {
            regret: sol.regret,
            mixture,
            adversary_w: pair.r_w,
            adversary_policy: pair.index,
        })
    }

    /// Walks one more random line and reports what has been found so far.
    pub fn walk_line_json(&mut self) -> Result<String, JsError> {
        self.lines += 1;
        let (found, added) = self.replay(self.lines)?;
        let poly = &self.instance.polytope;
        let rel_error = if found.is_empty() {
            None
        } else {
            let sol = solve_xu_mannor(poly, &found).map_err(js_err)?;
            let achieved = sol.evaluate(&self.gamma, poly).map_err(js_err)?;
            let gap = (achieved - self.exact_regret).max(0.0);
            Some(if self.exact_regret < 1e-9 { gap } else { gap / self.exact_regret })
        };
        let mut indices = Vec::new();
        let mut points = Vec::new();
        for e in found.entries() {
            if let Some(i) = self.index_of(&e.key) {
                indices.push(i);
                points.push(e.witness_w.clone());
            }
        }
        to_json(&WalkView {
            lines: self.lines,
            added,
            found: indices,
            points,
            total: self.gamma.len(),
            rel_error,
        })
    }

    /// Forgets the walked lines.
    pub fn reset_walk(&mut self) {
        self.lines = 0;
    }
}
