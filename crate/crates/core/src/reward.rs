//! Feasible reward space `{w | A w <= b}` over reward weights `w`, with a
//! linear basis mapping weights to full state-action rewards `r = Φ w`.
//!
//! All geometry runs in weight space; full rewards are only materialized
//! when an MDP has to be evaluated.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::mdp::dot;

/// Chebyshev radii at or below this mean the polytope has no interior.
pub const DEGENERATE_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RewardPolytope {
    dim: usize,
    n_pairs: usize,
    /// Constraint rows, `n_rows × dim`, row-major.
    a: Vec<f64>,
    b: Vec<f64>,
    /// `Φ`, `n_pairs × dim`, row-major.
    basis: Vec<f64>,
    identity_basis: bool,
    center: Vec<f64>,
    radius: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// A weight vector together with its full reward.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardPoint {
    pub w: Vec<f64>,
    pub r: Vec<f64>,
}

impl RewardPolytope {
    /// Polytope with the identity basis (`dim = n_pairs`).
    pub fn with_identity_basis(n_pairs: usize, a_rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let mut basis = vec![0.0; n_pairs * n_pairs];
        for i in 0..n_pairs {
            basis[i * n_pairs + i] = 1.0;
        }
        Self::build(n_pairs, n_pairs, a_rows, b, basis, true)
    }

    /// Polytope over `dim` weights with an explicit `n_pairs × dim` basis.
    pub fn with_basis(
        n_pairs: usize,
        dim: usize,
        a_rows: Vec<Vec<f64>>,
        b: Vec<f64>,
        basis: Vec<f64>,
    ) -> Result<Self> {
        Self::build(n_pairs, dim, a_rows, b, basis, false)
    }

    fn build(
        n_pairs: usize,
        dim: usize,
        a_rows: Vec<Vec<f64>>,
        b: Vec<f64>,
        basis: Vec<f64>,
        identity_basis: bool,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidRewardModel("reward dimension must be positive".into()));
        }
        if basis.len() != n_pairs * dim {
            return Err(Error::shape("basis", n_pairs * dim, basis.len()));
        }
        if a_rows.len() != b.len() {
            return Err(Error::shape("constraint rhs", a_rows.len(), b.len()));
        }
        let mut a = Vec::with_capacity(a_rows.len() * dim);
        for row in &a_rows {
            if row.len() != dim {
                return Err(Error::shape("constraint row", dim, row.len()));
            }
            a.extend_from_slice(row);
        }
        if a.iter().chain(&b).chain(&basis).any(|x| !x.is_finite()) {
            return Err(Error::InvalidRewardModel("non-finite entry".into()));
        }
        if !identity_basis {
            let phi = DMatrix::from_row_slice(n_pairs, dim, &basis);
            if n_pairs < dim || phi.rank(1e-10) < dim {
                return Err(Error::InvalidRewardModel(
                    "basis must have full column rank".into(),
                ));
            }
        }
        for (row, &rhs) in a_rows.iter().zip(&b) {
            if norm(row) == 0.0 && rhs < 0.0 {
                return Err(Error::InfeasiblePolytope);
            }
        }

        let mut poly = RewardPolytope {
            dim,
            n_pairs,
            a,
            b,
            basis,
            identity_basis,
            center: Vec::new(),
            radius: 0.0,
            lower: Vec::new(),
            upper: Vec::new(),
        };
        let (center, radius) = poly.chebyshev()?;
        poly.center = center;
        poly.radius = radius;
        let (lower, upper) = poly.bounding_box_lps()?;
        poly.lower = lower;
        poly.upper = upper;
        Ok(poly)
    }

    fn chebyshev(&self) -> Result<(Vec<f64>, f64)> {
        let d = self.dim;
        let mut objective = vec![0.0; d + 1];
        objective[d] = 1.0;
        let mut lp = LinearProgram::new(Sense::Maximize, objective);
        for (i, &rhs) in self.b.iter().enumerate() {
            let row = self.row(i);
            let mut coeffs = row.to_vec();
            coeffs.push(norm(row));
            lp.le(coeffs, rhs);
        }
        let out = solve_lp(&lp)?;
        match out.status {
            LpStatus::Unbounded => Err(Error::UnboundedPolytope),
            LpStatus::Infeasible => Err(Error::InfeasiblePolytope),
            LpStatus::Optimal => {
                let mut x = out.solution.expect("optimal LP has a solution");
                let radius = x.pop().expect("radius variable");
                if radius < -1e-9 {
                    return Err(Error::InfeasiblePolytope);
                }
                Ok((x, radius.max(0.0)))
            }
        }
    }

    fn bounding_box_lps(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dim;
        let mut lower = vec![0.0; d];
        let mut upper = vec![0.0; d];
        for j in 0..d {
            for (sense, slot) in [(Sense::Minimize, &mut lower), (Sense::Maximize, &mut upper)] {
                let mut objective = vec![0.0; d];
                objective[j] = 1.0;
                let mut lp = LinearProgram::new(sense, objective);
                for (i, &rhs) in self.b.iter().enumerate() {
                    lp.le(self.row(i).to_vec(), rhs);
                }
                let out = solve_lp(&lp)?;
                match out.status {
                    LpStatus::Optimal => slot[j] = out.objective_value.expect("optimal value"),
                    LpStatus::Unbounded => return Err(Error::UnboundedPolytope),
                    LpStatus::Infeasible => return Err(Error::InfeasiblePolytope),
                }
            }
        }
        Ok((lower, upper))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    /// Constraint row `A_i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.a.chunks(self.dim)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn is_identity_basis(&self) -> bool {
        self.identity_basis
    }

    /// `Φ` as an `n_pairs × dim` row-major slice.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// Row of `Φ` for one state-action pair.
    pub fn basis_row(&self, pair: usize) -> &[f64] {
        &self.basis[pair * self.dim..(pair + 1) * self.dim]
    }

    pub fn chebyshev_center(&self) -> (&[f64], f64) {
        (&self.center, self.radius)
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    /// `Φ w`.
    pub fn to_full_reward(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.dim {
            return Err(Error::shape("reward weights", self.dim, w.len()));
        }
        Ok(self.basis.chunks(self.dim).map(|row| dot(row, w)).collect())
    }

    /// `Φ^T f`: the weight-space image of a state-action vector, so that
    /// `(Φ w)^T f = w^T (Φ^T f)`.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (row, &x) in self.basis.chunks(self.dim).zip(f) {
            if x == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(row) {
                *o += p * x;
            }
        }
        out
    }

    /// `max_i (A_i w - b_i)`.
    pub fn max_violation(&self, w: &[f64]) -> f64 {
        self.rows()
            .zip(&self.b)
            .map(|(row, rhs)| dot(row, w) - rhs)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        self.max_violation(w) <= tol
    }

    /// The Chebyshev center, when the polytope has an interior.
    pub fn interior_point(&self) -> Result<RewardPoint> {
        if self.radius <= DEGENERATE_RADIUS {
            return Err(Error::DegeneratePolytope(self.radius));
        }
        self.point(self.center.clone())
    }

    pub fn point(&self, w: Vec<f64>) -> Result<RewardPoint> {
        let r = self.to_full_reward(&w)?;
        Ok(RewardPoint { w, r })
    }

    /// Uniform rejection sample from the bounding box, strictly inside;
    /// falls back to the Chebyshev center.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        for _ in 0..1000 {
            let w: Vec<f64> = self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect();
            if self.max_violation(&w) < 0.0 {
                return w;
            }
        }
        self.center.clone()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rows of the box `lo <= w_j <= hi` in `dim` dimensions.
pub fn box_constraints(dim: usize, lo: f64, hi: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::with_capacity(2 * dim);
    let mut b = Vec::with_capacity(2 * dim);
    for j in 0..dim {
        let mut up = vec![0.0; dim];
        up[j] = 1.0;
        rows.push(up);
        b.push(hi);
        let mut down = vec![0.0; dim];
        down[j] = -1.0;
        rows.push(down);
        b.push(-lo);
    }
    (rows, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn unit_box(d: usize) -> RewardPolytope {
        let (a, b) = box_constraints(d, 0.0, 1.0);
        RewardPolytope::with_identity_basis(d, a, b).unwrap()
    }

    #[test]
    fn identity_map() {
        let p = unit_box(3);
        let w = vec![0.1, -0.2, 0.3];
        assert_eq!(p.to_full_reward(&w).unwrap(), w);
        assert!(p.to_full_reward(&[1.0]).is_err());
    }

    #[test]
    fn indicator_basis() {
        // pairs {0, 1} share weight 0, pair 3 has weight 1, pair 2 none
        let basis = vec![1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let (a, b) = box_constraints(2, -5.0, 5.0);
        let p = RewardPolytope::with_basis(4, 2, a, b, basis).unwrap();
        assert_eq!(p.to_full_reward(&[2.0, 3.0]).unwrap(), vec![2.0, 2.0, 0.0, 3.0]);
        assert_eq!(p.project(&[1.0, 1.0, 7.0, 0.5]), vec![2.0, 0.5]);
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let basis = vec![1.0, 1.0, 2.0, 2.0];
        let (a, b) = box_constraints(2, 0.0, 1.0);
        let err = RewardPolytope::with_basis(2, 2, a, b, basis).unwrap_err();
        assert!(matches!(err, Error::InvalidRewardModel(_)));
    }

    #[test]
    fn unit_box_center() {
        for d in 1..5 {
            let p = unit_box(d);
            let c = p.interior_point().unwrap();
            for x in &c.w {
                assert_abs_diff_eq!(*x, 0.5, epsilon = 1e-12);
            }
            assert!(p.contains(&c.w, 0.0));
            assert!(p.max_violation(&c.w) < 0.0);
            let (lo, hi) = p.bounding_box();
            assert!(lo.iter().all(|&x| x.abs() < 1e-12));
            assert!(hi.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn contains_tolerance() {
        let p = unit_box(2);
        assert!(!p.contains(&[2.0, 0.5], 1e-9));
        assert!(p.contains(&[1.0, 0.5], 1e-9));
        assert!(p.contains(&[1.0, 0.5], 0.0));
    }

    #[test]
    fn simplex_incenter() {
        // w1 >= 0, w2 >= 0, w1 + w2 <= 1: right triangle with legs 1, so the
        // inradius is (1 + 1 - sqrt 2) / 2 and the incenter sits at (r, r).
        let a = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]];
        let p = RewardPolytope::with_identity_basis(2, a, vec![0.0, 0.0, 1.0]).unwrap();
        let r = (2.0 - 2f64.sqrt()) / 2.0;
        let (c, radius) = p.chebyshev_center();
        assert_abs_diff_eq!(radius, r, epsilon = 1e-8);
        assert_abs_diff_eq!(c[0], r, epsilon = 1e-8);
        assert_abs_diff_eq!(c[1], r, epsilon = 1e-8);
    }

    #[test]
    fn contradictory_rows() {
        let err = RewardPolytope::with_identity_basis(1, vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0])
            .unwrap_err();
        assert!(matches!(err, Error::InfeasiblePolytope));
    }

    #[test]
    fn unbounded_rejected() {
        let err = RewardPolytope::with_identity_basis(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 1.0])
            .unwrap_err();
        assert!(matches!(err, Error::UnboundedPolytope));
    }

    #[test]
    fn degenerate_point_is_constructible() {
        let (a, b) = box_constraints(2, 0.3, 0.3);
        let p = RewardPolytope::with_identity_basis(2, a, b).unwrap();
        assert!(matches!(p.interior_point(), Err(Error::DegeneratePolytope(_))));
        assert!(p.contains(&[0.3, 0.3], 1e-9));
    }

    #[test]
    fn sampled_membership_matches_violation_sign() {
        let a = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0], vec![1.0, -2.0]];
        let p = RewardPolytope::with_identity_basis(2, a, vec![0.0, 0.0, 1.0, 0.5]).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        let (lo, hi) = p.bounding_box();
        for _ in 0..1000 {
            let w: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect();
            let worst = p
                .rows()
                .zip(p.b())
                .map(|(row, b)| row[0] * w[0] + row[1] * w[1] - b)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(p.contains(&w, 0.0), worst <= 0.0);
        }
        for _ in 0..100 {
            let w = p.sample_interior(&mut rng);
            assert!(p.max_violation(&w) < 0.0);
        }
    }
}
