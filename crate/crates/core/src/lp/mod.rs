//! Linear programs and the embedded dense simplex solver.
//!
//! Every LP in the crate goes through [`solve_lp`]. Programs whose variables
//! are all free and whose row count dwarfs the variable count (the shape of
//! all reward-space LPs: a handful of weights against many hyperplanes) are
//! solved through their dual, which keeps the tableau at `k` rows.

mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use simplex::{solve_standard, PivotRule, StandardForm, StdOutcome, StdRow};

/// Allowed row violation for an optimal solution, relative to row magnitude.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost threshold for optimality.
pub const OPTIMALITY_TOL: f64 = simplex::OPT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
    /// Per-variable `(lower, upper)`; infinite entries mean unbounded.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub solution: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    /// `d objective / d rhs` for every row, in the program's own sense.
    pub dual_values: Option<Vec<f64>>,
}

/// Which formulation the simplex runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Dual when every variable is free and rows outnumber variables 2:1.
    Auto,
    Primal,
    Dual,
}

impl LinearProgram {
    /// A program over `objective.len()` free variables with no rows.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let k = objective.len();
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); k],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.rows.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_row(coeffs, Relation::Le, rhs)
    }

    pub fn ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_row(coeffs, Relation::Ge, rhs)
    }

    pub fn equal(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_row(coeffs, Relation::Eq, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn nonnegative(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, 0.0, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_vars();
        if self.bounds.len() != k {
            return Err(Error::MalformedLp(format!(
                "{} bounds for {k} variables",
                self.bounds.len()
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedLp("non-finite objective entry".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != k {
                return Err(Error::MalformedLp(format!(
                    "row {i} has {} coefficients for {k} variables",
                    row.coeffs.len()
                )));
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) || !row.rhs.is_finite() {
                return Err(Error::MalformedLp(format!("row {i} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(Error::MalformedLp(format!("bad bounds on variable {j}")));
            }
        }
        Ok(())
    }

    fn all_free(&self) -> bool {
        self.bounds
            .iter()
            .all(|&(lo, hi)| lo == f64::NEG_INFINITY && hi == f64::INFINITY)
    }

    /// Largest relative row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|row| {
                let mut scale = 1.0_f64.max(row.rhs.abs());
                let mut lhs = 0.0;
                for (a, v) in row.coeffs.iter().zip(x) {
                    lhs += a * v;
                    scale = scale.max((a * v).abs());
                }
                let violation = match row.relation {
                    Relation::Le => lhs - row.rhs,
                    Relation::Ge => row.rhs - lhs,
                    Relation::Eq => (lhs - row.rhs).abs(),
                };
                violation.max(0.0) / scale
            })
            .fold(0.0, f64::max)
    }

    fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

impl LpOutcome {
    fn status_only(status: LpStatus) -> Self {
        LpOutcome {
            status,
            solution: None,
            objective_value: None,
            dual_values: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    solve_lp_with(lp, Route::Auto)
}

pub fn solve_lp_with(lp: &LinearProgram, route: Route) -> Result<LpOutcome> {
    lp.validate()?;
    let use_dual = match route {
        Route::Primal => false,
        Route::Dual => {
            if !lp.all_free() {
                return Err(Error::MalformedLp(
                    "dual route needs every variable free".into(),
                ));
            }
            true
        }
        Route::Auto => lp.all_free() && lp.rows.len() > 2 * lp.n_vars(),
    };

    let mut last_violation = f64::NAN;
    let attempts: &[(bool, PivotRule)] = if use_dual {
        &[
            (true, PivotRule::Dantzig),
            (true, PivotRule::Bland),
            (false, PivotRule::Dantzig),
        ]
    } else {
        &[(false, PivotRule::Dantzig), (false, PivotRule::Bland)]
    };
    for &(dual, rule) in attempts {
        let outcome = if dual {
            solve_via_dual(lp, rule)
        } else {
            solve_primal(lp, rule)
        };
        let outcome = match outcome {
            Ok(o) => o,
            Err(Error::LpNumericalFailure(_)) => continue,
            Err(e) => return Err(e),
        };
        match &outcome.solution {
            Some(x) => {
                last_violation = lp.max_violation(x);
                if last_violation <= FEASIBILITY_TOL {
                    return Ok(outcome);
                }
            }
            None => return Ok(outcome),
        }
    }
    Err(Error::LpNumericalFailure(format!(
        "no attempt produced a feasible optimum (last relative violation {last_violation:e})"
    )))
}

enum VarMap {
    /// `x = shift + x'`.
    Shifted { col: usize, shift: f64 },
    /// `x = shift - x'`.
    Reflected { col: usize, shift: f64 },
    /// `x = x+ - x-`.
    Split { pos: usize, neg: usize },
}

fn solve_primal(lp: &LinearProgram, rule: PivotRule) -> Result<LpOutcome> {
    let mut maps = Vec::with_capacity(lp.n_vars());
    let mut n_cols = 0;
    let mut upper_rows = Vec::new();
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted {
                col: n_cols,
                shift: lo,
            });
            if hi.is_finite() {
                upper_rows.push((n_cols, hi - lo));
            }
            n_cols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Reflected {
                col: n_cols,
                shift: hi,
            });
            n_cols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: n_cols,
                neg: n_cols + 1,
            });
            n_cols += 2;
        }
    }

    // Rows in standard columns, before slacks.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    let mut cost = vec![0.0; n_cols];
    let sign_obj = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    for (j, map) in maps.iter().enumerate() {
        let c = sign_obj * lp.objective[j];
        match *map {
            VarMap::Shifted { col, .. } => {
                cost[col] += c;
            }
            VarMap::Reflected { col, .. } => {
                cost[col] -= c;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }
    for row in &lp.rows {
        let mut coeffs = vec![0.0; n_cols];
        let mut rhs = row.rhs;
        for (j, map) in maps.iter().enumerate() {
            let a = row.coeffs[j];
            if a == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shifted { col, shift } => {
                    coeffs[col] += a;
                    rhs -= a * shift;
                }
                VarMap::Reflected { col, shift } => {
                    coeffs[col] -= a;
                    rhs -= a * shift;
                }
                VarMap::Split { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, row.relation, rhs));
    }
    for &(col, width) in &upper_rows {
        let mut coeffs = vec![0.0; n_cols];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, width));
    }

    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let total = n_cols + n_slack;
    cost.resize(total, 0.0);
    let mut std_rows = Vec::with_capacity(rows.len());
    let mut row_sign = Vec::with_capacity(rows.len());
    let mut next_slack = n_cols;
    for (mut coeffs, relation, rhs) in rows {
        coeffs.resize(total, 0.0);
        let slack = match relation {
            Relation::Eq => None,
            Relation::Le => {
                coeffs[next_slack] = 1.0;
                next_slack += 1;
                Some(next_slack - 1)
            }
            Relation::Ge => {
                coeffs[next_slack] = -1.0;
                next_slack += 1;
                Some(next_slack - 1)
            }
        };
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        if sign < 0.0 {
            coeffs.iter_mut().for_each(|c| *c = -*c);
        }
        let basic_hint = slack.filter(|&c| coeffs[c] > 0.0);
        std_rows.push(StdRow {
            coeffs,
            rhs: sign * rhs,
            basic_hint,
        });
        row_sign.push(sign);
    }

    let sf = StandardForm {
        cost,
        rows: std_rows,
    };
    match solve_standard(&sf, rule)? {
        StdOutcome::Infeasible => Ok(LpOutcome::status_only(LpStatus::Infeasible)),
        StdOutcome::Unbounded => Ok(LpOutcome::status_only(LpStatus::Unbounded)),
        StdOutcome::Optimal { x: xs, duals } => {
            let mut x: Vec<f64> = maps
                .iter()
                .map(|map| match *map {
                    VarMap::Shifted { col, shift } => shift + xs[col],
                    VarMap::Reflected { col, shift } => shift - xs[col],
                    VarMap::Split { pos, neg } => xs[pos] - xs[neg],
                })
                .collect();
            for (v, &(lo, hi)) in x.iter_mut().zip(&lp.bounds) {
                *v = v.clamp(lo, hi);
            }
            let dual_values = (0..lp.rows.len())
                .map(|i| sign_obj * row_sign[i] * duals[i])
                .collect();
            Ok(LpOutcome {
                status: LpStatus::Optimal,
                objective_value: Some(lp.objective_at(&x)),
                solution: Some(x),
                dual_values: Some(dual_values),
            })
        }
    }
}

/// Solves `max c^T x, A x <= b, A_eq x = b_eq, x free` through
/// `min b^T y, A^T y = c, y >= 0`, reading `x` off the dual multipliers.
fn solve_via_dual(lp: &LinearProgram, rule: PivotRule) -> Result<LpOutcome> {
    let k = lp.n_vars();
    let sign_obj = match lp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let c: Vec<f64> = lp.objective.iter().map(|v| sign_obj * v).collect();

    match dual_core(lp, &c, rule)? {
        DualCore::Optimal { x, y } => Ok(LpOutcome {
            status: LpStatus::Optimal,
            objective_value: Some(lp.objective_at(&x)),
            solution: Some(x),
            dual_values: Some(y.into_iter().map(|v| sign_obj * v).collect()),
        }),
        DualCore::DualUnbounded => Ok(LpOutcome::status_only(LpStatus::Infeasible)),
        DualCore::DualInfeasible => {
            // Primal is unbounded or infeasible; a zero objective separates them.
            match dual_core(lp, &vec![0.0; k], rule)? {
                DualCore::Optimal { .. } => Ok(LpOutcome::status_only(LpStatus::Unbounded)),
                _ => Ok(LpOutcome::status_only(LpStatus::Infeasible)),
            }
        }
    }
}

enum DualCore {
    Optimal { x: Vec<f64>, y: Vec<f64> },
    DualUnbounded,
    DualInfeasible,
}

fn dual_core(lp: &LinearProgram, c: &[f64], rule: PivotRule) -> Result<DualCore> {
    let k = lp.n_vars();
    // Dual columns: one per <= row (Ge rows negated) and two per equality.
    struct Col {
        row: usize,
        sign: f64,
    }
    let mut cols = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        match row.relation {
            Relation::Le => cols.push(Col { row: i, sign: 1.0 }),
            Relation::Ge => cols.push(Col { row: i, sign: -1.0 }),
            Relation::Eq => {
                cols.push(Col { row: i, sign: 1.0 });
                cols.push(Col { row: i, sign: -1.0 });
            }
        }
    }
    let cost: Vec<f64> = cols.iter().map(|col| col.sign * lp.rows[col.row].rhs).collect();
    let mut rows = Vec::with_capacity(k);
    let mut row_sign = Vec::with_capacity(k);
    for (j, &cj) in c.iter().enumerate() {
        let sign = if cj < 0.0 { -1.0 } else { 1.0 };
        let coeffs = cols
            .iter()
            .map(|col| sign * col.sign * lp.rows[col.row].coeffs[j])
            .collect();
        rows.push(StdRow {
            coeffs,
            rhs: sign * cj,
            basic_hint: None,
        });
        row_sign.push(sign);
    }
    let sf = StandardForm { cost, rows };
    match solve_standard(&sf, rule)? {
        StdOutcome::Infeasible => Ok(DualCore::DualInfeasible),
        StdOutcome::Unbounded => Ok(DualCore::DualUnbounded),
        StdOutcome::Optimal { x: ys, duals } => {
            // d(dual objective)/d c_j = x_j by strong duality.
            let x = duals.iter().zip(&row_sign).map(|(d, s)| d * s).collect();
            let mut y = vec![0.0; lp.rows.len()];
            for (col, v) in cols.iter().zip(&ys) {
                y[col.row] += col.sign * v;
            }
            Ok(DualCore::Optimal { x, y })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn single_bound() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0]);
        lp.le(vec![1.0], 3.0);
        let out = solve_lp(&lp).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.solution.unwrap()[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.objective_value.unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn contradiction_is_infeasible() {
        for route in [Route::Primal, Route::Dual] {
            let mut lp = LinearProgram::new(Sense::Maximize, vec![0.0]);
            lp.le(vec![1.0], 0.0).le(vec![-1.0], -1.0);
            assert_eq!(solve_lp_with(&lp, route).unwrap().status, LpStatus::Infeasible);
        }
    }

    #[test]
    fn unbounded_detected_on_both_routes() {
        for route in [Route::Primal, Route::Dual] {
            let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
            lp.le(vec![-1.0, 0.0], 0.0)
                .le(vec![0.0, 1.0], 1.0)
                .le(vec![0.0, -1.0], 1.0);
            assert_eq!(solve_lp_with(&lp, route).unwrap().status, LpStatus::Unbounded);
        }
    }

    #[test]
    fn infeasible_and_unbounded_direction() {
        // x <= 0, x >= 1 with y free and rewarded: still infeasible
        let mut lp = LinearProgram::new(Sense::Maximize, vec![0.0, 1.0]);
        lp.le(vec![1.0, 0.0], 0.0).ge(vec![1.0, 0.0], 1.0);
        for route in [Route::Primal, Route::Dual] {
            assert_eq!(solve_lp_with(&lp, route).unwrap().status, LpStatus::Infeasible);
        }
    }

    #[test]
    fn bounds_and_equalities() {
        // min x + 2y s.t. x + y = 3, 0 <= x <= 2, y >= 0  ->  x=2, y=1, obj 4
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 2.0]);
        lp.equal(vec![1.0, 1.0], 3.0).set_bounds(0, 0.0, 2.0).nonnegative(1);
        let out = solve_lp(&lp).unwrap();
        let x = out.solution.unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.objective_value.unwrap(), 4.0, epsilon = 1e-12);
        // Increasing the equality rhs buys more y at cost 2.
        assert_abs_diff_eq!(out.dual_values.unwrap()[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn reflected_variable() {
        // max x s.t. x <= 5 as a bound, x >= -inf; plus row x + y <= 10, y in [1, 1]
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 5.0).set_bounds(1, 1.0, 1.0);
        lp.le(vec![1.0, 1.0], 4.0);
        let out = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(out.solution.unwrap()[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under textbook Dantzig without anti-cycling.
        let mut lp = LinearProgram::new(Sense::Minimize, vec![-0.75, 150.0, -0.02, 6.0]);
        lp.le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        for j in 0..4 {
            lp.nonnegative(j);
        }
        let out = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(out.objective_value.unwrap(), -0.05, epsilon = 1e-9);
    }

    #[test]
    fn malformed_rows_rejected() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.le(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::MalformedLp(_))));
    }

    /// Random bounded LPs over free variables: box rows plus random cuts
    /// through a known interior point.
    fn random_free_lp() -> impl Strategy<Value = LinearProgram> {
        (1usize..5, 0usize..12).prop_flat_map(|(k, extra)| {
            (
                prop::collection::vec(-1.0f64..1.0, k),
                prop::collection::vec((prop::collection::vec(-1.0f64..1.0, k), 0.05f64..2.0), extra),
                prop::collection::vec(0.1f64..3.0, k),
                any::<bool>(),
            )
                .prop_map(move |(obj, cuts, widths, maximize)| {
                    let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
                    let mut lp = LinearProgram::new(sense, obj);
                    for (j, w) in widths.iter().enumerate() {
                        let mut e = vec![0.0; k];
                        e[j] = 1.0;
                        lp.le(e.clone(), *w);
                        lp.ge(e, -*w);
                    }
                    for (a, b) in cuts {
                        lp.le(a, b);
                    }
                    lp
                })
        })
    }

    proptest! {
        #[test]
        fn primal_and_dual_routes_agree(lp in random_free_lp()) {
            let p = solve_lp_with(&lp, Route::Primal).unwrap();
            let d = solve_lp_with(&lp, Route::Dual).unwrap();
            prop_assert_eq!(p.status, LpStatus::Optimal);
            prop_assert_eq!(d.status, LpStatus::Optimal);
            let (po, dobj) = (p.objective_value.unwrap(), d.objective_value.unwrap());
            prop_assert!((po - dobj).abs() < 1e-7, "primal {} dual {}", po, dobj);
            prop_assert!(lp.max_violation(p.solution.as_ref().unwrap()) <= FEASIBILITY_TOL);
            prop_assert!(lp.max_violation(d.solution.as_ref().unwrap()) <= FEASIBILITY_TOL);
            // Strong duality on rows (no finite variable bounds): obj = y^T b.
            for out in [&p, &d] {
                let y = out.dual_values.as_ref().unwrap();
                let by: f64 = y.iter().zip(&lp.rows).map(|(y, r)| y * r.rhs).sum();
                prop_assert!((by - out.objective_value.unwrap()).abs() < 1e-6);
            }
        }

        #[test]
        fn deterministic(lp in random_free_lp()) {
            prop_assert_eq!(solve_lp(&lp).unwrap(), solve_lp(&lp).unwrap());
        }
    }
}
