//! Dense two-phase tableau simplex for `min c^T x, A x = b, x >= 0`.

use crate::error::{Error, Result};

pub(crate) const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 25;

/// One equality row of a standard-form problem. `rhs` must be non-negative.
pub(crate) struct StdRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    /// A column that is `+e_row` with zero cost and may start in the basis.
    pub basic_hint: Option<usize>,
}

pub(crate) struct StandardForm {
    pub cost: Vec<f64>,
    pub rows: Vec<StdRow>,
}

pub(crate) enum StdOutcome {
    Optimal {
        x: Vec<f64>,
        /// `d objective / d rhs_i`.
        duals: Vec<f64>,
    },
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum PivotRule {
    /// Dantzig's largest reduced cost, falling back to Bland on stalls.
    Dantzig,
    Bland,
}

struct Tableau {
    m: usize,
    /// Real columns followed by artificial ones.
    n_real: usize,
    width: usize,
    /// `m` rows of `width + 1` entries, the last being the right-hand side.
    data: Vec<f64>,
    reduced: Vec<f64>,
    basis: Vec<usize>,
    /// Column holding `+e_i` in the starting basis, used to read off duals.
    init_col: Vec<usize>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn stride(&self) -> usize {
        self.width + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.stride() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.stride() + self.width]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let stride = self.stride();
        let p = self.data[row * stride + col];
        for v in &mut self.data[row * stride..(row + 1) * stride] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[row * stride..(row + 1) * stride].to_vec();
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.data[i * stride + col];
            if factor == 0.0 {
                continue;
            }
            let target = &mut self.data[i * stride..(i + 1) * stride];
            for (t, p) in target.iter_mut().zip(&pivot_row) {
                *t -= factor * p;
            }
            target[col] = 0.0;
        }
        let factor = self.reduced[col];
        if factor != 0.0 {
            for (r, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *r -= factor * p;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Reduced costs `c_j - c_B^T B^{-1} A_j` for the given cost vector; the
    /// final entry holds `-c_B^T x_B`.
    fn price(&mut self, cost: &[f64]) {
        let stride = self.stride();
        let mut reduced = cost.to_vec();
        reduced.push(0.0);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.data[i * stride..(i + 1) * stride];
            for (r, a) in reduced.iter_mut().zip(row) {
                *r -= cb * a;
            }
        }
        self.reduced = reduced;
    }

    fn run(&mut self, allowed: usize, rule: PivotRule, budget: &mut usize) -> Result<PhaseEnd> {
        let mut bland = rule == PivotRule::Bland;
        let mut degenerate = 0usize;
        loop {
            if *budget == 0 {
                return Err(Error::LpNumericalFailure(
                    "simplex iteration budget exhausted".into(),
                ));
            }
            *budget -= 1;

            let entering = if bland {
                (0..allowed).find(|&j| self.reduced[j] < -OPT_TOL)
            } else {
                let mut best = None;
                let mut best_val = -OPT_TOL;
                for j in 0..allowed {
                    if self.reduced[j] < best_val {
                        best_val = self.reduced[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, col);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((row, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_LIMIT {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
        }
    }
}

pub(crate) fn solve_standard(sf: &StandardForm, rule: PivotRule) -> Result<StdOutcome> {
    let n_real = sf.cost.len();
    let m = sf.rows.len();
    let n_art = sf.rows.iter().filter(|r| r.basic_hint.is_none()).count();
    let width = n_real + n_art;
    let stride = width + 1;

    let mut data = vec![0.0; m * stride];
    let mut basis = Vec::with_capacity(m);
    let mut next_art = n_real;
    for (i, row) in sf.rows.iter().enumerate() {
        debug_assert!(row.rhs >= 0.0);
        debug_assert_eq!(row.coeffs.len(), n_real);
        data[i * stride..i * stride + n_real].copy_from_slice(&row.coeffs);
        data[i * stride + width] = row.rhs;
        match row.basic_hint {
            Some(col) => basis.push(col),
            None => {
                data[i * stride + next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
    }
    let init_col = basis.clone();
    let mut tab = Tableau {
        m,
        n_real,
        width,
        data,
        reduced: Vec::new(),
        basis,
        init_col,
    };
    let mut budget = 1_000 + 50 * (m + width);

    if n_art > 0 {
        let mut phase_one = vec![0.0; width];
        phase_one[n_real..].iter_mut().for_each(|c| *c = 1.0);
        tab.price(&phase_one);
        tab.run(width, rule, &mut budget)?;
        let infeasibility = -tab.reduced[width];
        let scale = sf.rows.iter().fold(1.0_f64, |acc, r| acc.max(r.rhs));
        if infeasibility > PHASE_ONE_TOL * scale {
            return Ok(StdOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis where possible;
        // rows where that fails are redundant and stay inert.
        for i in 0..m {
            if tab.basis[i] < n_real {
                continue;
            }
            let col = (0..n_real)
                .filter(|&j| tab.at(i, j).abs() > PIVOT_TOL)
                .max_by(|&a, &b| tab.at(i, a).abs().total_cmp(&tab.at(i, b).abs()));
            if let Some(col) = col {
                tab.pivot(i, col);
            }
        }
    }

    let mut cost = sf.cost.clone();
    cost.resize(width, 0.0);
    tab.price(&cost);
    match tab.run(tab.n_real, rule, &mut budget)? {
        PhaseEnd::Unbounded => return Ok(StdOutcome::Unbounded),
        PhaseEnd::Optimal => {}
    }

    let mut x = vec![0.0; n_real];
    for i in 0..m {
        let col = tab.basis[i];
        if col < n_real {
            x[col] = tab.rhs(i).max(0.0);
        }
    }
    // Starting-basis columns are +e_i with zero phase-two cost, so their
    // reduced cost is -y_i.
    let duals = tab.init_col.iter().map(|&c| -tab.reduced[c]).collect();
    Ok(StdOutcome::Optimal { x, duals })
}
