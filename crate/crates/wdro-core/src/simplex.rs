//! A small dense two-phase simplex solver.
//!
//! Every linear program in this crate is tiny (tens of variables), so a
//! dense tableau with Bland's anti-cycling rule is exact enough and keeps
//! the crate free of external solver dependencies.
//!
//! Problems are stated as `min c'x  s.t.  A_i x (= | <= | >=) b_i, x >= 0`.
//! Free variables must be split by the caller.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LpProblem {
    /// Objective coefficients; the solver minimizes.
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
}

const EPS: f64 = 1e-10;

struct Tableau {
    /// rows x (cols + 1); last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.t[row].clone();
        for (r, tr) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = tr[col];
            if factor.abs() > 0.0 {
                for (v, pv) in tr.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimize `cost` over the current feasible tableau, considering only
    /// the first `active_cols` columns as candidates to enter; Bland's rule.
    /// Returns the optimal objective value or `Unbounded`.
    fn optimize(&mut self, cost: &[f64], active_cols: usize) -> Result<f64, LpError> {
        let nrows = self.t.len();
        // reduced-cost row
        let mut z = vec![0.0; self.ncols + 1];
        z[..cost.len()].copy_from_slice(cost);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = if b < cost.len() { cost[b] } else { 0.0 };
            if cb != 0.0 {
                for c in 0..=self.ncols {
                    z[c] -= cb * self.t[r][c];
                }
            }
        }
        loop {
            // entering: first column with negative reduced cost (Bland)
            let enter = (0..active_cols).find(|&c| z[c] < -EPS);
            let Some(col) = enter else {
                return Ok(-z[self.ncols]);
            };
            // leaving: min ratio, ties by smallest basis index (Bland)
            let mut best: Option<(usize, f64)> = None;
            for r in 0..nrows {
                let a = self.t[r][col];
                if a > EPS {
                    let ratio = self.t[r][self.ncols] / a;
                    match best {
                        None => best = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - EPS
                                || (ratio < bratio + EPS && self.basis[r] < self.basis[br])
                            {
                                best = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((row, _)) = best else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
            // refresh reduced costs for the pivot column block
            let piv_row = self.t[row].clone();
            let factor = z[col];
            if factor.abs() > 0.0 {
                for c in 0..=self.ncols {
                    z[c] -= factor * piv_row[c];
                }
            }
        }
    }
}

/// Solve `min c'x  s.t.  constraints, x >= 0`.
pub fn solve(lp: &LpProblem) -> Result<LpSolution, LpError> {
    let nvars = lp.objective.len();
    let nslack = lp
        .constraints
        .iter()
        .filter(|c| c.cmp != Cmp::Eq)
        .count();
    let nrows = lp.constraints.len();
    let ncols = nvars + nslack + nrows; // structural + slack + artificial
    let mut t = vec![vec![0.0; ncols + 1]; nrows];
    let mut basis = vec![0usize; nrows];
    let mut slack_idx = nvars;
    for (r, con) in lp.constraints.iter().enumerate() {
        debug_assert_eq!(con.coeffs.len(), nvars);
        let mut row = vec![0.0; ncols + 1];
        let flip = con.rhs < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        for (c, &a) in con.coeffs.iter().enumerate() {
            row[c] = sgn * a;
        }
        row[ncols] = sgn * con.rhs;
        let cmp = match (con.cmp, flip) {
            (Cmp::Eq, _) => Cmp::Eq,
            (Cmp::Le, false) | (Cmp::Ge, true) => Cmp::Le,
            (Cmp::Ge, false) | (Cmp::Le, true) => Cmp::Ge,
        };
        match cmp {
            Cmp::Le => {
                row[slack_idx] = 1.0;
                slack_idx += 1;
            }
            Cmp::Ge => {
                row[slack_idx] = -1.0;
                slack_idx += 1;
            }
            Cmp::Eq => {}
        }
        // artificial variable, one per row
        row[nvars + nslack + r] = 1.0;
        basis[r] = nvars + nslack + r;
        t[r] = row;
    }

    let mut tab = Tableau { t, basis, ncols };

    // Phase 1: minimize sum of artificials.
    let mut phase1 = vec![0.0; ncols];
    for c in nvars + nslack..ncols {
        phase1[c] = 1.0;
    }
    let art_sum = tab.optimize(&phase1, ncols)?;
    if art_sum > 1e-7 {
        return Err(LpError::Infeasible);
    }
    // Drive any artificials still in the basis out (degenerate rows).
    for r in 0..nrows {
        if tab.basis[r] >= nvars + nslack {
            if let Some(col) = (0..nvars + nslack).find(|&c| tab.t[r][c].abs() > EPS) {
                tab.pivot(r, col);
            }
        }
    }
    // Phase 2: artificial columns are priced at zero and barred from entering.
    let mut cost = vec![0.0; ncols];
    cost[..nvars].copy_from_slice(&lp.objective);
    let value = tab.optimize(&cost, nvars + nslack)?;

    let mut x = vec![0.0; nvars];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < nvars {
            x[b] = tab.t[r][ncols];
        }
    }
    Ok(LpSolution { x, value })
}
