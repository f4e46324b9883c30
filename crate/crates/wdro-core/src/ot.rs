//! Exact discrete optimal transport and worst-case expectations over
//! Wasserstein balls on finite supports.
//!
//! These are the anchor computations: every duality-based routine elsewhere
//! in the crate can be cross-checked on a finite support against the primal
//! linear program solved here.

use crate::norms::p_norm;
use crate::simplex::{self, Cmp, Constraint, LpProblem};
use crate::univariate::min_convex_halfline;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A finitely supported distribution: weighted atoms in `R^m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, OtError> {
        if atoms.len() != weights.len() {
            return Err(OtError::Malformed(
                "weight count must equal atom count".into(),
            ));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(OtError::Malformed("weights must be finite nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OtError::Malformed(format!(
                "weights must sum to 1 within 1e-12, got {total}"
            )));
        }
        Ok(Self { atoms, weights })
    }

    /// Point mass at `x`.
    pub fn dirac(x: Vec<f64>) -> Self {
        Self {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    /// Uniform empirical measure over the given points.
    pub fn empirical(atoms: Vec<Vec<f64>>) -> Self {
        let n = atoms.len();
        Self {
            weights: vec![1.0 / n as f64; n],
            atoms,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Transportation cost family `c(x, x') = ||w (x - x')||_q^r`, with optional
/// per-coordinate weights (`inf` = immovable coordinate) and the regression
/// variant that charges the last coordinate (the response) `a |dy|^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostSpec {
    /// Norm index, `q >= 1` (may be `inf`).
    pub q: f64,
    /// Power exponent, `r >= 1` (finite).
    pub r: f64,
    /// Per-coordinate nonnegative scales; `inf` marks an immovable coordinate.
    pub coord_weights: Option<Vec<f64>>,
    /// When set, the last coordinate is a response charged `a |dy|^2`
    /// additively; `inf` pins the response.
    pub regression_weight: Option<f64>,
}

impl CostSpec {
    pub fn new(q: f64, r: f64) -> Self {
        assert!(q >= 1.0, "q must be >= 1");
        assert!(r >= 1.0 && r.is_finite(), "r must be finite and >= 1");
        Self {
            q,
            r,
            coord_weights: None,
            regression_weight: None,
        }
    }

    pub fn with_coord_weights(mut self, w: Vec<f64>) -> Self {
        assert!(w.iter().all(|v| *v >= 0.0), "coordinate weights must be >= 0");
        self.coord_weights = Some(w);
        self
    }

    pub fn with_regression_weight(mut self, a: f64) -> Self {
        assert!(a > 0.0, "regression weight a must be in (0, inf]");
        self.regression_weight = Some(a);
        self
    }

    /// Evaluate `c(x, y)`; returns `inf` when an immovable coordinate differs.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), y.len(), "cost arguments must share a dimension");
        let (xf, yf, resp) = match self.regression_weight {
            Some(a) => {
                let k = x.len() - 1;
                let dy = x[k] - y[k];
                let resp = if a.is_infinite() {
                    if dy.abs() > 0.0 {
                        return f64::INFINITY;
                    }
                    0.0
                } else {
                    a * dy * dy
                };
                (&x[..k], &y[..k], resp)
            }
            None => (&x[..], &y[..], 0.0),
        };
        let mut diffs = Vec::with_capacity(xf.len());
        for (j, (a, b)) in xf.iter().zip(yf).enumerate() {
            let d = a - b;
            let w = self
                .coord_weights
                .as_ref()
                .map(|w| w[j])
                .unwrap_or(1.0);
            if w.is_infinite() {
                if d.abs() > 0.0 {
                    return f64::INFINITY;
                }
                diffs.push(0.0);
            } else {
                diffs.push(w * d);
            }
        }
        p_norm(&diffs, self.q).powf(self.r) + resp
    }

    /// Whether the cost is symmetric in its arguments (always true for this
    /// family; kept explicit for the symmetry property tests).
    pub fn is_symmetric(&self) -> bool {
        true
    }
}

/// A transport plan between two finite supports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    /// `matrix[i][j]` is the mass moved from source atom `i` to target atom `j`.
    pub matrix: Vec<Vec<f64>>,
    pub row_marginal: Vec<f64>,
    pub col_marginal: Vec<f64>,
}

impl Coupling {
    /// Expected transport cost under this plan for the given atom locations.
    pub fn expected_cost(
        &self,
        src: &[Vec<f64>],
        dst: &[Vec<f64>],
        cost: &CostSpec,
    ) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m > 0.0 {
                    total += m * cost.eval(&src[i], &dst[j]);
                }
            }
        }
        total
    }

    /// Max violation of the marginal constraints.
    pub fn marginal_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for (i, row) in self.matrix.iter().enumerate() {
            let s: f64 = row.iter().sum();
            err = err.max((s - self.row_marginal[i]).abs());
        }
        let cols = self.matrix.first().map(|r| r.len()).unwrap_or(0);
        for j in 0..cols {
            let s: f64 = self.matrix.iter().map(|r| r[j]).sum();
            err = err.max((s - self.col_marginal[j]).abs());
        }
        err
    }
}

#[derive(Debug, Error)]
pub enum OtError {
    #[error("every coupling has infinite cost: {0}")]
    InfeasibleCost(String),
    #[error("dual objective is unbounded below")]
    UnboundedDual,
    #[error("malformed input: {0}")]
    Malformed(String),
}

/// Exact optimal transport cost between two finite distributions, with an
/// optimal coupling. Entries with infinite cost are omitted from the LP
/// rather than encoded as large numbers.
pub fn transport_cost(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    cost: &CostSpec,
) -> Result<(f64, Coupling), OtError> {
    let k = p.len();
    let kp = q.len();
    if k == 0 || kp == 0 {
        return Err(OtError::Malformed("empty distribution".into()));
    }
    let mut cmat = vec![vec![0.0f64; kp]; k];
    let mut var_of = vec![vec![usize::MAX; kp]; k];
    let mut costs = Vec::new();
    for i in 0..k {
        for j in 0..kp {
            let c = cost.eval(&p.atoms[i], &q.atoms[j]);
            cmat[i][j] = c;
            if c.is_finite() {
                var_of[i][j] = costs.len();
                costs.push((i, j, c));
            }
        }
    }
    let nvars = costs.len();
    if nvars == 0 {
        return Err(OtError::InfeasibleCost(
            "no source-target pair has finite cost".into(),
        ));
    }
    let mut constraints = Vec::with_capacity(k + kp);
    for i in 0..k {
        let mut coeffs = vec![0.0; nvars];
        for j in 0..kp {
            let v = var_of[i][j];
            if v != usize::MAX {
                coeffs[v] = 1.0;
            }
        }
        constraints.push(Constraint {
            coeffs,
            cmp: Cmp::Eq,
            rhs: p.weights[i],
        });
    }
    for j in 0..kp {
        let mut coeffs = vec![0.0; nvars];
        for i in 0..k {
            let v = var_of[i][j];
            if v != usize::MAX {
                coeffs[v] = 1.0;
            }
        }
        constraints.push(Constraint {
            coeffs,
            cmp: Cmp::Eq,
            rhs: q.weights[j],
        });
    }
    let lp = LpProblem {
        objective: costs.iter().map(|&(_, _, c)| c).collect(),
        constraints,
    };
    let sol = simplex::solve(&lp).map_err(|e| match e {
        simplex::LpError::Infeasible => {
            OtError::InfeasibleCost("marginals cannot be coupled at finite cost".into())
        }
        simplex::LpError::Unbounded => OtError::Malformed("unexpected unbounded LP".into()),
    })?;
    let mut matrix = vec![vec![0.0; kp]; k];
    for (&(i, j, _), &x) in costs.iter().zip(&sol.x) {
        matrix[i][j] = x;
    }
    let coupling = Coupling {
        matrix,
        row_marginal: p.weights.clone(),
        col_marginal: q.weights.clone(),
    };
    Ok((sol.value, coupling))
}

/// Worst-case expectation of `f` over the ball `{P : D_c(Pref, P) <= delta}`
/// restricted to the finite candidate support, solved as the primal LP:
/// `max sum_j f(x_j) pi_ij` with row marginals `Pref` and budget
/// `sum c(x_i, x_j) pi_ij <= delta`.
pub fn worstcase_expectation_primal(
    f: &[f64],
    candidates: &[Vec<f64>],
    pref: &DiscreteDistribution,
    delta: f64,
    cost: &CostSpec,
) -> Result<(f64, Coupling), OtError> {
    assert_eq!(f.len(), candidates.len(), "f must be valued on candidates");
    if delta < 0.0 {
        return Err(OtError::Malformed("delta must be nonnegative".into()));
    }
    let k = pref.len();
    let kp = candidates.len();
    let mut var_of = vec![vec![usize::MAX; kp]; k];
    let mut vars = Vec::new();
    for i in 0..k {
        for j in 0..kp {
            let c = cost.eval(&pref.atoms[i], &candidates[j]);
            if c.is_finite() {
                var_of[i][j] = vars.len();
                vars.push((i, j, c));
            }
        }
    }
    let nvars = vars.len();
    if nvars == 0 {
        return Err(OtError::InfeasibleCost(
            "no reference atom can stay or move at finite cost".into(),
        ));
    }
    let mut constraints = Vec::with_capacity(k + 1);
    for i in 0..k {
        let mut coeffs = vec![0.0; nvars];
        for j in 0..kp {
            let v = var_of[i][j];
            if v != usize::MAX {
                coeffs[v] = 1.0;
            }
        }
        constraints.push(Constraint {
            coeffs,
            cmp: Cmp::Eq,
            rhs: pref.weights[i],
        });
    }
    constraints.push(Constraint {
        coeffs: vars.iter().map(|&(_, _, c)| c).collect(),
        cmp: Cmp::Le,
        rhs: delta,
    });
    let lp = LpProblem {
        objective: vars.iter().map(|&(_, j, _)| -f[j]).collect(),
        constraints,
    };
    let sol = simplex::solve(&lp).map_err(|e| match e {
        simplex::LpError::Infeasible => {
            OtError::InfeasibleCost("no coupling satisfies the budget".into())
        }
        simplex::LpError::Unbounded => OtError::Malformed("unexpected unbounded LP".into()),
    })?;
    let mut matrix = vec![vec![0.0; kp]; k];
    let mut col = vec![0.0; kp];
    for (&(i, j, _), &x) in vars.iter().zip(&sol.x) {
        matrix[i][j] = x;
        col[j] += x;
    }
    Ok((
        -sol.value,
        Coupling {
            matrix,
            row_marginal: pref.weights.clone(),
            col_marginal: col,
        },
    ))
}

/// The same worst-case expectation through the dual
/// `inf_{lambda >= 0} { lambda delta + E_Pref[f_lambda] }` with
/// `f_lambda(x) = max_j { f(x_j) - lambda c(x, x_j) }` enumerated over the
/// candidate support. Returns `(value, lambda_star)`.
pub fn worstcase_expectation_dual(
    f: &[f64],
    candidates: &[Vec<f64>],
    pref: &DiscreteDistribution,
    delta: f64,
    cost: &CostSpec,
) -> Result<(f64, f64), OtError> {
    assert_eq!(f.len(), candidates.len(), "f must be valued on candidates");
    if delta < 0.0 {
        return Err(OtError::Malformed("delta must be nonnegative".into()));
    }
    let k = pref.len();
    let kp = candidates.len();
    // c(x, x) = 0 precondition: each reference atom must be able to stay put.
    let mut cmat = vec![vec![f64::INFINITY; kp]; k];
    for i in 0..k {
        let mut can_stay = false;
        for j in 0..kp {
            let c = cost.eval(&pref.atoms[i], &candidates[j]);
            cmat[i][j] = c;
            if c.abs() <= 1e-12 {
                can_stay = true;
            }
        }
        if !can_stay {
            return Err(OtError::Malformed(format!(
                "candidate support must contain reference atom {i} (c(x,x)=0)"
            )));
        }
    }
    let g = |lambda: f64| -> f64 {
        let mut total = lambda * delta;
        for i in 0..k {
            let mut best = f64::NEG_INFINITY;
            for j in 0..kp {
                if cmat[i][j].is_finite() {
                    best = best.max(f[j] - lambda * cmat[i][j]);
                }
            }
            total += pref.weights[i] * best;
        }
        total
    };
    let (lam, value) = min_convex_halfline(|l| g(l), 0.0, 1e-3, 1e-13);
    // the infimum may sit exactly at lambda = 0
    let g0 = g(0.0);
    if g0 <= value {
        return Ok((g0, 0.0));
    }
    if !value.is_finite() {
        return Err(OtError::UnboundedDual);
    }
    Ok((value, lam))
}
