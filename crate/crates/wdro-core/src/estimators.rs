//! Fitting routines: ordinary least squares, the square-root-Lasso
//! robust regression, and the distributionally robust mean-variance
//! portfolio. All solvers are first-order methods working at desk scale
//! (d up to a few dozen).

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::norms::p_norm;
use crate::optim::minimize_nonsmooth;

/// Relative objective change threshold and window for convergence.
const REL_TOL: f64 = 1e-10;
const TOL_WINDOW: usize = 50;
const MAX_ITERS: usize = 200_000;

#[derive(Debug, thiserror::Error)]
pub enum EstimatorError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("no portfolio meets the robust return target {target}")]
    Infeasible { target: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Result of a fit. `objective_value` re-evaluates exactly at `theta`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub radius: f64,
    /// Set when the root-MSE term vanished (interpolating solution); the
    /// returned theta is the interpolator.
    pub degenerate_residuals: bool,
}

/// Sufficient statistics for squared-loss objectives: `gram = X'X/n`,
/// `cross = X'y/n`, `ysq = y'y/n`. Every objective/gradient evaluation is
/// O(d^2) regardless of n.
struct LsStats {
    gram: DMatrix<f64>,
    cross: DVector<f64>,
    ysq: f64,
}

impl LsStats {
    fn from_dataset(data: &Dataset) -> Result<Self, EstimatorError> {
        let y = data
            .response
            .as_ref()
            .ok_or_else(|| EstimatorError::InvalidInput("dataset has no response column".into()))?;
        let n = data.n() as f64;
        let x = &data.features;
        Ok(LsStats {
            gram: x.transpose() * x / n,
            cross: x.transpose() * y / n,
            ysq: y.dot(y) / n,
        })
    }

    fn mse(&self, theta: &DVector<f64>) -> f64 {
        // numerically this can dip a hair below zero at an interpolator
        (theta.dot(&(&self.gram * theta)) - 2.0 * self.cross.dot(theta) + self.ysq).max(0.0)
    }

    fn grad_mse(&self, theta: &DVector<f64>) -> DVector<f64> {
        2.0 * (&self.gram * theta - &self.cross)
    }
}

/// Ordinary least squares via the normal equations with a Cholesky
/// factorization.
pub fn fit_erm_ols(data: &Dataset) -> Result<FitResult, EstimatorError> {
    let stats = LsStats::from_dataset(data)?;
    let theta = solve_normal_equations(&stats)?;
    let mse = stats.mse(&theta);
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        objective_value: mse,
        iterations: 0,
        converged: true,
        radius: 0.0,
        degenerate_residuals: mse <= 1e-24 * stats.ysq.max(1.0),
    })
}

fn solve_normal_equations(stats: &LsStats) -> Result<DVector<f64>, EstimatorError> {
    let scale = stats.gram.norm();
    let eig = stats.gram.clone().symmetric_eigen();
    if eig.eigenvalues.min() <= 1e-10 * scale {
        return Err(EstimatorError::RankDeficient);
    }
    let chol = stats.gram.clone().cholesky().ok_or(EstimatorError::RankDeficient)?;
    Ok(chol.solve(&stats.cross))
}

/// Square-root Lasso: minimize `sqrt(MSE(theta)) + sqrt(delta) ||theta||_p`
/// for `p` in {1, 2}, by proximal gradient with backtracking, warm-started
/// at the least-squares solution.
pub fn fit_sqrt_lasso(data: &Dataset, delta: f64, p: f64) -> Result<FitResult, EstimatorError> {
    if !(delta >= 0.0) {
        return Err(EstimatorError::InvalidInput(format!("delta must be >= 0, got {delta}")));
    }
    if p != 1.0 && p != 2.0 {
        return Err(EstimatorError::InvalidInput(format!("p must be 1 or 2, got {p}")));
    }
    let stats = LsStats::from_dataset(data)?;
    let pen = delta.sqrt();
    let mut theta = match solve_normal_equations(&stats) {
        Ok(t) => t,
        // rank-deficient designs still admit the penalized problem; start at 0
        Err(_) if pen > 0.0 => DVector::zeros(data.dim()),
        Err(e) => return Err(e),
    };
    let degenerate_floor = 1e-14 * stats.ysq.max(1.0);

    let objective = |t: &DVector<f64>| stats.mse(t).sqrt() + pen * p_norm(t.as_slice(), p);

    let mut obj = objective(&theta);
    let mut step = 1.0 / (2.0 * stats.gram.norm().max(1e-12));
    let mut iterations = 0;
    let mut converged = false;
    let mut window_ref = obj;
    while iterations < MAX_ITERS {
        iterations += 1;
        let mse = stats.mse(&theta);
        if mse <= degenerate_floor {
            return Ok(FitResult {
                theta: theta.as_slice().to_vec(),
                objective_value: objective(&theta),
                iterations,
                converged: true,
                radius: delta,
                degenerate_residuals: true,
            });
        }
        let grad = stats.grad_mse(&theta) / (2.0 * mse.sqrt());
        // backtracking proximal step; accept only when the full objective
        // decreases, which keeps the iteration monotone
        let mut accepted = false;
        let mut t = step * 4.0;
        for _ in 0..60 {
            let cand = prox_pnorm(&(&theta - t * &grad), t * pen, p);
            let cand_obj = objective(&cand);
            if cand_obj <= obj + 1e-18 {
                // require the standard sufficient-decrease bound on the
                // smooth part so the step is sound near the nonsmooth floor
                let diff = &cand - &theta;
                let lin = stats.mse(&cand).sqrt()
                    - (mse.sqrt() + grad.dot(&diff) + diff.dot(&diff) / (2.0 * t));
                if lin <= 1e-12 * (1.0 + obj.abs()) {
                    theta = cand;
                    obj = cand_obj;
                    step = t;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        if iterations % TOL_WINDOW == 0 {
            if (window_ref - obj).abs() <= REL_TOL * (1.0 + window_ref.abs()) {
                converged = true;
                break;
            }
            window_ref = obj;
        }
    }
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        objective_value: objective(&theta),
        iterations,
        converged,
        radius: delta,
        degenerate_residuals: false,
    })
}

/// Proximal operator of `w * ||.||_p` for p in {1, 2}.
fn prox_pnorm(v: &DVector<f64>, w: f64, p: f64) -> DVector<f64> {
    if w <= 0.0 {
        return v.clone();
    }
    if p == 1.0 {
        v.map(|x| {
            if x > w {
                x - w
            } else if x < -w {
                x + w
            } else {
                0.0
            }
        })
    } else {
        let nv = v.norm();
        if nv <= w {
            DVector::zeros(v.len())
        } else {
            v * (1.0 - w / nv)
        }
    }
}

/// Distributionally robust mean-variance portfolio: minimize
/// `(sqrt(var(theta'X)) + sqrt(delta) ||theta||_p)^2` subject to
/// `theta'1 = 1` and `theta'xbar >= t + sqrt(delta) ||theta||_p`.
pub fn fit_dr_mean_variance(
    data: &Dataset,
    delta: f64,
    target_return: f64,
    p: f64,
) -> Result<FitResult, EstimatorError> {
    if !(delta >= 0.0) {
        return Err(EstimatorError::InvalidInput(format!("delta must be >= 0, got {delta}")));
    }
    let d = data.dim();
    if d < 2 {
        return Err(EstimatorError::InvalidInput("need at least two assets".into()));
    }
    let n = data.n() as f64;
    let x = &data.features;
    let xbar = x.row_mean().transpose();
    let centered = {
        let mut c = x.clone();
        for i in 0..c.nrows() {
            for j in 0..d {
                c[(i, j)] -= xbar[j];
            }
        }
        c
    };
    let cov = centered.transpose() * &centered / n;
    let pen = delta.sqrt();

    // null-space parametrization of {theta : theta'1 = 1}:
    // theta = base + N w, columns of N span {v : 1'v = 0}
    let base = DVector::from_element(d, 1.0 / d as f64);
    let nullb = simplex_nullspace(d);

    let robust_return =
        |theta: &DVector<f64>| theta.dot(&xbar) - pen * p_norm(theta.as_slice(), p);
    let violation = |theta: &DVector<f64>| (target_return - robust_return(theta)).max(0.0);
    let raw_obj = |theta: &DVector<f64>| {
        let v = (theta.dot(&(&cov * theta))).max(0.0).sqrt();
        let r = v + pen * p_norm(theta.as_slice(), p);
        r * r
    };

    // feasibility check: maximize the robust return over the affine set
    let best_return = maximize_concave(
        |w| {
            let theta = &base + &nullb * w;
            robust_return(&theta)
        },
        d - 1,
    );
    if best_return < target_return - 1e-9 * (1.0 + target_return.abs()) {
        return Err(EstimatorError::Infeasible { target: target_return });
    }

    // exact-penalty subgradient descent, penalty weight escalated until the
    // returned point is feasible to tolerance
    let scale = cov.norm().max(1.0);
    let mut mu = 10.0 * scale;
    let mut result = None;
    let mut total_iters = 0usize;
    for _round in 0..8 {
        let f = |w: &DVector<f64>| {
            let theta = &base + &nullb * w;
            raw_obj(&theta) + mu * violation(&theta)
        };
        let w0 = match &result {
            Some((w, _)) => {
                let w: &DVector<f64> = w;
                w.clone()
            }
            None => DVector::zeros(d - 1),
        };
        let (w, iters) = minimize_nonsmooth(&f, &w0);
        total_iters += iters;
        let theta = &base + &nullb * &w;
        if violation(&theta) <= 1e-6 {
            result = Some((w, theta));
            break;
        }
        result = Some((w, theta));
        mu *= 10.0;
    }
    let (_, theta) = result.unwrap();
    let viol = violation(&theta);
    Ok(FitResult {
        theta: theta.as_slice().to_vec(),
        objective_value: raw_obj(&theta),
        iterations: total_iters,
        converged: viol <= 1e-6,
        radius: delta,
        degenerate_residuals: false,
    })
}

/// Orthonormal basis of {v in R^d : 1'v = 0} as a d x (d-1) matrix.
fn simplex_nullspace(d: usize) -> DMatrix<f64> {
    // Householder reflection mapping e_1 to 1/sqrt(d); trailing columns
    // span the orthogonal complement of the ones vector.
    let ones = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut v = ones.clone();
    v[0] -= 1.0;
    let norm2 = v.dot(&v);
    let mut q = DMatrix::identity(d, d);
    if norm2 > 1e-30 {
        q -= 2.0 / norm2 * &v * v.transpose();
    }
    q.columns(1, d - 1).into_owned()
}

/// Maximizes a concave function of `dim` variables by subgradient-free
/// compass search with shrinking steps; returns the best value found.
fn maximize_concave(f: impl Fn(&DVector<f64>) -> f64, dim: usize) -> f64 {
    let g = |w: &DVector<f64>| -f(w);
    let (w, _) = minimize_nonsmooth(&g, &DVector::zeros(dim));
    f(&w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn dataset_from(x: DMatrix<f64>, y: DVector<f64>) -> Dataset {
        Dataset::from_parts(x, Some(y))
    }

    #[test]
    fn ols_exact_fit_one_dim() {
        let ds =
            dataset_from(DMatrix::from_row_slice(2, 1, &[1.0, 2.0]), DVector::from_vec(vec![2.0, 4.0]));
        let fit = fit_erm_ols(&ds).unwrap();
        assert_relative_eq!(fit.theta[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ols_recovers_noiseless_linear_model() {
        let mut rng = crate::rng::task_rng(11, 0);
        let n = 40;
        let d = 4;
        let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let truth = DVector::from_column_slice(&[1.5, -0.3, 0.0, 2.0]);
        let y = &x * &truth;
        let fit = fit_erm_ols(&dataset_from(x, y)).unwrap();
        for j in 0..d {
            assert_relative_eq!(fit.theta[j], truth[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn ols_stationarity_on_random_instance() {
        let mut rng = crate::rng::task_rng(12, 0);
        let n = 60;
        let d = 3;
        let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let ds = dataset_from(x, y);
        let fit = fit_erm_ols(&ds).unwrap();
        let stats = LsStats::from_dataset(&ds).unwrap();
        let g = stats.grad_mse(&DVector::from_column_slice(&fit.theta));
        assert!(g.norm() <= 1e-9, "gradient norm {}", g.norm());
    }

    #[test]
    fn ols_rejects_rank_deficiency() {
        // duplicate column
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let err = fit_erm_ols(&dataset_from(x, y)).unwrap_err();
        assert!(matches!(err, EstimatorError::RankDeficient));
    }

    #[test]
    fn sqrt_lasso_zero_radius_matches_ols() {
        let mut rng = crate::rng::task_rng(13, 0);
        let n = 50;
        let d = 3;
        let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 0)] - 0.5 * x[(i, 1)] + 0.1 * (rng.random::<f64>() - 0.5)
        });
        let ds = dataset_from(x, y);
        let ols = fit_erm_ols(&ds).unwrap();
        let sl = fit_sqrt_lasso(&ds, 0.0, 1.0).unwrap();
        for j in 0..d {
            assert_relative_eq!(sl.theta[j], ols.theta[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn sqrt_lasso_large_radius_kills_coefficients() {
        let mut rng = crate::rng::task_rng(14, 0);
        let n = 50;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] + 0.2 * (rng.random::<f64>() - 0.5));
        let ds = dataset_from(x, y);
        // once sqrt(delta) exceeds the data-fit subgradient bound at 0
        // (which is at most 1), the origin is optimal
        let fit = fit_sqrt_lasso(&ds, 9.0, 1.0).unwrap();
        for j in 0..2 {
            assert!(fit.theta[j].abs() < 1e-12, "theta[{j}] = {}", fit.theta[j]);
        }
    }

    #[test]
    fn sqrt_lasso_matches_grid_search_low_dim() {
        let mut rng = crate::rng::task_rng(15, 0);
        for trial in 0..4 {
            let d = 1 + (trial % 2);
            let n = 30;
            let x = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let y = DVector::from_fn(n, |i, _| {
                let mut s = 0.3 * (rng.random::<f64>() - 0.5);
                for j in 0..d {
                    s += (j as f64 + 1.0) * 0.7 * x[(i, j)];
                }
                s
            });
            let ds = dataset_from(x, y);
            let delta = 0.05;
            for &p in &[1.0, 2.0] {
                let fit = fit_sqrt_lasso(&ds, delta, p).unwrap();
                let stats = LsStats::from_dataset(&ds).unwrap();
                let obj = |t: &DVector<f64>| stats.mse(t).sqrt() + delta.sqrt() * p_norm(t.as_slice(), p);
                // grid around the OLS solution
                let ols = DVector::from_column_slice(&fit_erm_ols(&ds).unwrap().theta);
                let mut best = f64::INFINITY;
                let m = if d == 1 { 4001 } else { 401 };
                let width = 1.5;
                let mut idx = vec![0usize; d];
                loop {
                    let t = DVector::from_fn(d, |j, _| {
                        ols[j] - width + 2.0 * width * idx[j] as f64 / (m - 1) as f64
                    });
                    best = best.min(obj(&t));
                    let mut j = 0;
                    loop {
                        idx[j] += 1;
                        if idx[j] < m {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                        if j == d {
                            break;
                        }
                    }
                    if j == d {
                        break;
                    }
                }
                assert!(
                    fit.objective_value <= best + 1e-5,
                    "solver {} vs grid {} (p={p}, d={d})",
                    fit.objective_value,
                    best
                );
            }
        }
    }

    #[test]
    fn sqrt_lasso_solutions_shrink_with_radius() {
        let mut rng = crate::rng::task_rng(16, 0);
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let y = DVector::from_fn(n, |i, _| {
            x[(i, 0)] - 2.0 * x[(i, 2)] + 0.3 * (rng.random::<f64>() - 0.5)
        });
        let ds = dataset_from(x, y);
        for &p in &[1.0, 2.0] {
            let mut prev = f64::INFINITY;
            for &delta in &[0.0, 0.01, 0.05, 0.2, 1.0, 5.0] {
                let fit = fit_sqrt_lasso(&ds, delta, p).unwrap();
                let norm = p_norm(&fit.theta, p);
                assert!(norm <= prev + 1e-5, "norm grew: {norm} > {prev} at delta={delta}");
                prev = norm;
            }
        }
    }

    #[test]
    fn sqrt_lasso_flags_interpolation() {
        // two points, one slope: residuals vanish at the interpolator
        let ds = dataset_from(
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            DVector::from_vec(vec![3.0, 6.0]),
        );
        let fit = fit_sqrt_lasso(&ds, 0.0, 1.0).unwrap();
        assert!(fit.degenerate_residuals);
        assert_relative_eq!(fit.theta[0], 3.0, epsilon = 1e-6);
    }

    #[test]
    fn mean_variance_two_assets_equal_means() {
        let mut rng = crate::rng::task_rng(17, 0);
        let n = 400;
        // equal means, distinct variances, mild correlation
        let x = DMatrix::from_fn(n, 2, |i, j| {
            let _ = i;
            let u: f64 = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random::<f64>() - 0.5;
            if j == 0 {
                u
            } else {
                0.4 * u + 2.0 * v
            }
        });
        let ds = Dataset::from_parts(x.clone(), None);
        let fit = fit_dr_mean_variance(&ds, 0.0, -10.0, 2.0).unwrap();
        // oracle: classical minimum variance weights from the sample
        // covariance, w1 = (s22 - s12) / (s11 + s22 - 2 s12)
        let xbar = x.row_mean();
        let mut s = [[0.0f64; 2]; 2];
        for i in 0..n {
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += (x[(i, a)] - xbar[a]) * (x[(i, b)] - xbar[b]);
                }
            }
        }
        let w1 = (s[1][1] - s[0][1]) / (s[0][0] + s[1][1] - 2.0 * s[0][1]);
        assert_relative_eq!(fit.theta[0], w1, epsilon = 1e-4);
        assert_relative_eq!(fit.theta[0] + fit.theta[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn mean_variance_matches_grid_on_affine_line() {
        let mut rng = crate::rng::task_rng(18, 0);
        let n = 200;
        let x = DMatrix::from_fn(n, 2, |_, j| {
            let base: f64 = rng.random::<f64>() - 0.5;
            base + 0.1 * j as f64
        });
        let ds = Dataset::from_parts(x.clone(), None);
        let delta = 0.02;
        let target = 0.03;
        let fit = match fit_dr_mean_variance(&ds, delta, target, 2.0) {
            Ok(f) => f,
            Err(EstimatorError::Infeasible { .. }) => return, // acceptable draw
            Err(e) => panic!("{e}"),
        };
        // 1-D grid over theta = (w, 1-w)
        let xbar = x.row_mean().transpose();
        let centered = {
            let mut c = x.clone();
            for i in 0..n {
                for j in 0..2 {
                    c[(i, j)] -= xbar[j];
                }
            }
            c
        };
        let cov = centered.transpose() * &centered / n as f64;
        let pen = delta.sqrt();
        let mut best = f64::INFINITY;
        for k in 0..200_001 {
            let w = -5.0 + 10.0 * k as f64 / 200_000.0;
            let theta = DVector::from_column_slice(&[w, 1.0 - w]);
            let feasible = theta.dot(&xbar) - pen * theta.norm() >= target - 1e-9;
            if feasible {
                let r = theta.dot(&(&cov * &theta)).max(0.0).sqrt() + pen * theta.norm();
                best = best.min(r * r);
            }
        }
        assert!(
            fit.objective_value <= best + 1e-4,
            "solver {} vs grid {}",
            fit.objective_value,
            best
        );
        assert!(fit.converged);
    }

    #[test]
    fn mean_variance_detects_infeasible_target() {
        let mut rng = crate::rng::task_rng(19, 0);
        let n = 100;
        let x = DMatrix::from_fn(n, 2, |_, _| 0.01 * (rng.random::<f64>() - 0.5));
        let ds = Dataset::from_parts(x, None);
        let err = fit_dr_mean_variance(&ds, 0.5, 100.0, 2.0).unwrap_err();
        assert!(matches!(err, EstimatorError::Infeasible { .. }));
    }
}
