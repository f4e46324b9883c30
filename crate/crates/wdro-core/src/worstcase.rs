//! Robust risk evaluation: dual reformulation of the worst-case expected
//! loss over a transport-cost ball, closed forms for the supported model
//! families, and first-order expansion checks.

use nalgebra::{DMatrix, DVector};

use crate::norms::{p_norm, regression_dual_constant};
use crate::univariate::min_convex_halfline;

/// Errors produced by robust risk routines.
#[derive(Debug, thiserror::Error)]
pub enum RiskError {
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inner supremum is unbounded for every multiplier value")]
    UnboundedInnerSup,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A loss family together with the pieces of calculus the toolkit needs:
/// the loss itself, its data gradient, the estimating function
/// `h = D_theta loss`, and the Jacobians of `h` in data and parameter.
///
/// Samples are stored row-wise; `z` is one sample (for regression the
/// response is the last coordinate).
pub trait EstimatingModel {
    /// Parameter dimension.
    fn param_dim(&self) -> usize;
    /// Sample dimension (including the response for regression).
    fn sample_dim(&self) -> usize;

    fn loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> f64;
    /// Gradient of the loss in the data argument.
    fn grad_x_loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64>;
    /// Estimating function `h(z, theta) = D_theta loss(z, theta)`.
    fn h(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64>;
    /// Jacobian of `h` in the *feature* coordinates of the data argument
    /// (for regression this excludes the response column), `d x d`.
    fn jac_x_h(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;
    /// Jacobian of `h` in `theta`, `d x d`.
    fn jac_theta_h(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64>;

    /// The inner supremum of the dual objective,
    /// `sup_z { sign * loss(z, theta) - lambda * c(z_i, z) }`,
    /// evaluated at a single sample. `sign` is +1 for a loss we maximize
    /// adversarially and -1 when the robust problem maximizes a reward.
    /// Returns `f64::INFINITY` when the sup is unbounded at this lambda.
    fn inner_sup(&self, z: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64;

    /// Smallest multiplier with a finite inner supremum; the dual search
    /// is restricted to `lambda > threshold`.
    fn lambda_threshold(&self, theta: &DVector<f64>) -> f64;
}

/// Linear portfolio reward `theta' x`, robustified by *minimizing* the
/// expected return over the ball; the dual treats `-theta' x` as the loss.
/// Transport cost is `||dx||_q^2` with `1/p + 1/q = 1`.
#[derive(Debug, Clone)]
pub struct PortfolioModel {
    pub dim: usize,
    /// Norm exponent p of the dual (decision-space) norm.
    pub p: f64,
}

impl PortfolioModel {
    pub fn new(dim: usize, p: f64) -> Self {
        Self { dim, p }
    }
}

impl EstimatingModel for PortfolioModel {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        -theta.dot(z)
    }

    fn grad_x_loss(&self, _z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        -theta
    }

    fn h(&self, z: &DVector<f64>, _theta: &DVector<f64>) -> DVector<f64> {
        -z
    }

    fn jac_x_h(&self, _z: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        -DMatrix::identity(self.dim, self.dim)
    }

    fn jac_theta_h(&self, _z: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn inner_sup(&self, z: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
        // sup_x { -theta' x - lambda ||x - z||_q^2 }
        //   = -theta' z + ||theta||_p^2 / (4 lambda)
        let npt = p_norm(theta.as_slice(), self.p);
        if lambda <= 0.0 {
            return if npt == 0.0 { -theta.dot(z) } else { f64::INFINITY };
        }
        -theta.dot(z) + npt * npt / (4.0 * lambda)
    }

    fn lambda_threshold(&self, _theta: &DVector<f64>) -> f64 {
        0.0
    }
}

/// Squared-loss linear regression `(y - theta' x)^2`. Transport cost is
/// `||dx||_q^2 + a |dy|^2`; `a = inf` pins the response.
#[derive(Debug, Clone)]
pub struct RegressionModel {
    /// Number of features (sample vectors carry one extra response coord).
    pub dim: usize,
    pub p: f64,
    /// Relative cost of perturbing the response; `f64::INFINITY` keeps it fixed.
    pub response_weight: f64,
}

impl RegressionModel {
    pub fn new(dim: usize, p: f64, response_weight: f64) -> Self {
        Self { dim, p, response_weight }
    }

    fn split<'a>(&self, z: &'a DVector<f64>) -> (DVector<f64>, f64) {
        (DVector::from_column_slice(&z.as_slice()[..self.dim]), z[self.dim])
    }

    /// The norm constant `s` entering the closed forms:
    /// `s = (||theta||_p^p + a^{-p/2})^{1/p}`.
    pub fn dual_constant(&self, theta: &DVector<f64>) -> f64 {
        regression_dual_constant(theta.as_slice(), self.p, self.response_weight)
    }
}

impl EstimatingModel for RegressionModel {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn sample_dim(&self) -> usize {
        self.dim + 1
    }

    fn loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        let (x, y) = self.split(z);
        let e = y - theta.dot(&x);
        e * e
    }

    fn grad_x_loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        let (x, y) = self.split(z);
        let e = y - theta.dot(&x);
        -2.0 * e * theta
    }

    fn h(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        let (x, y) = self.split(z);
        let e = y - theta.dot(&x);
        -2.0 * e * x
    }

    fn jac_x_h(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
        // d/dx [-2 (y - theta' x) x] = 2 x theta' - 2 e I
        let (x, y) = self.split(z);
        let e = y - theta.dot(&x);
        let mut m = 2.0 * &x * theta.transpose();
        for i in 0..self.dim {
            m[(i, i)] -= 2.0 * e;
        }
        m
    }

    fn jac_theta_h(&self, z: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        let (x, _) = self.split(z);
        2.0 * &x * x.transpose()
    }

    fn inner_sup(&self, z: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
        // sup over (dx, dy) of (e - theta' dx + dy)^2 - lambda(||dx||_q^2 + a dy^2)
        //   = e^2 * lambda / (lambda - s^2)   for lambda > s^2, else +inf.
        let s = self.dual_constant(theta);
        let s2 = s * s;
        let (x, y) = self.split(z);
        let e = y - theta.dot(&x);
        if lambda > s2 {
            e * e * lambda / (lambda - s2)
        } else if e == 0.0 && lambda == s2 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn lambda_threshold(&self, theta: &DVector<f64>) -> f64 {
        let s = self.dual_constant(theta);
        s * s
    }
}

/// Mean estimation with loss `||z - theta||_2^2`; used mostly by the
/// profile-function machinery but included here for completeness.
#[derive(Debug, Clone)]
pub struct MeanModel {
    pub dim: usize,
}

impl EstimatingModel for MeanModel {
    fn param_dim(&self) -> usize {
        self.dim
    }
    fn sample_dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        let d = z - theta;
        d.dot(&d)
    }

    fn grad_x_loss(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        2.0 * (z - theta)
    }

    fn h(&self, z: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
        -2.0 * (z - theta)
    }

    fn jac_x_h(&self, _z: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        -2.0 * DMatrix::identity(self.dim, self.dim)
    }

    fn jac_theta_h(&self, _z: &DVector<f64>, _theta: &DVector<f64>) -> DMatrix<f64> {
        2.0 * DMatrix::identity(self.dim, self.dim)
    }

    fn inner_sup(&self, z: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
        // sup_x { ||x - theta||^2 - lambda ||x - z||^2 }, quadratic cost:
        // finite iff lambda > 1, value ||z - theta||^2 * lambda / (lambda - 1).
        let d = z - theta;
        let dd = d.dot(&d);
        if lambda > 1.0 {
            dd * lambda / (lambda - 1.0)
        } else if dd == 0.0 && lambda == 1.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn lambda_threshold(&self, _theta: &DVector<f64>) -> f64 {
        1.0
    }
}

/// Result of a robust risk evaluation.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RobustRisk {
    pub value: f64,
    pub lambda: f64,
    pub empirical: f64,
}

/// Worst-case expected loss over a ball of radius `delta` around the
/// empirical measure of `samples`, via the one-dimensional dual
/// `inf_{lambda} { lambda delta + mean_i inner_sup(z_i, lambda) }`.
pub fn robust_risk_dual<M: EstimatingModel>(
    model: &M,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    delta: f64,
) -> Result<RobustRisk, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    if theta.len() != model.param_dim() {
        return Err(RiskError::DimensionMismatch { expected: model.param_dim(), got: theta.len() });
    }
    for z in samples {
        if z.len() != model.sample_dim() {
            return Err(RiskError::DimensionMismatch {
                expected: model.sample_dim(),
                got: z.len(),
            });
        }
    }
    if !(delta >= 0.0) {
        return Err(RiskError::InvalidParameter(format!("radius must be >= 0, got {delta}")));
    }
    let n = samples.len() as f64;
    let empirical = samples.iter().map(|z| model.loss(z, theta)).sum::<f64>() / n;
    if delta == 0.0 {
        // The ball degenerates to the empirical measure; the dual infimum
        // sits at lambda -> inf and equals the empirical risk.
        return Ok(RobustRisk { value: empirical, lambda: f64::INFINITY, empirical });
    }
    let threshold = model.lambda_threshold(theta);
    let g = |lam: f64| -> f64 {
        let mut acc = 0.0;
        for z in samples {
            let v = model.inner_sup(z, theta, lam);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            acc += v;
        }
        lam * delta + acc / n
    };
    // scale a first step from the data so the bracket search starts sanely
    let scale = samples
        .iter()
        .map(|z| model.loss(z, theta).abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let step0 = (scale / delta).max(threshold.max(1.0) * 1e-6);
    let (lambda, value) = min_convex_halfline(&g, threshold, step0, 1e-13);
    if !value.is_finite() {
        return Err(RiskError::UnboundedInnerSup);
    }
    Ok(RobustRisk { value, lambda, empirical })
}

/// Closed-form worst-case (smallest) expected portfolio return over the
/// ball: `theta' xbar - sqrt(delta) ||theta||_p`.
pub fn wc_portfolio_return(samples: &[DVector<f64>], theta: &DVector<f64>, p: f64, delta: f64) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let n = samples.len() as f64;
    let mean_ret = samples.iter().map(|z| theta.dot(z)).sum::<f64>() / n;
    Ok(mean_ret - delta.sqrt() * p_norm(theta.as_slice(), p))
}

/// Closed-form worst-case variance of `theta' X` over the ball:
/// `(sqrt(empirical variance) + sqrt(delta) ||theta||_p)^2`.
pub fn wc_variance(samples: &[DVector<f64>], theta: &DVector<f64>, p: f64, delta: f64) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let n = samples.len() as f64;
    let rets: Vec<f64> = samples.iter().map(|z| theta.dot(z)).collect();
    let mean = rets.iter().sum::<f64>() / n;
    let var = rets.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let root = var.sqrt() + delta.sqrt() * p_norm(theta.as_slice(), p);
    Ok(root * root)
}

/// Closed-form worst-case squared-loss regression risk:
/// `(sqrt(mean e^2) + sqrt(delta) s)^2` with `s` the dual norm constant.
pub fn wc_regression_risk(
    model: &RegressionModel,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    delta: f64,
) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let n = samples.len() as f64;
    let mse = samples.iter().map(|z| model.loss(z, theta)).sum::<f64>() / n;
    let s = model.dual_constant(theta);
    let root = mse.sqrt() + delta.sqrt() * s;
    Ok(root * root)
}

/// The variation seminorm driving the first-order expansion of the robust
/// risk: `sqrt(mean ||grad_x loss||_p^2)` in the cost-weighted dual norm.
/// For regression the response perturbation contributes through the same
/// weighting as the transport cost, which collapses to `2 s sqrt(mean e^2)`.
pub fn variation_norm<M: EstimatingModel>(
    model: &M,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    p: f64,
) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let n = samples.len() as f64;
    let acc: f64 = samples
        .iter()
        .map(|z| {
            let g = model.grad_x_loss(z, theta);
            let v = p_norm(g.as_slice(), p);
            v * v
        })
        .sum();
    Ok((acc / n).sqrt())
}

/// Cost-weighted variation norm for regression including the response
/// direction: `2 s sqrt(mean e^2)` where `s` carries the `a^{-p/2}` term.
pub fn variation_norm_regression(
    model: &RegressionModel,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
) -> Result<f64, RiskError> {
    if samples.is_empty() {
        return Err(RiskError::EmptySample);
    }
    let n = samples.len() as f64;
    let mse = samples.iter().map(|z| model.loss(z, theta)).sum::<f64>() / n;
    Ok(2.0 * model.dual_constant(theta) * mse.sqrt())
}

/// Report for a first-order expansion check of the robust risk:
/// `R_delta = R_0 + sqrt(delta) * V + residual(delta)`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionCheck {
    pub delta: f64,
    pub robust: f64,
    pub empirical: f64,
    pub variation: f64,
    pub residual: f64,
}

/// Evaluates the expansion residual at a radius, for any of the closed-form
/// families (portfolio uses the reward convention so the robust value drops
/// below the empirical mean by `sqrt(delta) V`).
pub fn expansion_check_portfolio(
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    p: f64,
    delta: f64,
) -> Result<ExpansionCheck, RiskError> {
    let robust = wc_portfolio_return(samples, theta, p, delta)?;
    let n = samples.len() as f64;
    let empirical = samples.iter().map(|z| theta.dot(z)).sum::<f64>() / n;
    let variation = p_norm(theta.as_slice(), p);
    let residual = robust - (empirical - delta.sqrt() * variation);
    Ok(ExpansionCheck { delta, robust, empirical, variation, residual })
}

/// Expansion residual for the regression risk; equals `delta * s^2` exactly.
pub fn expansion_check_regression(
    model: &RegressionModel,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    delta: f64,
) -> Result<ExpansionCheck, RiskError> {
    let robust = wc_regression_risk(model, samples, theta, delta)?;
    let n = samples.len() as f64;
    let empirical = samples.iter().map(|z| model.loss(z, theta)).sum::<f64>() / n;
    let variation = variation_norm_regression(model, samples, theta)?;
    let residual = robust - empirical - delta.sqrt() * variation;
    Ok(ExpansionCheck { delta, robust, empirical, variation, residual })
}
