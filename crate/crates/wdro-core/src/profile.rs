//! The profile function: the minimal transport cost from the empirical
//! measure to the manifold of distributions satisfying the estimating
//! equation, computed through its concave dual in the multiplier.

use nalgebra::{DMatrix, DVector};

use crate::ot::CostSpec;
use crate::simplex::{self, Cmp, Constraint, LpProblem};
use crate::worstcase::{EstimatingModel, MeanModel, RegressionModel};

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero is not interior to the convex hull of the estimating function values")]
    OutsideThetaTilde,
    #[error("the dual inner supremum is unbounded for every nonzero multiplier")]
    InnerSupUnboundedEverywhere,
    #[error("unsupported cost: {0}")]
    UnsupportedCost(String),
}

/// Value of the profile function together with the dual maximizer and the
/// scaled test statistic `n * value`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileValue {
    pub value: f64,
    pub lambda_star: Vec<f64>,
    pub scaled: f64,
}

/// Families that expose a closed-form inner supremum
/// `sup_x { lambda' h(x, theta) - c(X_i, x) }` for the profile dual.
/// Returns the supremum and `h` at the maximizing point (the envelope
/// gradient), or `None` when the supremum is `+inf` at this multiplier.
pub trait ProfileInnerSup: EstimatingModel {
    fn inner_sup_h(
        &self,
        z: &DVector<f64>,
        theta: &DVector<f64>,
        lambda: &DVector<f64>,
        cost: &CostSpec,
    ) -> Option<(f64, DVector<f64>)>;
}

impl ProfileInnerSup for MeanModel {
    fn inner_sup_h(
        &self,
        z: &DVector<f64>,
        theta: &DVector<f64>,
        lambda: &DVector<f64>,
        _cost: &CostSpec,
    ) -> Option<(f64, DVector<f64>)> {
        // h(x) = -2 (x - theta); sup_x { le' (x - theta) - ||x - X_i||^2 }
        // with le = -2 lambda attains at x = X_i + le / 2.
        let le = -2.0 * lambda;
        let val = le.dot(&(z - theta)) + le.dot(&le) / 4.0;
        let xstar = z + &le / 2.0;
        Some((val, -2.0 * (xstar - theta)))
    }
}

impl ProfileInnerSup for RegressionModel {
    fn inner_sup_h(
        &self,
        z: &DVector<f64>,
        theta: &DVector<f64>,
        lambda: &DVector<f64>,
        cost: &CostSpec,
    ) -> Option<(f64, DVector<f64>)> {
        // h(x, y) = -2 (y - theta' x) x; write le = -2 lambda so that
        // lambda' h = (e - theta' u + v)(m + le' u) for perturbations
        // (u, v) of (X_i, Y_i), m = le' X_i, charged ||u||^2 + a v^2.
        let d = self.dim;
        let a = cost.regression_weight.unwrap_or(self.response_weight);
        let le = -2.0 * lambda;
        let x = DVector::from_column_slice(&z.as_slice()[..d]);
        let y = z[d];
        let e = y - theta.dot(&x);
        let m = le.dot(&x);
        // S = I + (theta le' + le theta')/2 - le le'/(4a); finite sup iff S > 0
        let mut s = DMatrix::identity(d, d);
        s += (theta * le.transpose() + &le * theta.transpose()) / 2.0;
        if a.is_finite() {
            s -= &le * le.transpose() / (4.0 * a);
        }
        let chol = s.clone().cholesky()?;
        let mut b = e * &le - m * theta;
        if a.is_finite() {
            b += (m / (2.0 * a)) * &le;
        }
        let ustar = chol.solve(&b) / 2.0;
        let mut val = e * m + b.dot(&ustar) / 2.0;
        let mut vstar = 0.0;
        if a.is_finite() {
            val += m * m / (4.0 * a);
            vstar = (m + le.dot(&ustar)) / (2.0 * a);
        }
        let xstar = &x + &ustar;
        let estar = (y + vstar) - theta.dot(&xstar);
        Some((val, -2.0 * estar * xstar))
    }
}

/// Checks that 0 is interior to the convex hull of the `h` values by
/// solving, for each signed coordinate direction, an LP asking for a hull
/// point a positive distance along that direction.
fn zero_in_hull_interior(hs: &[DVector<f64>]) -> Result<bool, ProfileError> {
    let n = hs.len();
    let d = hs[0].len();
    let scale = hs.iter().map(|h| h.amax()).fold(0.0f64, f64::max).max(1e-30);
    for j in 0..d {
        for sign in [1.0, -1.0] {
            // variables: w_1..w_n, t; maximize t (solver minimizes: cost -t)
            let mut objective = vec![0.0; n + 1];
            objective[n] = -1.0;
            let mut constraints = Vec::with_capacity(d + 1);
            for row in 0..d {
                let mut coeffs: Vec<f64> = hs.iter().map(|h| h[row]).collect();
                coeffs.push(if row == j { -sign * scale } else { 0.0 });
                constraints.push(Constraint { coeffs, cmp: Cmp::Eq, rhs: 0.0 });
            }
            let mut ones = vec![1.0; n];
            ones.push(0.0);
            constraints.push(Constraint { coeffs: ones, cmp: Cmp::Eq, rhs: 1.0 });
            match simplex::solve(&LpProblem { objective, constraints }) {
                Ok(sol) => {
                    if -sol.value <= 1e-9 {
                        return Ok(false);
                    }
                }
                Err(simplex::LpError::Infeasible) => return Ok(false),
                Err(simplex::LpError::Unbounded) => {} // margin unbounded: fine
            }
        }
    }
    Ok(true)
}

/// Profile function value at `theta`, by concave maximization of the dual
/// objective `G(lambda) = -(1/n) sum_i sup_x { lambda' h - c(X_i, x) }`
/// with multi-start gradient ascent.
pub fn profile_value<M: ProfileInnerSup>(
    model: &M,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    cost: &CostSpec,
) -> Result<ProfileValue, ProfileError> {
    if samples.is_empty() {
        return Err(ProfileError::EmptySample);
    }
    if theta.len() != model.param_dim() {
        return Err(ProfileError::DimensionMismatch {
            expected: model.param_dim(),
            got: theta.len(),
        });
    }
    for z in samples {
        if z.len() != model.sample_dim() {
            return Err(ProfileError::DimensionMismatch {
                expected: model.sample_dim(),
                got: z.len(),
            });
        }
    }
    if cost.q != 2.0 || cost.r != 2.0 {
        return Err(ProfileError::UnsupportedCost(format!(
            "profile duals are implemented for q = 2, r = 2 (got q = {}, r = {})",
            cost.q, cost.r
        )));
    }
    let n = samples.len() as f64;
    let d = model.param_dim();

    let hs: Vec<DVector<f64>> = samples.iter().map(|z| model.h(z, theta)).collect();
    if !zero_in_hull_interior(&hs)? {
        return Err(ProfileError::OutsideThetaTilde);
    }
    let mean_h = hs.iter().fold(DVector::zeros(d), |acc, h| acc + h) / n;

    // dual objective and envelope gradient
    let eval = |lam: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let mut val = 0.0;
        let mut grad = DVector::zeros(d);
        for z in samples {
            let (v, h) = model.inner_sup_h(z, theta, lam, cost)?;
            val -= v / n;
            grad -= h / n;
        }
        Some((val, grad))
    };

    let hscale = mean_h.norm().max(1e-3);
    let mut starts: Vec<DVector<f64>> = vec![DVector::zeros(d), -&mean_h];
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = DVector::zeros(d);
            e[j] = sign * hscale;
            starts.push(e);
        }
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut any_progress = false;
    for start in &starts {
        let Some((val, lam, moved)) = ascend(&eval, start) else { continue };
        any_progress |= moved || val > 1e-15;
        if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
            best = Some((val, lam));
        }
    }
    let Some((value, lambda)) = best else {
        return Err(ProfileError::InnerSupUnboundedEverywhere);
    };
    if !any_progress && mean_h.norm() > 1e-8 {
        // the dual could not leave the origin although the estimating
        // equation is violated: every useful multiplier is infeasible
        return Err(ProfileError::InnerSupUnboundedEverywhere);
    }
    let value = value.max(0.0);
    Ok(ProfileValue { value, lambda_star: lambda.as_slice().to_vec(), scaled: n * value })
}

/// Scaled statistic `n * P(P_n, theta)`.
pub fn scaled_profile_stat<M: ProfileInnerSup>(
    model: &M,
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    cost: &CostSpec,
) -> Result<f64, ProfileError> {
    Ok(profile_value(model, samples, theta, cost)?.scaled)
}

/// Gradient ascent with backtracking on a concave objective that returns
/// `None` outside its domain. Returns `(value, argmax, moved)`.
fn ascend(
    eval: &impl Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
    start: &DVector<f64>,
) -> Option<(f64, DVector<f64>, bool)> {
    let mut lam = start.clone();
    let (mut val, mut grad) = eval(&lam)?;
    let mut step = 1.0;
    let mut moved = false;
    for _ in 0..20_000 {
        let gn2 = grad.dot(&grad);
        if gn2.sqrt() <= 1e-13 * (1.0 + val.abs()) {
            break;
        }
        let mut t = step * 2.0;
        let mut accepted = false;
        for _ in 0..80 {
            let cand = &lam + t * &grad;
            if let Some((cv, cg)) = eval(&cand) {
                if cv >= val + 0.25 * t * gn2 {
                    lam = cand;
                    val = cv;
                    grad = cg;
                    step = t;
                    accepted = true;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((val, lam, moved))
}
