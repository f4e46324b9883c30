//! Confidence regions from the profile-function limit law (halfspace
//! approximation via support functions, plus the exact ellipsoid for the
//! quadratic case) and the equal-opportunity fairness test for logistic
//! classifiers.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::Dataset;
use crate::norms::p_norm;
use crate::radius::{self, RadiusError};
use crate::rng::{derive_seed, task_rng};
use crate::univariate::{golden_section_min, min_convex_halfline};
use crate::worstcase::EstimatingModel;

#[derive(Debug, thiserror::Error)]
pub enum InferenceError {
    #[error("mean parameter Jacobian is singular")]
    SingularHessian,
    #[error("empty group: no samples with (a, y) = ({a}, 1)")]
    EmptyGroup { a: u8 },
    #[error("degenerate variance: the limit scale is numerically zero")]
    DegenerateSigma,
    #[error("dataset lacks a required column: {0}")]
    MissingData(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Radius(#[from] RadiusError),
}

/// Intersection of halfspaces in the local coordinates
/// `v = sqrt(n) (theta - center)`: membership requires `u_i'v <= b_i`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct HalfspaceRegion {
    pub center: Vec<f64>,
    pub n: usize,
    pub directions: Vec<Vec<f64>>,
    pub bounds: Vec<f64>,
}

/// Ellipsoid `n (theta - center)' A^{-1} (theta - center) <= level`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EllipsoidRegion {
    pub center: Vec<f64>,
    pub n: usize,
    pub shape: Vec<Vec<f64>>,
    pub level: f64,
}

impl HalfspaceRegion {
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        let c = DVector::from_column_slice(&self.center);
        let v = (theta - c) * (self.n as f64).sqrt();
        self.directions.iter().zip(&self.bounds).all(|(u, &b)| {
            let u = DVector::from_column_slice(u);
            u.dot(&v) <= b + 1e-12 * (1.0 + b.abs())
        })
    }
}

impl EllipsoidRegion {
    fn shape_matrix(&self) -> DMatrix<f64> {
        let d = self.center.len();
        DMatrix::from_fn(d, d, |i, j| self.shape[i][j])
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        let c = DVector::from_column_slice(&self.center);
        let v = theta - c;
        let a = self.shape_matrix();
        let Some(chol) = a.cholesky() else { return false };
        let q = v.dot(&chol.solve(&v)) * self.n as f64;
        q <= self.level + 1e-12 * (1.0 + self.level)
    }

    /// Distance from the center to the boundary along unit direction `u`
    /// in the local `sqrt(n)`-scaled coordinates.
    pub fn ray_exit(&self, u: &DVector<f64>) -> f64 {
        let a = self.shape_matrix();
        let chol = a.cholesky().expect("shape matrix must be positive definite");
        let q = u.dot(&chol.solve(u));
        (self.level / q).sqrt()
    }
}

/// Confidence region at level `1 - alpha` around a plug-in estimate:
/// the halfspace approximation from `k_dirs` sphere directions with
/// support-function bounds `2 sqrt(eta * phi(C^{-1} u))`, and the exact
/// ellipsoid `A = C^{-1} A_phi C^{-1}` when p = 2.
#[allow(clippy::too_many_arguments)]
pub fn build_region<M: EstimatingModel + Sync>(
    model: &M,
    samples: &[DVector<f64>],
    theta_hat: &DVector<f64>,
    p: f64,
    alpha: f64,
    k_dirs: usize,
    radius_draws: usize,
    seed: u64,
) -> Result<(HalfspaceRegion, Option<EllipsoidRegion>), InferenceError> {
    let d = model.param_dim();
    let n = samples.len();
    let law = radius::build_limit_law(model, samples, theta_hat, p)?;
    // C = mean parameter Jacobian of h
    let mut c_hat = DMatrix::zeros(d, d);
    for z in samples {
        c_hat += model.jac_theta_h(z, theta_hat);
    }
    c_hat /= n as f64;
    let eig = c_hat.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|l| l.abs() <= 1e-10 * c_hat.norm()) {
        return Err(InferenceError::SingularHessian);
    }
    let c_lu = c_hat.clone().lu();

    let (_, quant) = radius::estimate_radius(model, samples, theta_hat, p, alpha, radius_draws, seed)?;
    let eta = quant.eta;

    let dir_seed = derive_seed(seed, 0x9e37_79b9_7f4a_7c15);
    let mut directions = Vec::with_capacity(k_dirs);
    let mut bounds = Vec::with_capacity(k_dirs);
    for i in 0..k_dirs {
        let mut rng = task_rng(dir_seed, i as u64);
        let mut u = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let nu = u.norm();
        if nu < 1e-12 {
            u = DVector::from_element(d, (d as f64).powf(-0.5));
        } else {
            u /= nu;
        }
        let cinv_u = c_lu.solve(&u).ok_or(InferenceError::SingularHessian)?;
        let b = 2.0 * (eta * radius::phi_hat(&cinv_u, &law.jacobians, p)).max(0.0).sqrt();
        directions.push(u.as_slice().to_vec());
        bounds.push(b);
    }
    let halfspace = HalfspaceRegion {
        center: theta_hat.as_slice().to_vec(),
        n,
        directions,
        bounds,
    };
    let ellipsoid = if p == 2.0 {
        // A = C^{-1} A_phi C^{-1}; its support function in direction u is
        // sqrt(eta u' A u) = 2 sqrt(eta phi(C^{-1} u)), matching the bounds
        let cinv = c_hat.try_inverse().ok_or(InferenceError::SingularHessian)?;
        let a = &cinv * &law.a_phi * &cinv;
        let shape: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| a[(i, j)]).collect()).collect();
        Some(EllipsoidRegion { center: theta_hat.as_slice().to_vec(), n, shape, level: eta })
    } else {
        None
    };
    Ok((halfspace, ellipsoid))
}

/// Report of the equal-opportunity test for a logistic classifier.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FairnessTestReport {
    pub statistic: f64,
    pub beta_hat: f64,
    pub threshold: f64,
    pub reject: bool,
    pub p11: f64,
    pub p01: f64,
    pub lambda_star: f64,
    pub alpha: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Equal-opportunity fairness test: the scaled projection distance of the
/// sample onto the fairness manifold (group-conditional means of the
/// classifier score equal) against the `beta * chi^2_1` limit.
///
/// The moment function fixes the group probabilities at their empirical
/// values so the manifold is a single linear moment constraint; only the
/// feature vector can be transported (attribute and label are pinned).
pub fn fairness_test(
    data: &Dataset,
    theta: &DVector<f64>,
    alpha: f64,
    inner_grid: usize,
    p: f64,
) -> Result<FairnessTestReport, InferenceError> {
    let attrs = data
        .attribute
        .as_ref()
        .ok_or_else(|| InferenceError::MissingData("attribute column".into()))?;
    let labels = data
        .label
        .as_ref()
        .ok_or_else(|| InferenceError::MissingData("label column".into()))?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InferenceError::InvalidParameter(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if inner_grid < 8 {
        return Err(InferenceError::InvalidParameter("innerGrid must be at least 8".into()));
    }
    let theta_norm2 = theta.dot(theta);
    if theta_norm2 <= 0.0 {
        return Err(InferenceError::InvalidParameter("theta must be nonzero".into()));
    }
    let n = data.n();
    let nf = n as f64;

    // group bookkeeping: scores v_i = theta' x_i, indicators
    let scores: Vec<f64> = (0..n).map(|i| data.features.row(i).transpose().dot(theta)).collect();
    let in11: Vec<bool> = (0..n).map(|i| attrs[i] == 1 && labels[i] == 1).collect();
    let in01: Vec<bool> = (0..n).map(|i| attrs[i] == 0 && labels[i] == 1).collect();
    let n11 = in11.iter().filter(|&&b| b).count();
    let n01 = in01.iter().filter(|&&b| b).count();
    if n11 == 0 {
        return Err(InferenceError::EmptyGroup { a: 1 });
    }
    if n01 == 0 {
        return Err(InferenceError::EmptyGroup { a: 0 });
    }
    let p11 = n11 as f64 / nf;
    let p01 = n01 as f64 / nf;

    // displayed limit-law ingredients, with sample moments plugged in
    let hvals: Vec<f64> = scores.iter().map(|&v| sigmoid(v)).collect();
    let e11h = (0..n).filter(|&i| in11[i]).map(|i| hvals[i]).sum::<f64>() / nf;
    let e01h = (0..n).filter(|&i| in01[i]).map(|i| hvals[i]).sum::<f64>() / nf;
    let zvals: Vec<f64> = (0..n)
        .map(|i| {
            let mut z = 0.0;
            if in11[i] {
                z += hvals[i] * p01 - e01h;
            }
            if in01[i] {
                z += -hvals[i] * p11 + e11h;
            }
            z
        })
        .collect();
    let zbar = zvals.iter().sum::<f64>() / nf;
    let sigma2 = zvals.iter().map(|z| (z - zbar) * (z - zbar)).sum::<f64>() / nf;
    if sigma2 <= 1e-12 {
        return Err(InferenceError::DegenerateSigma);
    }
    let grad_norm2_term = (0..n)
        .map(|i| {
            let w = if in11[i] {
                1.0 / p11
            } else if in01[i] {
                -1.0 / p01
            } else {
                return 0.0;
            };
            // gradient of the sigmoid in x is h(1-h) theta
            let s = hvals[i] * (1.0 - hvals[i]);
            let g = p_norm(theta.as_slice(), p) * s * w;
            g * g
        })
        .sum::<f64>()
        / nf;
    if grad_norm2_term <= 1e-20 {
        return Err(InferenceError::DegenerateSigma);
    }
    let beta_hat = sigma2 / (p01 * p01 * p11 * p11) / grad_norm2_term;

    // scalar-lambda dual of the projection distance: the moment function
    // m = h(v)(I11/p11 - I01/p01) moves only through the score, and the
    // quadratic transport cost decouples orthogonally to theta, so the
    // inner problem is sup_s { c h(v + s) - s^2 / ||theta||^2 } per sample
    let group_weight: Vec<f64> = (0..n)
        .map(|i| {
            if in11[i] {
                1.0 / p11
            } else if in01[i] {
                -1.0 / p01
            } else {
                0.0
            }
        })
        .collect();
    let mbar = (0..n).map(|i| group_weight[i] * hvals[i]).sum::<f64>() / nf;
    let sd_score = {
        let m = scores.iter().sum::<f64>() / nf;
        (scores.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / nf).sqrt().max(1.0)
    };
    let window = 20.0 * sd_score;

    let inner_sup = |c: f64, v: f64| -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        let f = |s: f64| c * sigmoid(v + s) - s * s / theta_norm2;
        // coarse grid, then golden refinement around the best cell
        let m = inner_grid;
        let mut best_idx = 0usize;
        let mut best = f64::NEG_INFINITY;
        for j in 0..m {
            let s = -window + 2.0 * window * j as f64 / (m - 1) as f64;
            let val = f(s);
            if val > best {
                best = val;
                best_idx = j;
            }
        }
        let h = 2.0 * window / (m - 1) as f64;
        let lo = -window + h * best_idx.saturating_sub(1) as f64;
        let hi = (-window + h * (best_idx + 1) as f64).min(window);
        let (_, neg) = golden_section_min(|s| -f(s), lo, hi, 1e-12);
        (-neg).max(best)
    };

    let g = |lam: f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            if group_weight[i] != 0.0 {
                acc += inner_sup(lam * group_weight[i], scores[i]);
            }
        }
        -acc / nf
    };

    // maximize the concave dual over the scalar multiplier, searching in
    // the ascent direction from zero
    let (lambda_star, value) = if mbar.abs() <= 1e-14 {
        (0.0, 0.0)
    } else {
        let dir = -mbar.signum();
        // curvature-based initial step: G ~ -lam mbar - lam^2 kappa
        let kappa = (0..n)
            .map(|i| {
                let w = group_weight[i];
                let s = hvals[i] * (1.0 - hvals[i]);
                w * w * s * s * theta_norm2 / 4.0
            })
            .sum::<f64>()
            / nf;
        let step0 = (mbar.abs() / (2.0 * kappa.max(1e-12))).max(1e-6);
        let (u, neg) = min_convex_halfline(|u| -g(dir * u), 0.0, step0, 1e-11);
        (dir * u, (-neg).max(0.0))
    };
    let statistic = nf * value;
    let chi1 = ChiSquared::new(1.0).unwrap().inverse_cdf(1.0 - alpha);
    let threshold = beta_hat * chi1;
    Ok(FairnessTestReport {
        statistic,
        beta_hat,
        threshold,
        reject: statistic > threshold,
        p11,
        p01,
        lambda_star,
        alpha,
    })
}
