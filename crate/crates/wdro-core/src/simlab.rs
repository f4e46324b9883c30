//! Monte Carlo drivers: scatter experiments comparing the plain and robust
//! regression estimators, limit-regime checks for the radius power rule,
//! coverage of the confidence region, a two-sided inf-sup gap check on
//! finite instances, and the closed-form finite-sample bound.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::estimators::{self, EstimatorError};
use crate::inference::InferenceError;
use crate::ot::{CostSpec, DiscreteDistribution, OtError};
use crate::radius::{self, RadiusError};
use crate::rng::{derive_seed, task_rng};
use crate::worstcase::{variation_norm_regression, EstimatingModel, RegressionModel, RiskError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("the variation term vanishes at theta; its derivative is singular")]
    ZeroVariation,
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Radius(#[from] RadiusError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Ot(#[from] OtError),
}

/// How the ball radius is chosen per replication.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum RadiusRule {
    #[serde(rename_all = "camelCase")]
    Fixed { delta: f64 },
    /// `delta = c * n^{-gamma}`
    #[serde(rename_all = "camelCase")]
    Power { c: f64, gamma: f64 },
    /// Monte Carlo quantile of the profile limit law at the plug-in fit
    #[serde(rename_all = "camelCase")]
    Algorithm1 { alpha: f64, draws: usize },
}

/// Linear-regression data-generating process `y = theta*'x + sigma eps`
/// with equicorrelated Gaussian features.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSpec {
    pub theta_star: Vec<f64>,
    pub rho: f64,
    pub sigma2: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimConfig {
    pub model_spec: ModelSpec,
    pub n: usize,
    pub reps: usize,
    pub radius_rule: RadiusRule,
    pub seed: u64,
    /// norm exponent of the transport cost (default 2)
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    2.0
}

impl SimConfig {
    fn validate(&self) -> Result<(), SimError> {
        let d = self.model_spec.theta_star.len();
        if d == 0 {
            return Err(SimError::InvalidConfig("thetaStar must be nonempty".into()));
        }
        if self.model_spec.rho.abs() >= 1.0 {
            return Err(SimError::InvalidConfig("|rho| must be < 1".into()));
        }
        if d > 1 && self.model_spec.rho <= -1.0 / (d as f64 - 1.0) {
            return Err(SimError::InvalidConfig(
                "rho makes the equicorrelation matrix indefinite".into(),
            ));
        }
        if self.model_spec.sigma2 < 0.0 {
            return Err(SimError::InvalidConfig("sigma2 must be nonnegative".into()));
        }
        if self.reps < 1 {
            return Err(SimError::InvalidConfig("reps must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(SimError::InvalidConfig("n must be at least 2".into()));
        }
        match self.radius_rule {
            RadiusRule::Fixed { delta } if delta < 0.0 => {
                Err(SimError::InvalidConfig("fixed delta must be nonnegative".into()))
            }
            RadiusRule::Power { c, gamma } if c < 0.0 || gamma <= 0.0 => {
                Err(SimError::InvalidConfig("power rule needs c >= 0 and gamma > 0".into()))
            }
            RadiusRule::Algorithm1 { alpha, draws } if !(alpha > 0.0 && alpha < 1.0) || draws == 0 => {
                Err(SimError::InvalidConfig("algorithm1 rule needs alpha in (0,1) and draws > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.model_spec.theta_star.len()
    }

    /// Population feature covariance: equicorrelation `(1-rho) I + rho J`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { self.model_spec.rho })
    }
}

/// Draws one dataset from the configured process.
fn draw_dataset(config: &SimConfig, n: usize, rep_seed: u64, rep: u64) -> Dataset {
    let d = config.dim();
    let factor = crate::rng::covariance_factor(&config.covariance());
    let sigma = config.model_spec.sigma2.sqrt();
    let theta_star = DVector::from_column_slice(&config.model_spec.theta_star);
    let mut rng = task_rng(rep_seed, rep);
    let mut features = DMatrix::zeros(n, d);
    let mut response = DVector::zeros(n);
    for i in 0..n {
        let g = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        let x = &factor * g;
        for j in 0..d {
            features[(i, j)] = x[j];
        }
        let eps: f64 = StandardNormal.sample(&mut rng);
        response[i] = theta_star.dot(&x) + sigma * eps;
    }
    Dataset::from_parts(features, Some(response))
}

fn radius_for(
    config: &SimConfig,
    n: usize,
    data: &Dataset,
    theta_erm: &DVector<f64>,
    rep_seed: u64,
    rep: u64,
) -> Result<f64, SimError> {
    Ok(match config.radius_rule {
        RadiusRule::Fixed { delta } => delta,
        RadiusRule::Power { c, gamma } => c * (n as f64).powf(-gamma),
        RadiusRule::Algorithm1 { alpha, draws } => {
            let model = RegressionModel::new(config.dim(), config.p, f64::INFINITY);
            let samples = data.regression_rows().expect("regression dataset has a response");
            let (_, quant) = radius::estimate_radius(
                &model,
                &samples,
                theta_erm,
                config.p,
                alpha,
                draws,
                derive_seed(rep_seed, rep),
            )?;
            quant.eta / n as f64
        }
    })
}

fn fit_pair(
    config: &SimConfig,
    n: usize,
    rep_seed: u64,
    rep: u64,
) -> Result<(DVector<f64>, DVector<f64>, f64), SimError> {
    let data = draw_dataset(config, n, rep_seed, rep);
    let erm = estimators::fit_erm_ols(&data)?;
    let theta_erm = DVector::from_column_slice(&erm.theta);
    let delta = radius_for(config, n, &data, &theta_erm, rep_seed, rep)?;
    let dro = estimators::fit_sqrt_lasso(&data, delta, config.p)?;
    Ok((theta_erm, DVector::from_column_slice(&dro.theta), delta))
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScatterRow {
    pub theta_erm: Vec<f64>,
    pub theta_dro: Vec<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScatterReport {
    pub rows: Vec<ScatterRow>,
    pub variance_erm: Vec<f64>,
    pub variance_dro: Vec<f64>,
    pub variance_ratio: Vec<f64>,
    pub mean_norm_erm: f64,
    pub mean_norm_dro: f64,
}

fn coordinatewise_variance(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let n = rows.len() as f64;
    (0..d)
        .map(|j| {
            let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            rows.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n
        })
        .collect()
}

/// Fits both estimators on `reps` independent datasets and summarizes the
/// spread of each.
pub fn simulate_scatter(config: &SimConfig) -> Result<ScatterReport, SimError> {
    config.validate()?;
    let rep_seed = derive_seed(config.seed, 0x5ca7);
    let rows: Vec<ScatterRow> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let (erm, dro, delta) = fit_pair(config, config.n, rep_seed, rep)?;
            Ok(ScatterRow {
                theta_erm: erm.as_slice().to_vec(),
                theta_dro: dro.as_slice().to_vec(),
                delta,
            })
        })
        .collect::<Result<_, SimError>>()?;
    let erm_mat: Vec<Vec<f64>> = rows.iter().map(|r| r.theta_erm.clone()).collect();
    let dro_mat: Vec<Vec<f64>> = rows.iter().map(|r| r.theta_dro.clone()).collect();
    let variance_erm = coordinatewise_variance(&erm_mat);
    let variance_dro = coordinatewise_variance(&dro_mat);
    let variance_ratio = variance_dro
        .iter()
        .zip(&variance_erm)
        .map(|(&a, &b)| if b > 0.0 { a / b } else { f64::NAN })
        .collect();
    let nf = rows.len() as f64;
    let norm = |r: &Vec<f64>| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ScatterReport {
        mean_norm_erm: erm_mat.iter().map(norm).sum::<f64>() / nf,
        mean_norm_dro: dro_mat.iter().map(norm).sum::<f64>() / nf,
        rows,
        variance_erm,
        variance_dro,
        variance_ratio,
    })
}

/// First-order bias of the robust estimator relative to the plain one under
/// the `delta = c/n` rule: `b_c = sqrt(c) C^{-1} D_theta V`.
#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BiasTerm {
    pub b: Vec<f64>,
    pub c: f64,
    pub grad_v: Vec<f64>,
}

/// Computes the bias vector from a mean-Jacobian matrix and a variation
/// functional, with the gradient taken by central finite differences at
/// relative step `1e-5 (1 + ||theta||)`.
pub fn bias_term(
    c: f64,
    c_hat: &DMatrix<f64>,
    v: impl Fn(&DVector<f64>) -> f64,
    theta: &DVector<f64>,
) -> Result<BiasTerm, SimError> {
    if c < 0.0 {
        return Err(SimError::InvalidConfig("c must be nonnegative".into()));
    }
    if v(theta) <= 1e-12 {
        return Err(SimError::ZeroVariation);
    }
    let d = theta.len();
    let h = 1e-5 * (1.0 + theta.norm());
    let mut grad = DVector::zeros(d);
    for j in 0..d {
        let mut plus = theta.clone();
        let mut minus = theta.clone();
        plus[j] += h;
        minus[j] -= h;
        grad[j] = (v(&plus) - v(&minus)) / (2.0 * h);
    }
    let lu = c_hat.clone().lu();
    let b = lu
        .solve(&grad)
        .ok_or_else(|| SimError::InvalidConfig("mean Jacobian is singular".into()))?
        * c.sqrt();
    Ok(BiasTerm { b: b.as_slice().to_vec(), c, grad_v: grad.as_slice().to_vec() })
}

/// Bias term for the regression family on a sample: the mean parameter
/// Jacobian of `h` and the cost-weighted variation of the risk.
pub fn bias_term_regression(
    samples: &[DVector<f64>],
    theta: &DVector<f64>,
    p: f64,
    c: f64,
) -> Result<BiasTerm, SimError> {
    let d = theta.len();
    let model = RegressionModel::new(d, p, f64::INFINITY);
    let n = samples.len() as f64;
    let mut c_hat = DMatrix::zeros(d, d);
    for z in samples {
        c_hat += model.jac_theta_h(z, theta);
    }
    c_hat /= n;
    bias_term(
        c,
        &c_hat,
        |t| variation_norm_regression(&model, samples, t).unwrap_or(0.0),
        theta,
    )
}

/// Population bias term of the configured process at `theta*`: the mean
/// Jacobian is twice the feature covariance and the variation is
/// `2 ||theta||_p sigma(theta)` with `sigma(theta)^2` the population
/// prediction error.
pub fn population_bias_term(config: &SimConfig, c: f64) -> Result<BiasTerm, SimError> {
    config.validate()?;
    let cov = config.covariance();
    let c_hat = &cov * 2.0;
    let theta_star = DVector::from_column_slice(&config.model_spec.theta_star);
    let sigma2 = config.model_spec.sigma2;
    let p = config.p;
    let v = |t: &DVector<f64>| {
        let diff = t - &theta_star;
        let mse = diff.dot(&(&cov * &diff)) + sigma2;
        2.0 * crate::norms::p_norm(t.as_slice(), p) * mse.sqrt()
    };
    bias_term(c, &c_hat, v, &theta_star)
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CltRow {
    pub n: usize,
    /// coordinatewise mean of sqrt(n) (theta_dro - theta_erm)
    pub mean_scaled_gap: Vec<f64>,
    /// coordinatewise standard error of that mean
    pub se_scaled_gap: Vec<f64>,
    /// mean of sqrt(n) ||theta_dro - theta_erm||
    pub mean_scaled_gap_norm: f64,
    /// mean of ||theta_dro - theta*||
    pub mean_dist_to_truth: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CltReport {
    pub gamma: f64,
    pub c: f64,
    pub rows: Vec<CltRow>,
    /// least-squares slope of log mean_dist_to_truth against log n
    pub loglog_slope: f64,
    /// negated population bias vector, the regime-(i) centering at gamma = 1
    pub neg_bias: Vec<f64>,
}

/// Runs the power-rule experiment over a ladder of sample sizes and reports
/// the statistics the three limit regimes are judged by.
pub fn simulate_clt(config: &SimConfig, n_values: &[usize]) -> Result<CltReport, SimError> {
    config.validate()?;
    let RadiusRule::Power { c, gamma } = config.radius_rule else {
        return Err(SimError::InvalidConfig("simulate_clt requires the power radius rule".into()));
    };
    if n_values.is_empty() {
        return Err(SimError::InvalidConfig("at least one sample size is required".into()));
    }
    let theta_star = DVector::from_column_slice(&config.model_spec.theta_star);
    let d = config.dim();
    let mut rows = Vec::with_capacity(n_values.len());
    for (ladder, &n) in n_values.iter().enumerate() {
        let rep_seed = derive_seed(config.seed, 0xc17 + ladder as u64);
        let gaps: Vec<(DVector<f64>, f64)> = (0..config.reps as u64)
            .into_par_iter()
            .map(|rep| {
                let (erm, dro, _) = fit_pair(config, n, rep_seed, rep)?;
                let gap = (&dro - &erm) * (n as f64).sqrt();
                let dist = (&dro - &theta_star).norm();
                Ok((gap, dist))
            })
            .collect::<Result<_, SimError>>()?;
        let nf = gaps.len() as f64;
        let mut mean_gap = DVector::zeros(d);
        for (g, _) in &gaps {
            mean_gap += g;
        }
        mean_gap /= nf;
        let se: Vec<f64> = (0..d)
            .map(|j| {
                let var = gaps.iter().map(|(g, _)| (g[j] - mean_gap[j]).powi(2)).sum::<f64>()
                    / (nf * (nf - 1.0).max(1.0));
                var.sqrt()
            })
            .collect();
        rows.push(CltRow {
            n,
            mean_scaled_gap: mean_gap.as_slice().to_vec(),
            se_scaled_gap: se,
            mean_scaled_gap_norm: gaps.iter().map(|(g, _)| g.norm()).sum::<f64>() / nf,
            mean_dist_to_truth: gaps.iter().map(|(_, d)| d).sum::<f64>() / nf,
        });
    }
    // slope of the distance-to-truth decay on the log-log scale
    let loglog_slope = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.mean_dist_to_truth.max(1e-300).ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    } else {
        f64::NAN
    };
    let neg_bias = match population_bias_term(config, c) {
        Ok(b) => b.b.iter().map(|v| -v).collect(),
        Err(SimError::ZeroVariation) => vec![f64::NAN; d],
        Err(e) => return Err(e),
    };
    Ok(CltReport { gamma, c, rows, loglog_slope, neg_bias })
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageRow {
    pub covers_star: bool,
    pub covers_erm: bool,
    pub covers_dro: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub alpha: f64,
    pub rows: Vec<CoverageRow>,
    /// fraction of replications whose region contains all three points
    pub coverage_all: f64,
    pub coverage_star: f64,
    pub coverage_erm: f64,
    pub coverage_dro: f64,
    /// binomial standard error at the joint coverage
    pub standard_error: f64,
}

/// Coverage of the truth and of both estimators by the quadratic-case
/// confidence region, one region per replication.
pub fn simulate_coverage(config: &SimConfig, alpha: f64) -> Result<CoverageReport, SimError> {
    config.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimError::InvalidConfig("alpha must be in (0,1)".into()));
    }
    let theta_star = DVector::from_column_slice(&config.model_spec.theta_star);
    let d = config.dim();
    let model = RegressionModel::new(d, 2.0, f64::INFINITY);
    let rep_seed = derive_seed(config.seed, 0xc0ff);
    let draws = radius::default_draw_count(alpha);
    let rows: Vec<CoverageRow> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let data = draw_dataset(config, config.n, rep_seed, rep);
            let erm = estimators::fit_erm_ols(&data)?;
            let theta_erm = DVector::from_column_slice(&erm.theta);
            let samples = data.regression_rows().expect("regression dataset has a response");
            let (_, ell) = crate::inference::build_region(
                &model,
                &samples,
                &theta_erm,
                2.0,
                alpha,
                1,
                draws,
                derive_seed(rep_seed, rep),
            )?;
            let ell = ell.expect("p = 2 always yields the ellipsoid");
            let delta = ell.level / config.n as f64;
            let dro = estimators::fit_sqrt_lasso(&data, delta, 2.0)?;
            let theta_dro = DVector::from_column_slice(&dro.theta);
            Ok(CoverageRow {
                covers_star: ell.contains(&theta_star),
                covers_erm: ell.contains(&theta_erm),
                covers_dro: ell.contains(&theta_dro),
            })
        })
        .collect::<Result<_, SimError>>()?;
    let nf = rows.len() as f64;
    let frac = |f: fn(&CoverageRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / nf;
    let coverage_all =
        rows.iter().filter(|r| r.covers_star && r.covers_erm && r.covers_dro).count() as f64 / nf;
    let standard_error = (coverage_all * (1.0 - coverage_all) / nf).sqrt();
    Ok(CoverageReport {
        alpha,
        coverage_star: frac(|r| r.covers_star),
        coverage_erm: frac(|r| r.covers_erm),
        coverage_dro: frac(|r| r.covers_dro),
        coverage_all,
        standard_error,
        rows,
    })
}

/// Finite instance for the two-sided game check: a discrete reference
/// distribution, a transport budget, and a box of linear-loss parameters
/// `loss(theta, x) = theta'x`.
#[derive(Debug, Clone)]
pub struct InfSupInstance {
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub delta: f64,
    pub theta_lo: Vec<f64>,
    pub theta_hi: Vec<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InfSupReport {
    pub minmax: f64,
    pub maxmin: f64,
    pub gap: f64,
    pub theta_hat: Vec<f64>,
    /// worst-case weights on the atom support
    pub p_hat: Vec<f64>,
    pub grid_resolution: f64,
    pub epsilon: f64,
    pub nash_ok: bool,
}

fn box_grid(lo: &[f64], hi: &[f64], points: usize) -> Vec<DVector<f64>> {
    let d = lo.len();
    let mut grid = vec![DVector::zeros(d)];
    for j in 0..d {
        let mut next = Vec::with_capacity(grid.len() * points);
        for g in &grid {
            for t in 0..points {
                let mut g = g.clone();
                g[j] = lo[j] + (hi[j] - lo[j]) * t as f64 / (points - 1) as f64;
                next.push(g);
            }
        }
        grid = next;
    }
    grid
}

/// Vertices of the ambiguity polytope: column marginals of the basic
/// feasible couplings within budget. Distinct marginals only.
fn ambiguity_vertices(inst: &InfSupInstance, cost: &CostSpec) -> Vec<Vec<f64>> {
    let k = inst.atoms.len();
    // variables: pi_ij (k*k) plus a slack on the budget row
    let nv = k * k + 1;
    let m = k + 1;
    let mut a = DMatrix::zeros(m, nv);
    let mut rhs = DVector::zeros(m);
    for i in 0..k {
        for j in 0..k {
            a[(i, i * k + j)] = 1.0;
            a[(k, i * k + j)] = cost.eval(&inst.atoms[i], &inst.atoms[j]);
        }
        rhs[i] = inst.weights[i];
    }
    a[(k, nv - 1)] = 1.0;
    rhs[k] = inst.delta;
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let cols: Vec<usize> = (0..nv).collect();
    let mut choose = vec![0usize; m];
    // iterate over all m-subsets of columns
    fn rec(
        cols: &[usize],
        start: usize,
        depth: usize,
        choose: &mut [usize],
        a: &DMatrix<f64>,
        rhs: &DVector<f64>,
        k: usize,
        verts: &mut Vec<Vec<f64>>,
    ) {
        let m = choose.len();
        if depth == m {
            let basis = DMatrix::from_fn(m, m, |r, c| a[(r, choose[c])]);
            let Some(sol) = basis.lu().solve(rhs) else { return };
            if sol.iter().any(|&v| v < -1e-9) {
                return;
            }
            let mut marg = vec![0.0; k];
            for (slot, &col) in choose.iter().enumerate() {
                if col < k * k {
                    marg[col % k] += sol[slot].max(0.0);
                }
            }
            if !verts.iter().any(|v| {
                v.iter().zip(&marg).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max) < 1e-9
            }) {
                verts.push(marg);
            }
            return;
        }
        for idx in start..=cols.len() - (m - depth) {
            choose[depth] = cols[idx];
            rec(cols, idx + 1, depth + 1, choose, a, rhs, k, verts);
        }
    }
    rec(&cols, 0, 0, &mut choose, &a, &rhs, k, &mut verts);
    verts
}

/// Two-sided value of the finite linear game over the ball: outer grid over
/// the parameter box with the worst case from the transport LP, against
/// vertex enumeration of the ambiguity polytope with the inner linear
/// minimum in closed form. Reports the gap and an epsilon-Nash certificate
/// at twice the grid resolution.
pub fn infsup_gap(inst: &InfSupInstance, grid_points: usize) -> Result<InfSupReport, SimError> {
    if inst.atoms.is_empty() || inst.atoms.len() != inst.weights.len() {
        return Err(SimError::InvalidConfig("atoms and weights must align and be nonempty".into()));
    }
    let d = inst.theta_lo.len();
    if inst.theta_hi.len() != d || d == 0 {
        return Err(SimError::InvalidConfig("parameter box must be nonempty".into()));
    }
    if grid_points < 2 {
        return Err(SimError::InvalidConfig("grid needs at least 2 points per dimension".into()));
    }
    let cost = CostSpec::new(2.0, 2.0);
    let pref = DiscreteDistribution::new(inst.atoms.clone(), inst.weights.clone())?;
    let grid = box_grid(&inst.theta_lo, &inst.theta_hi, grid_points);
    let resolution = inst
        .theta_lo
        .iter()
        .zip(&inst.theta_hi)
        .map(|(&l, &h)| (h - l) / (grid_points - 1) as f64)
        .fold(0.0f64, f64::max);

    // the worst-case expectation of theta'x over the ball, via the LP
    let worst = |theta: &DVector<f64>| -> Result<(f64, Vec<f64>), SimError> {
        let f: Vec<f64> = inst
            .atoms
            .iter()
            .map(|a| theta.iter().zip(a).map(|(t, x)| t * x).sum())
            .collect();
        let (v, coupling) =
            crate::ot::worstcase_expectation_primal(&f, &inst.atoms, &pref, inst.delta, &cost)?;
        Ok((v, coupling.col_marginal))
    };

    let mut minmax = f64::INFINITY;
    let mut theta_hat = grid[0].clone();
    for theta in &grid {
        let (v, _) = worst(theta)?;
        if v < minmax {
            minmax = v;
            theta_hat = theta.clone();
        }
    }

    // max over polytope vertices of the inner box minimum (linear loss:
    // per-coordinate corner choice on the mean)
    let verts = ambiguity_vertices(inst, &cost);
    let inner_min = |marg: &[f64]| -> f64 {
        let mean: Vec<f64> = (0..inst.atoms[0].len())
            .map(|j| marg.iter().zip(&inst.atoms).map(|(w, a)| w * a[j]).sum())
            .collect();
        (0..d)
            .map(|j| (inst.theta_lo[j] * mean[j]).min(inst.theta_hi[j] * mean[j]))
            .sum()
    };
    let mut maxmin = f64::NEG_INFINITY;
    let mut p_hat = inst.weights.clone();
    for v in &verts {
        let val = inner_min(v);
        if val > maxmin {
            maxmin = val;
            p_hat = v.clone();
        }
    }

    // epsilon-Nash certificate at (theta_hat, p_hat)
    let epsilon = 2.0 * resolution;
    let payoff = |marg: &[f64], theta: &DVector<f64>| -> f64 {
        (0..inst.atoms[0].len())
            .map(|j| {
                theta[j] * marg.iter().zip(&inst.atoms).map(|(w, a)| w * a[j]).sum::<f64>()
            })
            .sum()
    };
    let at_hat = payoff(&p_hat, &theta_hat);
    let best_response_p = worst(&theta_hat)?.0;
    let best_response_theta =
        grid.iter().map(|t| payoff(&p_hat, t)).fold(f64::INFINITY, f64::min);
    let nash_ok = best_response_p - epsilon <= at_hat + 1e-9
        && at_hat <= best_response_theta + epsilon + 1e-9;

    Ok(InfSupReport {
        minmax,
        maxmin,
        gap: (minmax - maxmin).abs(),
        theta_hat: theta_hat.as_slice().to_vec(),
        p_hat,
        grid_resolution: resolution,
        epsilon,
        nash_ok,
    })
}

/// Closed-form finite-sample excess-risk bound
/// `n^{-1/2} [48 C + 48 L diam^r delta^{-1+1/r} + (3M/sqrt(2)) log(2/eps)]`.
#[allow(clippy::too_many_arguments)]
pub fn finite_sample_bound(
    m: f64,
    l: f64,
    diam: f64,
    r: f64,
    dudley_c: f64,
    delta: f64,
    eps: f64,
    n: usize,
) -> Result<f64, SimError> {
    if m <= 0.0 || l <= 0.0 || diam <= 0.0 || dudley_c <= 0.0 || delta <= 0.0 {
        return Err(SimError::InvalidConfig("all constants must be positive".into()));
    }
    if r < 1.0 {
        return Err(SimError::InvalidConfig("r must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SimError::InvalidConfig("eps must be in (0,1)".into()));
    }
    if n == 0 {
        return Err(SimError::InvalidConfig("n must be positive".into()));
    }
    let c0 = 48.0 * dudley_c;
    let c1 = 48.0 * l * diam.powf(r);
    let c3 = 3.0 * m / 2.0f64.sqrt();
    Ok((n as f64).powf(-0.5) * (c0 + c1 * delta.powf(-1.0 + 1.0 / r) + c3 * (2.0 / eps).ln()))
}
