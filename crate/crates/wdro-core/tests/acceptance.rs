//! End-to-end acceptance suite. Each test prints one PASS/FAIL line with
//! its measured quantities before asserting, so the full verdict table is
//! visible in the test output.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use wdro_core::dataset::Dataset;
use wdro_core::inference;
use wdro_core::ot::{self, CostSpec, DiscreteDistribution};
use wdro_core::profile;
use wdro_core::radius;
use wdro_core::rng::task_rng;
use wdro_core::simlab::{self, ModelSpec, RadiusRule, SimConfig};
use wdro_core::simplex::{self, Cmp, Constraint, LpProblem};
use wdro_core::worstcase::{self, MeanModel, PortfolioModel, RegressionModel};

fn verdict(idx: usize, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {idx:2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {idx} ({name}) failed: {detail}");
}

#[test]
fn criterion_01_strong_duality() {
    let start = Instant::now();
    let mut worst_gap = 0.0f64;
    for instance in 0..200u64 {
        let mut rng = task_rng(1001, instance);
        let d = 1 + (instance % 2) as usize;
        let k = 2 + rng.random_range(0..5usize); // at most 6 atoms
        let atoms: Vec<Vec<f64>> =
            (0..k).map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let mut weights: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        let pref = DiscreteDistribution::new(atoms.clone(), weights).unwrap();
        // candidate support: the atoms plus a few extra reachable points
        let mut candidates = atoms.clone();
        for _ in 0..3 {
            candidates.push((0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect());
        }
        let f: Vec<f64> = candidates.iter().map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let delta = rng.random::<f64>() * 0.5;
        let cost = CostSpec::new(2.0, 2.0);
        let (primal, _) =
            ot::worstcase_expectation_primal(&f, &candidates, &pref, delta, &cost).unwrap();
        let (dual, _) =
            ot::worstcase_expectation_dual(&f, &candidates, &pref, delta, &cost).unwrap();
        worst_gap = worst_gap.max((primal - dual).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        1,
        "strong-duality",
        worst_gap <= 1e-8 && elapsed < 5.0,
        &format!("max |primal - dual| = {worst_gap:.2e} over 200 instances, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_closed_form_concordance() {
    let start = Instant::now();
    let mut worst = [0.0f64; 3];
    for trial in 0..100u64 {
        let mut rng = task_rng(1002, trial);
        let d = 2 + (trial % 3) as usize;
        let p = [1.0, 2.0, 3.0, f64::INFINITY][(trial % 4) as usize];
        let n = 5 + rng.random_range(0..10usize);
        let theta = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let delta = rng.random::<f64>() * 0.8 + 1e-3;
        let xs: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0)).collect();
        // portfolio: dual of the negated return against the closed form
        let dual = worstcase::robust_risk_dual(&PortfolioModel::new(d, p), &xs, &theta, delta)
            .unwrap()
            .value;
        let closed = -worstcase::wc_portfolio_return(&xs, &theta, p, delta).unwrap();
        worst[0] = worst[0].max((dual - closed).abs());
        // regression with both a pinned and a movable response
        let a = if trial % 2 == 0 { f64::INFINITY } else { 2.5 };
        let model = RegressionModel::new(d, p, a);
        let rows: Vec<DVector<f64>> = xs
            .iter()
            .map(|x| {
                let mut r = x.clone().insert_row(d, 0.0);
                r[d] = theta.dot(x) + rng.random::<f64>() - 0.5;
                r
            })
            .collect();
        let dual = worstcase::robust_risk_dual(&model, &rows, &theta, delta).unwrap().value;
        let closed = worstcase::wc_regression_risk(&model, &rows, &theta, delta).unwrap();
        worst[1] = worst[1].max((dual - closed).abs());
        // variance: pin the response at the empirical mean return, which
        // rewrites the worst-case variance as a pinned-response regression
        let mbar = xs.iter().map(|x| theta.dot(x)).sum::<f64>() / n as f64;
        let pinned = RegressionModel::new(d, p, f64::INFINITY);
        let rows: Vec<DVector<f64>> = xs
            .iter()
            .map(|x| {
                let mut r = x.clone().insert_row(d, 0.0);
                r[d] = mbar;
                r
            })
            .collect();
        let dual = worstcase::robust_risk_dual(&pinned, &rows, &theta, delta).unwrap().value;
        let closed = worstcase::wc_variance(&xs, &theta, p, delta).unwrap();
        worst[2] = worst[2].max((dual - closed).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let max = worst.iter().cloned().fold(0.0f64, f64::max);
    verdict(
        2,
        "closed-form-concordance",
        max <= 1e-8 && elapsed < 10.0,
        &format!(
            "max gaps: portfolio {:.2e}, regression {:.2e}, variance {:.2e}; {elapsed:.2}s",
            worst[0], worst[1], worst[2]
        ),
    );
}

/// 1-D grid-LP projection oracle: minimize transported mass cost onto the
/// mean manifold over a discretized support.
fn grid_lp_profile_1d(samples: &[f64], theta: f64, grid_step: f64) -> f64 {
    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 1.5;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.5;
    let m = ((hi - lo) / grid_step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..m).map(|j| lo + j as f64 * grid_step).collect();
    let n = samples.len();
    let mut objective = Vec::with_capacity(n * m);
    for &x in samples {
        for &g in &grid {
            objective.push((g - x) * (g - x));
        }
    }
    let mut constraints = Vec::new();
    for i in 0..n {
        let mut coeffs = vec![0.0; n * m];
        for j in 0..m {
            coeffs[i * m + j] = 1.0;
        }
        constraints.push(Constraint { coeffs, cmp: Cmp::Eq, rhs: 1.0 / n as f64 });
    }
    let mut moment = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            moment[i * m + j] = grid[j] - theta;
        }
    }
    constraints.push(Constraint { coeffs: moment, cmp: Cmp::Eq, rhs: 0.0 });
    simplex::solve(&LpProblem { objective, constraints }).unwrap().value
}

#[test]
fn criterion_03_profile_closed_form() {
    let start = Instant::now();
    let cost = CostSpec::new(2.0, 2.0);
    let mut worst_closed = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = task_rng(1003, trial);
        let d = 1 + (trial % 4) as usize;
        let n = 5 + rng.random_range(0..35usize);
        let xs: Vec<DVector<f64>> =
            (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0)).collect();
        let mut mean = DVector::zeros(d);
        for x in &xs {
            mean += x;
        }
        mean /= n as f64;
        // theta strictly inside the convex hull: shrink toward the mean
        let theta = &mean * 0.7 + &xs[0] * 0.1 + &xs[1] * 0.2;
        let pv = profile::profile_value(&MeanModel { dim: d }, &xs, &theta, &cost).unwrap();
        let closed = (&mean - &theta).norm_squared();
        worst_closed = worst_closed.max((pv.value - closed).abs());
    }
    let mut worst_lp = 0.0f64;
    for trial in 0..20u64 {
        let mut rng = task_rng(1033, trial);
        let n = 3 + rng.random_range(0..3usize);
        let samples: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let theta = lo + (hi - lo) * (0.25 + 0.5 * rng.random::<f64>());
        let vecs: Vec<DVector<f64>> =
            samples.iter().map(|&x| DVector::from_column_slice(&[x])).collect();
        let pv = profile::profile_value(
            &MeanModel { dim: 1 },
            &vecs,
            &DVector::from_column_slice(&[theta]),
            &cost,
        )
        .unwrap();
        let oracle = grid_lp_profile_1d(&samples, theta, 0.01);
        worst_lp = worst_lp.max((pv.value - oracle).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        3,
        "profile-closed-form",
        worst_closed <= 1e-10 && worst_lp <= 2e-3 && elapsed < 30.0,
        &format!("closed-form gap {worst_closed:.2e}, grid-LP gap {worst_lp:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_04_limit_law_quantile() {
    let start = Instant::now();
    // exact-identity-covariance sample: pairs +-sqrt(n/2) e_j
    let d = 3;
    let n = 2 * d;
    let scale = (n as f64 / 2.0).sqrt();
    let mut samples = Vec::new();
    for j in 0..d {
        let mut up = DVector::zeros(d);
        up[j] = scale;
        samples.push(up.clone());
        samples.push(-up);
    }
    let theta = DVector::zeros(d);
    let (_, quant) =
        radius::estimate_radius(&MeanModel { dim: d }, &samples, &theta, 2.0, 0.1, 100_000, 404)
            .unwrap();
    let chi = ChiSquared::new(d as f64).unwrap().inverse_cdf(0.9);
    let rel = (quant.eta - chi).abs() / chi;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        4,
        "limit-law-quantile",
        rel <= 0.02 && elapsed < 10.0,
        &format!("eta {:.4} vs chi2_3(0.9) {:.4}, relative gap {:.3}%, {elapsed:.2}s", quant.eta, chi, 100.0 * rel),
    );
}

/// Rational-approximation inverse normal CDF (Acklam), the independent
/// oracle for the high-dimensional radius prescription.
fn acklam_inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    let x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // one Halley refinement against the erfc-based CDF residual
    let e = 0.5 * statrs::function::erf::erfc(-x / 2.0f64.sqrt()) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

fn run_wdro(args: &[&str], envs: &[(&str, &str)]) -> (String, i32) {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_wdro"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (String::from_utf8(out.stdout).unwrap(), out.status.code().unwrap_or(-1))
}

#[test]
fn criterion_05_highdim_prescription() {
    let mut worst = 0.0f64;
    let triples: Vec<(usize, usize, f64)> = vec![
        (100, 10, 0.05),
        (100, 10, 0.1),
        (200, 10, 0.05),
        (400, 20, 0.05),
        (400, 20, 0.01),
        (1000, 50, 0.05),
        (1000, 100, 0.02),
        (2500, 100, 0.05),
        (2500, 200, 0.1),
        (5000, 200, 0.05),
        (5000, 500, 0.01),
        (10000, 500, 0.05),
        (10000, 1000, 0.02),
        (50, 5, 0.1),
        (50, 5, 0.05),
        (64, 8, 0.05),
        (128, 16, 0.02),
        (256, 32, 0.05),
        (512, 64, 0.1),
        (1024, 128, 0.05),
    ];
    for &(n, d, alpha) in &triples {
        let (stdout, code) = run_wdro(
            &[
                "radius",
                "--highdim",
                "--n",
                &n.to_string(),
                "--d",
                &d.to_string(),
                "--alpha",
                &alpha.to_string(),
            ],
            &[],
        );
        assert_eq!(code, 0, "radius --highdim exited {code}");
        let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        let got = report["output"]["sqrtDelta"].as_f64().unwrap();
        let pi = std::f64::consts::PI;
        let want = (n as f64).powf(-0.5) * pi / (pi - 2.0)
            * acklam_inverse_normal_cdf(1.0 - alpha / (2.0 * d as f64));
        worst = worst.max((got - want).abs());
    }
    verdict(
        5,
        "highdim-prescription",
        worst <= 1e-8,
        &format!("max |sqrtDelta - oracle| = {worst:.2e} over 20 triples"),
    );
}

#[test]
fn criterion_06_variation_expansion() {
    let mut rng = task_rng(1006, 0);
    let d = 3;
    let n = 50;
    let theta = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    let rows: Vec<DVector<f64>> = (0..n)
        .map(|_| {
            let x = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let mut r = x.clone().insert_row(d, 0.0);
            r[d] = theta.dot(&x) + 0.3 * (rng.random::<f64>() - 0.5);
            r
        })
        .collect();
    let xs: Vec<DVector<f64>> = rows.iter().map(|r| r.rows(0, d).into_owned()).collect();
    let model = RegressionModel::new(d, 2.0, f64::INFINITY);
    let s = model.dual_constant(&theta);
    let bound = s * s * (1.0 + 1e-9) + 1e-12;
    let deltas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let mut worst_ratio = 0.0f64;
    let mut worst_portfolio = 0.0f64;
    for &delta in &deltas {
        let reg = worstcase::expansion_check_regression(&model, &rows, &theta, delta).unwrap();
        worst_ratio = worst_ratio.max(reg.residual.abs() / delta);
        let port = worstcase::expansion_check_portfolio(&xs, &theta, 2.0, delta).unwrap();
        worst_portfolio = worst_portfolio.max(port.residual.abs());
    }
    verdict(
        6,
        "variation-expansion",
        worst_ratio <= bound && worst_portfolio <= 1e-10,
        &format!(
            "max |residual|/delta = {worst_ratio:.6} (bound {bound:.6}), portfolio residual {worst_portfolio:.2e}"
        ),
    );
}

#[test]
fn criterion_07_clt_regimes() {
    let start = Instant::now();
    let spec = ModelSpec { theta_star: vec![0.5, 0.5], rho: 0.0, sigma2: 1.0 };
    // regime (i): gamma = 1 centering at the negated bias vector
    let cfg = SimConfig {
        model_spec: spec.clone(),
        n: 2000,
        reps: 2000,
        radius_rule: RadiusRule::Power { c: 0.25, gamma: 1.0 },
        seed: 7104,
        p: 2.0,
    };
    let rep1 = simlab::simulate_clt(&cfg, &[2000]).unwrap();
    let row = &rep1.rows[0];
    let mut regime1 = true;
    let mut detail1 = String::new();
    for j in 0..2 {
        let dev = (row.mean_scaled_gap[j] - rep1.neg_bias[j]).abs();
        let lim = 3.0 * row.se_scaled_gap[j];
        detail1.push_str(&format!("coord {j}: |{:.5} - ({:.5})| = {dev:.5} vs 3SE {lim:.5}; ",
            row.mean_scaled_gap[j], rep1.neg_bias[j]));
        regime1 &= dev <= lim;
    }
    // regime (ii): gamma = 0.5 rate slope
    let cfg = SimConfig {
        model_spec: spec.clone(),
        n: 400,
        reps: 200,
        radius_rule: RadiusRule::Power { c: 1.0, gamma: 0.5 },
        seed: 7102,
        p: 2.0,
    };
    let rep2 = simlab::simulate_clt(&cfg, &[400, 800, 1600, 3200, 6400, 12800, 25600]).unwrap();
    let regime2 = rep2.loglog_slope >= -0.35 && rep2.loglog_slope <= -0.15;
    // regime (iii): gamma = 2 scaled gap vanishes
    let cfg = SimConfig {
        model_spec: spec,
        n: 6400,
        reps: 200,
        radius_rule: RadiusRule::Power { c: 1.0, gamma: 2.0 },
        seed: 7103,
        p: 2.0,
    };
    let rep3 = simlab::simulate_clt(&cfg, &[6400]).unwrap();
    let gap3 = rep3.rows[0].mean_scaled_gap_norm;
    let regime3 = gap3 < 0.05;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        7,
        "clt-regimes",
        regime1 && regime2 && regime3 && elapsed < 600.0,
        &format!(
            "(i) {detail1}(ii) slope {:.3} in [-0.35,-0.15]: {regime2}; (iii) sqrt(n) gap {gap3:.4} < 0.05: {regime3}; {elapsed:.1}s",
            rep2.loglog_slope
        ),
    );
}

#[test]
fn criterion_08_coverage_and_containment() {
    let start = Instant::now();
    let spec = ModelSpec { theta_star: vec![0.5, 0.5], rho: 0.0, sigma2: 1.0 };
    let theta_star = DVector::from_column_slice(&spec.theta_star);
    let cfg = SimConfig {
        model_spec: spec,
        n: 100,
        reps: 1000,
        radius_rule: RadiusRule::Fixed { delta: 0.0 },
        seed: 8001,
        p: 2.0,
    };
    let model = RegressionModel::new(2, 2.0, f64::INFINITY);
    let alpha = 0.1;
    let draws = radius::default_draw_count(alpha);
    let results: Vec<(bool, bool)> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = task_rng(8002, rep);
            let n = cfg.n;
            let mut features = DMatrix::zeros(n, 2);
            let mut response = DVector::zeros(n);
            for i in 0..n {
                for j in 0..2 {
                    features[(i, j)] =
                        rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                }
                let eps: f64 =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                response[i] = 0.5 * features[(i, 0)] + 0.5 * features[(i, 1)] + eps;
            }
            let data = Dataset::from_parts(features, Some(response));
            let erm = wdro_core::estimators::fit_erm_ols(&data).unwrap();
            let center = DVector::from_column_slice(&erm.theta);
            let samples = data.regression_rows().unwrap();
            let (half, ell) = inference::build_region(
                &model, &samples, &center, 2.0, alpha, 64, draws, 80_000 + rep,
            )
            .unwrap();
            let ell = ell.unwrap();
            // exact containment certificate: the ellipsoid support function
            // must sit inside every halfspace bound
            let d = 2;
            let shape = DMatrix::from_fn(d, d, |i, j| ell.shape[i][j]);
            let contained = half.directions.iter().zip(&half.bounds).all(|(u, &b)| {
                let u = DVector::from_column_slice(u);
                let support = (ell.level * u.dot(&(&shape * &u))).sqrt();
                support <= b + 1e-9 * (1.0 + b.abs())
            });
            (ell.contains(&theta_star), contained)
        })
        .collect();
    let nf = results.len() as f64;
    let coverage = results.iter().filter(|r| r.0).count() as f64 / nf;
    let all_contained = results.iter().all(|r| r.1);
    let se = (coverage * (1.0 - coverage) / nf).sqrt();
    let floor = 0.9 - 3.0 * se;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        8,
        "coverage",
        coverage >= floor && all_contained && elapsed < 300.0,
        &format!("coverage {coverage:.3} >= {floor:.3}; halfspace containment in all reps: {all_contained}; {elapsed:.1}s"),
    );
}

#[test]
fn criterion_09_scatter_experiment() {
    let mut pass = true;
    let mut detail = String::new();
    for rho in [0.95, -0.95] {
        let cfg = SimConfig {
            model_spec: ModelSpec { theta_star: vec![0.5, 0.5], rho, sigma2: 1.0 },
            n: 100,
            reps: 1000,
            radius_rule: RadiusRule::Fixed { delta: 0.05 },
            seed: 9001,
            p: 2.0,
        };
        let rep = simlab::simulate_scatter(&cfg).unwrap();
        let ok = rep.variance_ratio.iter().all(|&r| r < 1.0)
            && rep.mean_norm_dro < rep.mean_norm_erm;
        detail.push_str(&format!(
            "rho {rho}: ratios {:?}, norms dro {:.3} vs erm {:.3}; ",
            rep.variance_ratio
                .iter()
                .map(|r| (r * 1000.0).round() / 1000.0)
                .collect::<Vec<_>>(),
            rep.mean_norm_dro,
            rep.mean_norm_erm
        ));
        pass &= ok;
    }
    // rho = 0: ratio reported without a pass bound
    let cfg = SimConfig {
        model_spec: ModelSpec { theta_star: vec![0.5, 0.5], rho: 0.0, sigma2: 1.0 },
        n: 100,
        reps: 1000,
        radius_rule: RadiusRule::Fixed { delta: 0.05 },
        seed: 9001,
        p: 2.0,
    };
    let rep = simlab::simulate_scatter(&cfg).unwrap();
    detail.push_str(&format!(
        "rho 0 (reported): ratios {:?}",
        rep.variance_ratio.iter().map(|r| (r * 1000.0).round() / 1000.0).collect::<Vec<_>>()
    ));
    verdict(9, "scatter-experiment", pass, &detail);
}

#[test]
fn criterion_10_fairness_test_size() {
    let start = Instant::now();
    let reps = 2000u64;
    let n = 500;
    let theta = DVector::from_column_slice(&[1.0]);
    let rejections: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = task_rng(10_001, rep);
            // equalized groups: the score distribution does not depend on
            // the attribute, so the fairness manifold holds exactly
            let mut features = DMatrix::zeros(n, 1);
            let mut attr = Vec::with_capacity(n);
            let mut label = Vec::with_capacity(n);
            for i in 0..n {
                features[(i, 0)] =
                    rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                attr.push(u8::from(rng.random::<f64>() < 0.5));
                label.push(u8::from(rng.random::<f64>() < 0.7));
            }
            let mut data = Dataset::from_parts(features, None);
            data.attribute = Some(attr);
            data.label = Some(label);
            let rep = inference::fairness_test(&data, &theta, 0.05, 128, 2.0).unwrap();
            usize::from(rep.reject)
        })
        .sum();
    let rate = rejections as f64 / reps as f64;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        10,
        "fairness-test-size",
        (0.03..=0.07).contains(&rate) && elapsed < 600.0,
        &format!("rejection rate {rate:.4} over {reps} reps at alpha 0.05, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_11_infsup_gap() {
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = task_rng(1011, seed);
        let atoms: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.random::<f64>() * 2.0 - 1.0]).collect();
        let mut w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let inst = simlab::InfSupInstance {
            atoms,
            weights: w,
            delta: 0.02 + 0.1 * rng.random::<f64>(),
            theta_lo: vec![-1.0],
            theta_hi: vec![1.0],
        };
        let coarse = simlab::infsup_gap(&inst, 26).unwrap();
        let fine = simlab::infsup_gap(&inst, 51).unwrap();
        let bound_c = 2.0 * coarse.grid_resolution;
        let bound_f = 2.0 * fine.grid_resolution;
        pass &= coarse.gap <= bound_c && fine.gap <= bound_f;
        // one refinement halves the certified bound exactly
        pass &= (bound_f - bound_c / 2.0).abs() <= 1e-12;
        pass &= coarse.nash_ok && fine.nash_ok;
        worst_ratio = worst_ratio.max(fine.gap / bound_f);
    }
    verdict(
        11,
        "infsup-gap",
        pass,
        &format!("all 20 instances within bound; worst gap/bound = {worst_ratio:.3}"),
    );
}

#[test]
fn criterion_12_cli_determinism() {
    // build a small regression CSV
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("data.csv");
    let mut body = String::from("x1,x2,y\n");
    let mut rng = task_rng(1012, 0);
    for _ in 0..30 {
        let a = rng.random::<f64>() * 2.0 - 1.0;
        let b = rng.random::<f64>() * 2.0 - 1.0;
        let y = 0.7 * a - 0.2 * b + 0.1 * (rng.random::<f64>() - 0.5);
        body.push_str(&format!("{a},{b},{y}\n"));
    }
    std::fs::write(&data_path, body).unwrap();
    let cfg_path = dir.path().join("sim.json");
    std::fs::write(
        &cfg_path,
        serde_json::json!({
            "modelSpec": { "thetaStar": [0.5, 0.5], "rho": 0.0, "sigma2": 1.0 },
            "n": 40, "reps": 25,
            "radiusRule": { "type": "algorithm1", "alpha": 0.1, "draws": 300 },
            "seed": 12
        })
        .to_string(),
    )
    .unwrap();
    let clt_cfg_path = dir.path().join("clt.json");
    std::fs::write(
        &clt_cfg_path,
        serde_json::json!({
            "modelSpec": { "thetaStar": [0.5, 0.5], "rho": 0.0, "sigma2": 1.0 },
            "n": 40, "reps": 25,
            "radiusRule": { "type": "power", "c": 1.0, "gamma": 1.0 },
            "seed": 12
        })
        .to_string(),
    )
    .unwrap();
    let data = data_path.to_str().unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let clt_cfg = clt_cfg_path.to_str().unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["radius", "--data", data, "--response", "y", "--theta", "0.7,-0.2", "--alpha", "0.1", "--draws", "500", "--seed", "42"],
        vec!["fit", "--data", data, "--response", "y", "--alpha", "0.1", "--draws", "400", "--seed", "5"],
        vec!["region", "--data", data, "--response", "y", "--alpha", "0.1", "--dirs", "50", "--draws", "400", "--seed", "9"],
        vec!["simulate", "scatter", "--config", cfg],
        vec!["simulate", "clt", "--config", clt_cfg, "--n-values", "40,80"],
    ];
    let mut pass = true;
    let mut detail = String::new();
    for args in &commands {
        let (a, ca) = run_wdro(args, &[("WDRO_THREADS", "1")]);
        let (b, cb) = run_wdro(args, &[("WDRO_THREADS", "1")]);
        let (c, cc) = run_wdro(args, &[("WDRO_THREADS", "2")]);
        let (d, cd) = run_wdro(args, &[("WDRO_THREADS", "4")]);
        let ok = ca == 0 && cb == 0 && cc == 0 && cd == 0 && a == b && a == c && a == d;
        if !ok {
            detail.push_str(&format!("command {:?} differed; ", args[0]));
        }
        pass &= ok;
    }
    if pass {
        detail = format!("{} seeded commands byte-identical across repeats and 1/2/4 threads", commands.len());
    }
    verdict(12, "cli-determinism", pass, &detail);
}
