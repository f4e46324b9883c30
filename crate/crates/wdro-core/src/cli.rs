//! Command-line entry point: argument parsing, dataset ingestion, and JSON
//! report emission for every toolkit operation.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on computation errors
//! (with a machine-readable error object on standard output). Every seeded
//! invocation is byte-identical on repeat runs; wall time then goes to
//! standard error so it never perturbs the report.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use crate::dataset::{self, RunReport, SchemaFlags};
use crate::estimators;
use crate::inference;
use crate::ot::{CostSpec, DiscreteDistribution};
use crate::profile;
use crate::radius;
use crate::rng::RNG_FAMILY;
use crate::simlab::{self, SimConfig};
use crate::worstcase::{self, MeanModel, PortfolioModel, RegressionModel};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Data(#[from] dataset::DataError),
    #[error(transparent)]
    Ot(#[from] crate::ot::OtError),
    #[error(transparent)]
    Risk(#[from] worstcase::RiskError),
    #[error(transparent)]
    Estimator(#[from] estimators::EstimatorError),
    #[error(transparent)]
    Profile(#[from] profile::ProfileError),
    #[error(transparent)]
    Radius(#[from] radius::RadiusError),
    #[error(transparent)]
    Inference(#[from] inference::InferenceError),
    #[error(transparent)]
    Sim(#[from] simlab::SimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(#[from] serde_json::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::InvalidArgument(_) => "invalid-argument",
            CliError::Data(_) => "data",
            CliError::Ot(_) => "transport",
            CliError::Risk(_) => "risk",
            CliError::Estimator(_) => "estimator",
            CliError::Profile(_) => "profile",
            CliError::Radius(_) => "radius",
            CliError::Inference(_) => "inference",
            CliError::Sim(_) => "simulation",
            CliError::Io(_) => "io",
            CliError::Csv(_) => "csv",
            CliError::Config(_) => "config",
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "wdro", version, about = "Wasserstein distributionally robust optimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_weight(s: &str) -> Result<f64, String> {
    if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>().map_err(|e| e.to_string())
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    s.split(',').map(|t| t.trim().parse::<usize>().map_err(|e| e.to_string())).collect()
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal transport cost between two empirical distributions
    Ot(OtArgs),
    /// Worst-case risk over the ball, dual evaluation plus closed forms
    Risk(RiskArgs),
    /// Fit an estimator (plain least squares or robust variants)
    Fit(FitArgs),
    /// Profile (projection) distance of the sample to the estimating manifold
    Profile(ProfileArgs),
    /// Ball radius: Monte Carlo quantile or the high-dimensional prescription
    Radius(RadiusArgs),
    /// Confidence region around the plug-in estimate
    Region(RegionArgs),
    /// Equal-opportunity fairness test for a logistic classifier
    TestFairness(FairnessArgs),
    /// Monte Carlo experiments (scatter, clt, coverage, infsup)
    Simulate(SimulateArgs),
    /// Finite-sample excess-risk bound calculator
    Bound(BoundArgs),
}

#[derive(Args, Debug, Serialize)]
struct OtArgs {
    /// CSV of reference atoms (uniform weights)
    #[arg(long)]
    source: PathBuf,
    /// CSV of comparison atoms (uniform weights)
    #[arg(long)]
    target: PathBuf,
    /// norm exponent of the ground cost
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// power of the norm in the cost
    #[arg(long, default_value_t = 2.0)]
    r: f64,
}

#[derive(Args, Debug, Serialize)]
struct RiskArgs {
    #[arg(long)]
    data: PathBuf,
    /// response column (regression model)
    #[arg(long)]
    response: Option<String>,
    /// model family
    #[arg(long, value_parser = ["portfolio", "variance", "regression", "mean"])]
    model: String,
    /// parameter vector, comma-separated
    #[arg(long, value_parser = parse_f64_list)]
    theta: std::vec::Vec<f64>,
    #[arg(long)]
    delta: f64,
    /// dual norm exponent
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// response transport weight for regression ("inf" pins the response)
    #[arg(long, default_value = "inf", value_parser = parse_weight)]
    a: f64,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: Option<String>,
    #[arg(long, default_value = "sqrt-lasso", value_parser = ["sqrt-lasso", "ols", "mean-variance"])]
    model: String,
    /// ball radius; omit to size it from --alpha
    #[arg(long)]
    delta: Option<f64>,
    /// confidence level for the data-driven radius
    #[arg(long)]
    alpha: Option<f64>,
    /// Monte Carlo draws for the data-driven radius
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// target mean return (mean-variance model)
    #[arg(long)]
    target: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct ProfileArgs {
    #[arg(long)]
    data: PathBuf,
    /// response column: with it the regression manifold, without it the mean
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_parser = parse_f64_list)]
    theta: std::vec::Vec<f64>,
    /// response transport weight ("inf" pins the response)
    #[arg(long, default_value = "inf", value_parser = parse_weight)]
    a: f64,
}

#[derive(Args, Debug, Serialize)]
struct RadiusArgs {
    /// closed-form high-dimensional prescription instead of Monte Carlo
    #[arg(long, default_value_t = false)]
    highdim: bool,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: f64,
    /// Monte Carlo mode: regression CSV
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    response: Option<String>,
    #[arg(long, value_parser = parse_f64_list)]
    theta: Option<std::vec::Vec<f64>>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct RegionArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long)]
    alpha: f64,
    /// number of halfspace directions
    #[arg(long, default_value_t = 1000)]
    dirs: usize,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct FairnessArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    attribute: String,
    #[arg(long)]
    label: String,
    #[arg(long, value_parser = parse_f64_list)]
    theta: std::vec::Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 512)]
    inner_grid: usize,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// experiment kind
    #[arg(value_parser = ["scatter", "clt", "coverage", "infsup"])]
    kind: String,
    /// JSON config (simulation schema; infsup uses the instance schema)
    #[arg(long)]
    config: PathBuf,
    /// coverage level (coverage experiment)
    #[arg(long)]
    alpha: Option<f64>,
    /// sample-size ladder for the clt experiment
    #[arg(long, value_parser = parse_usize_list)]
    n_values: Option<std::vec::Vec<usize>>,
    /// grid points per dimension (infsup experiment)
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// optional CSV of per-replication values
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct BoundArgs {
    /// uniform loss bound M
    #[arg(long)]
    m: f64,
    /// Lipschitz constant L
    #[arg(long)]
    l: f64,
    /// diameter of the sample space
    #[arg(long)]
    diam: f64,
    /// cost exponent r
    #[arg(long)]
    r: f64,
    /// Dudley entropy-integral constant
    #[arg(long)]
    dudley_c: f64,
    #[arg(long)]
    delta: f64,
    /// tail probability
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    n: usize,
}

/// JSON serializer writing every float with 17 significant digits so the
/// reports are diff-stable and lossless.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json(value: &impl Serialize) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value.serialize(&mut ser).expect("report serialization cannot fail");
    String::from_utf8(out).expect("serialized JSON is UTF-8")
}

fn json_value(value: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(value).expect("value serialization cannot fail")
}

struct CommandOutput {
    config: serde_json::Value,
    output: serde_json::Value,
    seed: Option<u64>,
}

fn theta_vec(theta: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(theta)
}

fn run_ot(args: &OtArgs) -> Result<CommandOutput, CliError> {
    let src = dataset::load_dataset(&args.source, &SchemaFlags::default())?;
    let tgt = dataset::load_dataset(&args.target, &SchemaFlags::default())?;
    let p = DiscreteDistribution::empirical(src.feature_rows().iter().map(|r| r.as_slice().to_vec()).collect());
    let q = DiscreteDistribution::empirical(tgt.feature_rows().iter().map(|r| r.as_slice().to_vec()).collect());
    let cost = CostSpec::new(args.q, args.r);
    let (value, coupling) = crate::ot::transport_cost(&p, &q, &cost)?;
    let output = serde_json::json!({
        "cost": value,
        "wassersteinDistance": value.powf(1.0 / args.r),
        "marginalError": coupling.marginal_error(),
    });
    Ok(CommandOutput { config: json_value(args), output, seed: None })
}

fn run_risk(args: &RiskArgs) -> Result<CommandOutput, CliError> {
    let schema = SchemaFlags { response: args.response.clone(), ..Default::default() };
    let data = dataset::load_dataset(&args.data, &schema)?;
    let theta = theta_vec(&args.theta);
    let d = theta.len();
    let (samples, dual, closed) = match args.model.as_str() {
        "portfolio" => {
            let samples = data.feature_rows();
            let model = PortfolioModel::new(d, args.p);
            let dual = worstcase::robust_risk_dual(&model, &samples, &theta, args.delta)?;
            let closed = -worstcase::wc_portfolio_return(&samples, &theta, args.p, args.delta)?;
            (samples.len(), dual, Some(closed))
        }
        "variance" => {
            let samples = data.feature_rows();
            let closed = worstcase::wc_variance(&samples, &theta, args.p, args.delta)?;
            // the variance objective is not an expectation of a fixed loss,
            // so only the closed form applies; report it in both slots
            let dual = worstcase::RobustRisk {
                value: closed,
                lambda: f64::NAN,
                empirical: worstcase::wc_variance(&samples, &theta, args.p, 0.0)?,
            };
            (samples.len(), dual, Some(closed))
        }
        "regression" => {
            let samples = data
                .regression_rows()
                .ok_or_else(|| CliError::InvalidArgument("regression requires --response".into()))?;
            let model = RegressionModel::new(d, args.p, args.a);
            let dual = worstcase::robust_risk_dual(&model, &samples, &theta, args.delta)?;
            let closed = worstcase::wc_regression_risk(&model, &samples, &theta, args.delta)?;
            (samples.len(), dual, Some(closed))
        }
        "mean" => {
            let samples = data.feature_rows();
            let model = MeanModel { dim: d };
            let dual = worstcase::robust_risk_dual(&model, &samples, &theta, args.delta)?;
            let closed = {
                let emp = dual.empirical.max(0.0).sqrt() + args.delta.sqrt();
                emp * emp
            };
            (samples.len(), dual, Some(closed))
        }
        other => return Err(CliError::InvalidArgument(format!("unknown model {other}"))),
    };
    let output = serde_json::json!({
        "n": samples,
        "dualValue": dual.value,
        "lambdaStar": if dual.lambda.is_finite() { serde_json::json!(dual.lambda) } else { serde_json::Value::Null },
        "empiricalRisk": dual.empirical,
        "closedForm": closed,
    });
    Ok(CommandOutput { config: json_value(args), output, seed: None })
}

fn run_fit(args: &FitArgs) -> Result<CommandOutput, CliError> {
    let schema = SchemaFlags { response: args.response.clone(), ..Default::default() };
    let data = dataset::load_dataset(&args.data, &schema)?;
    let mut radius_source = serde_json::Value::Null;
    let mut seed_used = None;
    let delta = match (args.delta, args.alpha) {
        (Some(delta), None) => delta,
        (None, Some(alpha)) => {
            // size the ball from the profile limit-law quantile at the
            // plug-in fit, delta = eta / n
            if args.model == "mean-variance" {
                return Err(CliError::InvalidArgument(
                    "--alpha radius selection is only wired for regression fits".into(),
                ));
            }
            let erm = estimators::fit_erm_ols(&data)?;
            let theta = theta_vec(&erm.theta);
            let samples = data
                .regression_rows()
                .ok_or_else(|| CliError::InvalidArgument("--alpha requires --response".into()))?;
            let model = RegressionModel::new(data.dim(), args.p, f64::INFINITY);
            let draws = args.draws.unwrap_or_else(|| radius::default_draw_count(alpha));
            let (_, quant) =
                radius::estimate_radius(&model, &samples, &theta, args.p, alpha, draws, args.seed)?;
            seed_used = Some(args.seed);
            let delta = quant.eta / data.n() as f64;
            radius_source = serde_json::json!({
                "method": "profile-quantile",
                "alpha": alpha,
                "draws": draws,
                "eta": quant.eta,
                "delta": delta,
                "quantileIndex": quant.quantile_index,
                "ridgedSigma": quant.ridged_sigma,
            });
            delta
        }
        (Some(_), Some(_)) => {
            return Err(CliError::InvalidArgument("--delta and --alpha are mutually exclusive".into()))
        }
        (None, None) => {
            return Err(CliError::InvalidArgument("one of --delta or --alpha is required".into()))
        }
    };
    let fit = match args.model.as_str() {
        "ols" => estimators::fit_erm_ols(&data)?,
        "sqrt-lasso" => estimators::fit_sqrt_lasso(&data, delta, args.p)?,
        "mean-variance" => {
            let target = args.target.ok_or_else(|| {
                CliError::InvalidArgument("mean-variance requires --target".into())
            })?;
            estimators::fit_dr_mean_variance(&data, delta, target, args.p)?
        }
        other => return Err(CliError::InvalidArgument(format!("unknown model {other}"))),
    };
    let mut output = json_value(&fit);
    output["radiusSource"] = radius_source;
    Ok(CommandOutput { config: json_value(args), output, seed: seed_used })
}

fn run_profile(args: &ProfileArgs) -> Result<CommandOutput, CliError> {
    let schema = SchemaFlags { response: args.response.clone(), ..Default::default() };
    let data = dataset::load_dataset(&args.data, &schema)?;
    let theta = theta_vec(&args.theta);
    let cost = CostSpec::new(2.0, 2.0);
    let value = if args.response.is_some() {
        let samples = data.regression_rows().expect("schema declared a response");
        let model = RegressionModel::new(data.dim(), 2.0, args.a);
        let cost = if args.a.is_finite() { cost.with_regression_weight(args.a) } else { cost };
        profile::profile_value(&model, &samples, &theta, &cost)?
    } else {
        let samples = data.feature_rows();
        profile::profile_value(&MeanModel { dim: data.dim() }, &samples, &theta, &cost)?
    };
    let output = serde_json::json!({
        "value": value.value,
        "scaledStatistic": value.scaled,
        "lambdaStar": value.lambda_star,
        "n": data.n(),
    });
    Ok(CommandOutput { config: json_value(args), output, seed: None })
}

fn run_radius(args: &RadiusArgs) -> Result<CommandOutput, CliError> {
    if args.highdim {
        let (n, d) = match (args.n, args.d) {
            (Some(n), Some(d)) => (n, d),
            _ => return Err(CliError::InvalidArgument("--highdim requires --n and --d".into())),
        };
        let (sqrt_delta, delta, warned) = radius::sqrt_lasso_radius(n, d, args.alpha)?;
        let output = serde_json::json!({
            "sqrtDelta": sqrt_delta,
            "delta": delta,
            "alphaWarning": warned,
        });
        return Ok(CommandOutput { config: json_value(args), output, seed: None });
    }
    let (Some(path), Some(theta)) = (&args.data, &args.theta) else {
        return Err(CliError::InvalidArgument(
            "Monte Carlo mode requires --data and --theta (or pass --highdim)".into(),
        ));
    };
    let schema = SchemaFlags { response: args.response.clone(), ..Default::default() };
    let data = dataset::load_dataset(path, &schema)?;
    let theta = theta_vec(theta);
    let draws = args.draws.unwrap_or_else(|| radius::default_draw_count(args.alpha));
    let quant = if args.response.is_some() {
        let samples = data.regression_rows().expect("schema declared a response");
        let model = RegressionModel::new(data.dim(), args.p, f64::INFINITY);
        radius::estimate_radius(&model, &samples, &theta, args.p, args.alpha, draws, args.seed)?.1
    } else {
        let samples = data.feature_rows();
        let model = MeanModel { dim: data.dim() };
        radius::estimate_radius(&model, &samples, &theta, args.p, args.alpha, draws, args.seed)?.1
    };
    let output = serde_json::json!({
        "eta": quant.eta,
        "delta": quant.eta / data.n() as f64,
        "draws": quant.k,
        "quantileIndex": quant.quantile_index,
        "ridgedSigma": quant.ridged_sigma,
    });
    Ok(CommandOutput { config: json_value(args), output, seed: Some(args.seed) })
}

fn run_region(args: &RegionArgs) -> Result<CommandOutput, CliError> {
    let schema = SchemaFlags { response: Some(args.response.clone()), ..Default::default() };
    let data = dataset::load_dataset(&args.data, &schema)?;
    let erm = estimators::fit_erm_ols(&data)?;
    let theta = theta_vec(&erm.theta);
    let samples = data.regression_rows().expect("schema declared a response");
    let model = RegressionModel::new(data.dim(), args.p, f64::INFINITY);
    let draws = args.draws.unwrap_or_else(|| radius::default_draw_count(args.alpha));
    let (half, ell) = inference::build_region(
        &model, &samples, &theta, args.p, args.alpha, args.dirs, draws, args.seed,
    )?;
    let output = serde_json::json!({
        "center": theta.as_slice(),
        "halfspace": json_value(&half),
        "ellipsoid": ell.as_ref().map(json_value),
    });
    Ok(CommandOutput { config: json_value(args), output, seed: Some(args.seed) })
}

fn run_fairness(args: &FairnessArgs) -> Result<CommandOutput, CliError> {
    let schema = SchemaFlags {
        attribute: Some(args.attribute.clone()),
        label: Some(args.label.clone()),
        ..Default::default()
    };
    let data = dataset::load_dataset(&args.data, &schema)?;
    let theta = theta_vec(&args.theta);
    let report = inference::fairness_test(&data, &theta, args.alpha, args.inner_grid, args.p)?;
    Ok(CommandOutput { config: json_value(args), output: json_value(&report), seed: None })
}

fn write_csv(path: &PathBuf, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, serde::Deserialize)]
#[serde(rename_all = "camelCase")]
struct InfSupConfig {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
    delta: f64,
    theta_lo: Vec<f64>,
    theta_hi: Vec<f64>,
}

fn run_simulate(args: &SimulateArgs) -> Result<CommandOutput, CliError> {
    let raw = std::fs::read_to_string(&args.config)?;
    if args.kind == "infsup" {
        let cfg: InfSupConfig = serde_json::from_str(&raw)?;
        let inst = simlab::InfSupInstance {
            atoms: cfg.atoms,
            weights: cfg.weights,
            delta: cfg.delta,
            theta_lo: cfg.theta_lo,
            theta_hi: cfg.theta_hi,
        };
        let report = simlab::infsup_gap(&inst, args.grid)?;
        let config = serde_json::from_str(&raw)?;
        return Ok(CommandOutput { config, output: json_value(&report), seed: None });
    }
    let cfg: SimConfig = serde_json::from_str(&raw)?;
    let seed = Some(cfg.seed);
    let config = json_value(&cfg);
    let output = match args.kind.as_str() {
        "scatter" => {
            let report = simlab::simulate_scatter(&cfg)?;
            if let Some(path) = &args.csv {
                let rows: Vec<Vec<f64>> = report
                    .rows
                    .iter()
                    .map(|r| {
                        let mut row = r.theta_erm.clone();
                        row.extend_from_slice(&r.theta_dro);
                        row.push(r.delta);
                        row
                    })
                    .collect();
                let d = cfg.dim();
                let mut header: Vec<String> = (0..d).map(|j| format!("erm_{j}")).collect();
                header.extend((0..d).map(|j| format!("dro_{j}")));
                header.push("delta".into());
                let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
                write_csv(path, &header_refs, &rows)?;
            }
            json_value(&report)
        }
        "clt" => {
            let ladder = args.n_values.clone().unwrap_or_else(|| vec![cfg.n]);
            json_value(&simlab::simulate_clt(&cfg, &ladder)?)
        }
        "coverage" => {
            let alpha = args
                .alpha
                .ok_or_else(|| CliError::InvalidArgument("coverage requires --alpha".into()))?;
            json_value(&simlab::simulate_coverage(&cfg, alpha)?)
        }
        other => return Err(CliError::InvalidArgument(format!("unknown experiment {other}"))),
    };
    Ok(CommandOutput { config, output, seed })
}

fn run_bound(args: &BoundArgs) -> Result<CommandOutput, CliError> {
    let bound = simlab::finite_sample_bound(
        args.m, args.l, args.diam, args.r, args.dudley_c, args.delta, args.eps, args.n,
    )?;
    let output = serde_json::json!({ "bound": bound });
    Ok(CommandOutput { config: json_value(args), output, seed: None })
}

fn dispatch(cli: &Cli) -> Result<CommandOutput, CliError> {
    match &cli.command {
        Command::Ot(a) => run_ot(a),
        Command::Risk(a) => run_risk(a),
        Command::Fit(a) => run_fit(a),
        Command::Profile(a) => run_profile(a),
        Command::Radius(a) => run_radius(a),
        Command::Region(a) => run_region(a),
        Command::TestFairness(a) => run_fairness(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Bound(a) => run_bound(a),
    }
}

fn command_name(cli: &Cli) -> &'static str {
    match &cli.command {
        Command::Ot(_) => "ot",
        Command::Risk(_) => "risk",
        Command::Fit(_) => "fit",
        Command::Profile(_) => "profile",
        Command::Radius(_) => "radius",
        Command::Region(_) => "region",
        Command::TestFairness(_) => "test-fairness",
        Command::Simulate(_) => "simulate",
        Command::Bound(_) => "bound",
    }
}

fn configure_threads() {
    if let Ok(t) = std::env::var("WDRO_THREADS") {
        if let Ok(t) = t.parse::<usize>() {
            if t >= 1 {
                // ignore the error from a pool that is already configured
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
        }
    }
}

/// Parses and executes a full argument vector; returns the process exit
/// code after printing the report (or error object) to standard output.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    configure_threads();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests count as success
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let start = std::time::Instant::now();
    match dispatch(&cli) {
        Ok(out) => {
            let wall = start.elapsed().as_secs_f64();
            let seeded = out.seed.is_some();
            let report = RunReport {
                command: command_name(&cli).to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                rng_family: RNG_FAMILY.to_string(),
                seed: out.seed,
                config: out.config,
                output: out.output,
                wall_time_seconds: if seeded { None } else { Some(wall) },
            };
            println!("{}", to_json(&report));
            if seeded {
                eprintln!("wall time: {wall:.3}s");
            }
            0
        }
        Err(e) => {
            let obj = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            println!("{}", to_json(&obj));
            1
        }
    }
}
