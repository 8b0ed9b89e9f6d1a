//! The `mdd` binary: `train`, `benchmark`, and `diversity` subcommands.
//!
//! Exit codes are a stable contract: 0 on success, 1 on runtime failure
//! (I/O, parsing, training), 2 on usage or validation errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{concatenate, Array1, Axis};

use crate::baselines::{KernelShard, LinearModel, ShardedKernelModel, TrainedModel};
use crate::data::{load_libsvm, standardize, Dataset};
use crate::eval::{
    fit, plan_benchmark, rmse, run_benchmark, write_report_csv, write_report_json,
    BenchmarkConfig, FitSettings, HyperParams, Method,
};
use crate::mdd::{
    diversity_linear, diversity_rkhs, pairwise_sq_distances_linear, pairwise_sq_distances_rkhs,
    write_trace_csv, SolverMode,
};

#[derive(Parser)]
#[command(
    name = "mdd",
    version,
    about = "Distributed ridge / kernel ridge regression with max-diversity ensemble training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train one method on a LIBSVM dataset; writes model JSON and trace CSV
    Train(TrainArgs),
    /// Repeated-split multi-method benchmark with cross-validated grids
    Benchmark(BenchmarkArgs),
    /// Empirical diversity and pairwise distances across saved models
    Diversity(DiversityArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training data in LIBSVM format
    #[arg(long)]
    pub data: PathBuf,
    /// One of: rr, drr, krr, kdrr, mdd-ls, mdd-rkhs
    #[arg(long)]
    pub method: String,
    /// Shard count for the distributed methods
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    /// Ridge strength
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// Diversity strength (mdd methods)
    #[arg(long, default_value_t = 1e-2)]
    pub gamma: f64,
    /// Gaussian kernel bandwidth (kernel methods)
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Stop threshold on the consensus delta
    #[arg(long, default_value_t = 1e-6)]
    pub zeta: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Direction solver: exact | fast-lemma4
    #[arg(long, default_value = "exact")]
    pub solver: String,
    /// Seed for the shard partition
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model JSON output path
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Trace CSV output path
    #[arg(long, default_value = "trace.csv")]
    pub trace: PathBuf,
    /// Standardize features with training statistics
    #[arg(long)]
    pub standardize: bool,
    /// Optional LIBSVM test data; prints the test RMSE
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Dataset in LIBSVM format
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated method tokens
    #[arg(long, default_value = "rr,drr,krr,kdrr,mdd-ls,mdd-rkhs")]
    pub methods: String,
    /// Shard count applied to the distributed methods
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    /// Cross-validation folds
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Master seed; everything except wall times is reproducible from it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub zeta: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Direction solver: exact | fast-lemma4
    #[arg(long, default_value = "exact")]
    pub solver: String,
    /// Skip global KRR above this sample count
    #[arg(long, default_value_t = 20000)]
    pub krr_max_n: usize,
    #[arg(long, default_value = "report.csv")]
    pub out_csv: PathBuf,
    #[arg(long, default_value = "report.json")]
    pub out_json: PathBuf,
    #[arg(long)]
    pub standardize: bool,
    /// Print the execution plan (trials, folds, grid sizes) without fitting
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Args)]
pub struct DiversityArgs {
    /// Two or more model JSON files of the same kind
    #[arg(required = true, num_args = 2..)]
    pub models: Vec<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
    fn runtime(err: impl std::fmt::Display) -> Self {
        Failure::Runtime(err.to_string())
    }
}

/// Parse the process arguments and run. Clap itself exits with code 2 on
/// malformed flags.
pub fn main_entry() -> i32 {
    run(Cli::parse())
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
        Command::Diversity(args) => cmd_diversity(&args),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
    }
}

fn parse_solver(token: &str) -> Result<SolverMode, Failure> {
    match token.trim().to_ascii_lowercase().as_str() {
        "exact" => Ok(SolverMode::Exact),
        "fast-lemma4" => Ok(SolverMode::FastLemma4),
        other => Err(Failure::usage(format!(
            "unknown solver '{other}' (expected 'exact' or 'fast-lemma4')"
        ))),
    }
}

fn parse_method(token: &str, m: usize) -> Result<Method, Failure> {
    if matches!(token.trim().to_ascii_lowercase().as_str(), "mdd-ls" | "mdd-rkhs") && m < 2 {
        return Err(Failure::usage(format!("MDD requires m >= 2, got m = {m}")));
    }
    Method::parse(token, m).map_err(|e| Failure::usage(e.to_string()))
}

fn validate_positive(name: &str, value: f64) -> Result<(), Failure> {
    if value <= 0.0 || !value.is_finite() {
        return Err(Failure::usage(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

fn load_data(path: &Path) -> Result<Dataset, Failure> {
    load_libsvm(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_train(args: &TrainArgs) -> Result<(), Failure> {
    validate_positive("--lambda", args.lambda)?;
    validate_positive("--zeta", args.zeta)?;
    if args.gamma < 0.0 || !args.gamma.is_finite() {
        return Err(Failure::usage(format!(
            "--gamma must be non-negative, got {}",
            args.gamma
        )));
    }
    if args.max_iters == 0 {
        return Err(Failure::usage("--max-iters must be at least 1"));
    }
    if args.m == 0 {
        return Err(Failure::usage("--m must be at least 1"));
    }
    let method = parse_method(&args.method, args.m)?;
    if method.uses_sigma() {
        validate_positive("--sigma", args.sigma)?;
    }
    let solver_mode = parse_solver(&args.solver)?;

    let train = load_data(&args.data)?;
    let test = args.test.as_deref().map(load_data).transpose()?;
    let (train, test) = if args.standardize {
        match test {
            Some(te) => {
                let (tr, te, _) = standardize(&train, &te).map_err(Failure::runtime)?;
                (tr, Some(te))
            }
            None => {
                let (tr, _, _) = standardize(&train, &train).map_err(Failure::runtime)?;
                (tr, None)
            }
        }
    } else {
        (train, test)
    };

    let hp = HyperParams {
        lambda: args.lambda,
        gamma: method.uses_gamma().then_some(args.gamma),
        sigma: method.uses_sigma().then_some(args.sigma),
    };
    let settings = FitSettings {
        solver_mode,
        zeta: args.zeta,
        max_iters: args.max_iters,
        krr_max_n: None,
    };
    let output = fit(&train, method, &hp, args.seed, &settings).map_err(Failure::runtime)?;

    let json = output.model.to_json().map_err(Failure::runtime)?;
    fs::write(&args.out, json).map_err(Failure::runtime)?;
    let trace_file = fs::File::create(&args.trace).map_err(Failure::runtime)?;
    write_trace_csv(trace_file, output.trace.as_deref().unwrap_or(&[]))
        .map_err(Failure::runtime)?;
    println!("model: {}", args.out.display());
    println!("trace: {}", args.trace.display());
    if let Some(rounds) = output.trace.as_ref() {
        println!("rounds: {}", rounds.len());
    }
    println!("comm_floats: {}", output.comm_floats);
    if let Some(test) = test {
        let pred = output.model.predict(test.features()).map_err(Failure::runtime)?;
        let score = rmse(pred.view(), test.targets()).map_err(Failure::runtime)?;
        println!("test_rmse: {score}");
    }
    Ok(())
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::usage("--trials must be at least 1"));
    }
    if args.train_fraction <= 0.0 || args.train_fraction >= 1.0 || !args.train_fraction.is_finite() {
        return Err(Failure::usage(format!(
            "--train-fraction must lie strictly between 0 and 1, got {}",
            args.train_fraction
        )));
    }
    if args.folds < 2 {
        return Err(Failure::usage("--folds must be at least 2"));
    }
    validate_positive("--zeta", args.zeta)?;
    if args.max_iters == 0 {
        return Err(Failure::usage("--max-iters must be at least 1"));
    }
    let solver_mode = parse_solver(&args.solver)?;
    let methods = args
        .methods
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_method(t, args.m))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        return Err(Failure::usage("--methods must name at least one method"));
    }

    let mut cfg = BenchmarkConfig::new(methods, args.seed);
    cfg.trials = args.trials;
    cfg.train_fraction = args.train_fraction;
    cfg.folds = args.folds;
    cfg.settings = FitSettings {
        solver_mode,
        zeta: args.zeta,
        max_iters: args.max_iters,
        krr_max_n: Some(args.krr_max_n),
    };
    cfg.standardize = args.standardize;

    if args.dry_run {
        let plan = plan_benchmark(&cfg);
        println!("trials: {}", plan.trials);
        println!("folds: {}", plan.folds);
        println!("train_fraction: {}", plan.train_fraction);
        println!("lambda_grid_points: {}", plan.lambda_points);
        println!("gamma_grid_points: {}", plan.gamma_points);
        println!("sigma_grid_points: {}", plan.sigma_points);
        for method in &plan.methods {
            println!(
                "method {}: grid_cells={} fits_per_trial={}",
                method.method, method.grid_cells, method.fits_per_trial
            );
        }
        return Ok(());
    }

    let data = load_data(&args.data)?;
    let reports = run_benchmark(&data, &cfg).map_err(Failure::runtime)?;
    let csv = fs::File::create(&args.out_csv).map_err(Failure::runtime)?;
    write_report_csv(csv, &reports).map_err(Failure::runtime)?;
    let json = fs::File::create(&args.out_json).map_err(Failure::runtime)?;
    write_report_json(json, &reports).map_err(Failure::runtime)?;
    println!("report_csv: {}", args.out_csv.display());
    println!("report_json: {}", args.out_json.display());
    for report in &reports {
        let failures = report.errors.iter().filter(|e| e.is_some()).count();
        println!(
            "{}: mean_rmse={:.6} std_rmse={:.6} failures={}",
            report.method, report.mean_rmse, report.std_rmse, failures
        );
    }
    Ok(())
}

fn cmd_diversity(args: &DiversityArgs) -> Result<(), Failure> {
    let mut models = Vec::with_capacity(args.models.len());
    for path in &args.models {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        let model = TrainedModel::from_json(&text)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        models.push(model);
    }
    let all_linear = models.iter().all(|m| matches!(m, TrainedModel::Linear { .. }));
    let all_kernel = models.iter().all(|m| matches!(m, TrainedModel::Kernel { .. }));
    if !all_linear && !all_kernel {
        return Err(Failure::usage(
            "cannot mix linear and kernel models in one diversity computation",
        ));
    }

    let (diversity, pairwise) = if all_linear {
        let members: Vec<LinearModel> = models
            .iter()
            .map(|m| {
                m.mean_weights()
                    .map(|w| LinearModel { w })
                    .ok_or_else(|| Failure::usage("linear model has no shards"))
            })
            .collect::<Result<_, _>>()?;
        let dims: Vec<usize> = members.iter().map(|m| m.w.len()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Failure::usage("models have different feature dimensions"));
        }
        (
            diversity_linear(&members).map_err(Failure::runtime)?,
            pairwise_sq_distances_linear(&members).map_err(Failure::runtime)?,
        )
    } else {
        // each file becomes one member: its shard average, flattened into a
        // single expansion over the union of the file's anchors
        let mut kernel = None;
        let mut members = Vec::with_capacity(models.len());
        for model in &models {
            let TrainedModel::Kernel { model: km, .. } = model else {
                unreachable!()
            };
            match &kernel {
                None => kernel = Some(km.kernel.clone()),
                Some(k) if *k == km.kernel => {}
                Some(_) => {
                    return Err(Failure::usage(
                        "kernel models use different kernel configurations",
                    ))
                }
            }
            let scale = 1.0 / km.shards.len() as f64;
            let anchor_views: Vec<_> = km.shards.iter().map(|s| s.anchors.view()).collect();
            let anchors =
                concatenate(Axis(0), &anchor_views).map_err(Failure::runtime)?;
            let coeffs: Vec<f64> = km
                .shards
                .iter()
                .flat_map(|s| s.coeffs.iter().map(|c| c * scale))
                .collect();
            members.push(KernelShard {
                anchors,
                coeffs: Array1::from_vec(coeffs),
            });
        }
        let dims: Vec<usize> = members.iter().map(|s| s.anchors.ncols()).collect();
        if dims.windows(2).any(|w| w[0] != w[1]) {
            return Err(Failure::usage("models have different feature dimensions"));
        }
        let combined = ShardedKernelModel {
            shards: members,
            kernel: kernel.expect("at least two models"),
        };
        (
            diversity_rkhs(&combined).map_err(Failure::runtime)?,
            pairwise_sq_distances_rkhs(&combined).map_err(Failure::runtime)?,
        )
    };

    println!("diversity: {diversity}");
    println!("pairwise squared distances:");
    for row in pairwise.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        println!("{}", cells.join(" "));
    }
    Ok(())
}
