//! Evaluation machinery: RMSE, k-fold cross-validated grid search over the
//! default hyperparameter grids, the repeated-split benchmark harness, and
//! Welch's t-test for comparing per-trial scores.
//!
//! The harness protocol: for each trial, draw a fresh seeded train/test
//! split, pick hyperparameters per method by k-fold cross-validation on the
//! training set (distributed methods re-partition each training fold with
//! the trial's seed), fit on the full training set, and score RMSE on the
//! held-out test set. A method failing on one trial is recorded in that
//! trial's slot and does not abort the other methods or trials.

use std::io::Write;
use std::time::Instant;

use ndarray::ArrayView1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::baselines::{
    train_drr, train_kdrr, train_krr, train_rr, TrainError, TrainedModel,
};
use crate::data::{gather_shards, partition, split_train_test, standardize, DataError, Dataset};
use crate::linalg::KernelConfig;
use crate::mdd::{
    mdd_ls_train, mdd_rkhs_train, MddError, RoundTrace, SolverMode, TrainConfig, DEFAULT_MAX_ITERS,
    DEFAULT_ZETA,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("input must be non-empty")]
    Empty,
    #[error("sample needs at least {need} values, got {got}")]
    SampleTooSmall { need: usize, got: usize },
    #[error("fold count must satisfy 2 <= k <= {n}, got {k}")]
    BadFolds { k: usize, n: usize },
    #[error("hyperparameter grid '{0}' is empty")]
    EmptyGrid(&'static str),
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("method '{0}' requires m >= 2 shards, got {1}")]
    BadShardCount(String, usize),
    #[error("method '{0}' requires a kernel bandwidth (sigma)")]
    MissingSigma(String),
    #[error("global kernel ridge regression is infeasible at {n} samples (limit {max_n})")]
    GlobalKernelInfeasible { n: usize, max_n: usize },
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Mdd(#[from] MddError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Root mean square error between predictions and targets.
pub fn rmse(pred: ArrayView1<f64>, target: ArrayView1<f64>) -> Result<f64, EvalError> {
    if pred.len() != target.len() {
        return Err(EvalError::LengthMismatch(pred.len(), target.len()));
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(target.iter()) {
        let diff = p - t;
        total += diff * diff;
    }
    Ok((total / pred.len() as f64).sqrt())
}

/// The trainable methods, named after their Table-style labels:
/// `rr`, `drr-<m>`, `krr`, `kdrr-<m>`, `mdd-ls-<m>`, `mdd-rkhs-<m>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rr,
    Drr { m: usize },
    Krr,
    Kdrr { m: usize },
    MddLs { m: usize },
    MddRkhs { m: usize },
}

impl Method {
    /// Parse a method token (`rr`, `drr`, `krr`, `kdrr`, `mdd-ls`,
    /// `mdd-rkhs`), attaching `m` to the distributed ones.
    pub fn parse(token: &str, m: usize) -> Result<Method, EvalError> {
        let method = match token.trim().to_ascii_lowercase().as_str() {
            "rr" => Method::Rr,
            "drr" => Method::Drr { m },
            "krr" => Method::Krr,
            "kdrr" => Method::Kdrr { m },
            "mdd-ls" => Method::MddLs { m },
            "mdd-rkhs" => Method::MddRkhs { m },
            other => return Err(EvalError::UnknownMethod(other.to_string())),
        };
        if let Method::Drr { m } | Method::Kdrr { m } = method {
            if m == 0 {
                return Err(EvalError::BadShardCount(method.name(), m));
            }
        }
        if let Method::MddLs { m } | Method::MddRkhs { m } = method {
            if m < 2 {
                return Err(EvalError::BadShardCount(method.name(), m));
            }
        }
        Ok(method)
    }

    pub fn name(&self) -> String {
        match self {
            Method::Rr => "rr".into(),
            Method::Drr { m } => format!("drr-{m}"),
            Method::Krr => "krr".into(),
            Method::Kdrr { m } => format!("kdrr-{m}"),
            Method::MddLs { m } => format!("mdd-ls-{m}"),
            Method::MddRkhs { m } => format!("mdd-rkhs-{m}"),
        }
    }

    pub fn uses_gamma(&self) -> bool {
        matches!(self, Method::MddLs { .. } | Method::MddRkhs { .. })
    }

    pub fn uses_sigma(&self) -> bool {
        matches!(
            self,
            Method::Krr | Method::Kdrr { .. } | Method::MddRkhs { .. }
        )
    }
}

/// Hyperparameter grids searched by [`kfold_cv`]. The defaults are
/// `lambda, gamma in {10^i : i = -6..3}` (10 points each) and
/// `sigma in {2^i : i = -10..10}` (21 points).
#[derive(Debug, Clone)]
pub struct Grids {
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            lambdas: (-6..=3).map(|i| 10f64.powi(i)).collect(),
            gammas: (-6..=3).map(|i| 10f64.powi(i)).collect(),
            sigmas: (-10..=10).map(|i| 2f64.powi(i)).collect(),
        }
    }
}

/// Fixed (non-searched) fitting knobs shared by all methods.
#[derive(Debug, Clone)]
pub struct FitSettings {
    pub solver_mode: SolverMode,
    pub zeta: f64,
    pub max_iters: usize,
    /// Global KRR is skipped (reported infeasible) above this sample count.
    pub krr_max_n: Option<usize>,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            solver_mode: SolverMode::Exact,
            zeta: DEFAULT_ZETA,
            max_iters: DEFAULT_MAX_ITERS,
            krr_max_n: Some(20_000),
        }
    }
}

/// A method together with its fitting knobs; what [`kfold_cv`] evaluates.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub method: Method,
    pub settings: FitSettings,
}

/// Hyperparameters chosen for one fit. `gamma` and `sigma` are present only
/// for methods that use them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub gamma: Option<f64>,
    pub sigma: Option<f64>,
}

/// A fitted model plus its exact communication cost in floats (setup push
/// plus all per-round traffic) and, for the iterative methods, the trace.
pub struct FitOutput {
    pub model: TrainedModel,
    pub comm_floats: u64,
    pub trace: Option<Vec<RoundTrace>>,
}

/// Train `method` on `train` with fixed hyperparameters. Distributed methods
/// partition the data with `part_seed`.
pub fn fit(
    train: &Dataset,
    method: Method,
    hp: &HyperParams,
    part_seed: u64,
    settings: &FitSettings,
) -> Result<FitOutput, EvalError> {
    let lambda = hp.lambda;
    match method {
        Method::Rr => {
            let model = train_rr(train, lambda)?;
            Ok(FitOutput {
                model: TrainedModel::Linear {
                    lambda,
                    shards: vec![model],
                },
                comm_floats: 0,
                trace: None,
            })
        }
        Method::Drr { m } => {
            let part = partition(train, m, part_seed)?;
            let (_, locals) = train_drr(train, &part, lambda)?;
            let comm = (m * train.dim()) as u64;
            Ok(FitOutput {
                model: TrainedModel::Linear {
                    lambda,
                    shards: locals,
                },
                comm_floats: comm,
                trace: None,
            })
        }
        Method::Krr => {
            if let Some(max_n) = settings.krr_max_n {
                if train.n_samples() > max_n {
                    return Err(EvalError::GlobalKernelInfeasible {
                        n: train.n_samples(),
                        max_n,
                    });
                }
            }
            let kernel = gaussian_for(method, hp)?;
            let model = train_krr(train, lambda, &kernel)?;
            Ok(FitOutput {
                model: TrainedModel::Kernel { lambda, model },
                comm_floats: 0,
                trace: None,
            })
        }
        Method::Kdrr { m } => {
            let kernel = gaussian_for(method, hp)?;
            let part = partition(train, m, part_seed)?;
            let model = train_kdrr(train, &part, lambda, &kernel)?;
            Ok(FitOutput {
                model: TrainedModel::Kernel { lambda, model },
                comm_floats: train.n_samples() as u64,
                trace: None,
            })
        }
        Method::MddLs { m } => {
            let part = partition(train, m, part_seed)?;
            let shards = gather_shards(train, &part);
            let cfg = TrainConfig {
                lambda,
                gamma: hp.gamma.unwrap_or(0.0),
                zeta: settings.zeta,
                m,
                max_iters: settings.max_iters,
                solver_mode: settings.solver_mode,
                sigma: None,
            };
            let run = mdd_ls_train(&shards, &cfg)?;
            let setup = (m * train.dim()) as u64;
            let comm = setup + run.trace.last().map_or(0, |r| r.floats_pushed + r.floats_pulled);
            Ok(FitOutput {
                model: TrainedModel::Linear {
                    lambda,
                    shards: run.shard_models,
                },
                comm_floats: comm,
                trace: Some(run.trace),
            })
        }
        Method::MddRkhs { m } => {
            let kernel = gaussian_for(method, hp)?;
            let part = partition(train, m, part_seed)?;
            let shards = gather_shards(train, &part);
            let cfg = TrainConfig {
                lambda,
                gamma: hp.gamma.unwrap_or(0.0),
                zeta: settings.zeta,
                m,
                max_iters: settings.max_iters,
                solver_mode: settings.solver_mode,
                sigma: hp.sigma,
            };
            let run = mdd_rkhs_train(&shards, &cfg, &kernel)?;
            let setup = train.n_samples() as u64;
            let comm = setup + run.trace.last().map_or(0, |r| r.floats_pushed + r.floats_pulled);
            Ok(FitOutput {
                model: TrainedModel::Kernel {
                    lambda,
                    model: run.model,
                },
                comm_floats: comm,
                trace: Some(run.trace),
            })
        }
    }
}

fn gaussian_for(method: Method, hp: &HyperParams) -> Result<KernelConfig, EvalError> {
    let sigma = hp.sigma.ok_or_else(|| EvalError::MissingSigma(method.name()))?;
    KernelConfig::gaussian(sigma).map_err(|e| EvalError::Train(TrainError::Linalg(e)))
}

/// Seeded k-fold assignment: a uniform permutation chunked round-robin, so
/// folds are disjoint, cover `0..n`, and differ in size by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    folds
}

/// Exhaustive grid search minimizing mean held-out RMSE over `k` folds.
///
/// Ties break toward the smaller lambda, then gamma, then sigma. Fits that
/// diverge (or produce a non-finite score, or hit the global-kernel size
/// limit) score `+inf` for that cell instead of failing the search.
pub fn kfold_cv(
    train: &Dataset,
    spec: &MethodSpec,
    grids: &Grids,
    k: usize,
    seed: u64,
) -> Result<HyperParams, EvalError> {
    let n = train.n_samples();
    if k < 2 || k > n {
        return Err(EvalError::BadFolds { k, n });
    }
    let mut lambdas = grids.lambdas.clone();
    if lambdas.is_empty() {
        return Err(EvalError::EmptyGrid("lambda"));
    }
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gammas: Vec<Option<f64>> = if spec.method.uses_gamma() {
        if grids.gammas.is_empty() {
            return Err(EvalError::EmptyGrid("gamma"));
        }
        let mut g = grids.gammas.clone();
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let sigmas: Vec<Option<f64>> = if spec.method.uses_sigma() {
        if grids.sigmas.is_empty() {
            return Err(EvalError::EmptyGrid("sigma"));
        }
        let mut s = grids.sigmas.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s.into_iter().map(Some).collect()
    } else {
        vec![None]
    };

    let folds = kfold_indices(n, k, derive_seed(seed, STREAM_KFOLD, 0));
    let splits: Vec<(Dataset, Dataset)> = folds
        .iter()
        .map(|val_idx| {
            let in_val = {
                let mut mask = vec![false; n];
                for &i in val_idx {
                    mask[i] = true;
                }
                mask
            };
            let train_idx: Vec<usize> = (0..n).filter(|i| !in_val[*i]).collect();
            (train.select(&train_idx), train.select(val_idx))
        })
        .collect();

    let mut best: Option<(f64, HyperParams)> = None;
    for &lambda in &lambdas {
        for &gamma in &gammas {
            for &sigma in &sigmas {
                let hp = HyperParams {
                    lambda,
                    gamma,
                    sigma,
                };
                let mut total = 0.0;
                for (fold_train, fold_val) in &splits {
                    let score = match fit(fold_train, spec.method, &hp, seed, &spec.settings) {
                        Ok(out) => {
                            let pred = out.model.predict(fold_val.features())?;
                            let r = rmse(pred.view(), fold_val.targets())?;
                            if r.is_finite() {
                                r
                            } else {
                                f64::INFINITY
                            }
                        }
                        Err(EvalError::Mdd(MddError::Diverging { .. })) => f64::INFINITY,
                        Err(EvalError::GlobalKernelInfeasible { .. }) => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                    total += score;
                }
                let mean = total / k as f64;
                if best.as_ref().is_none_or(|(b, _)| mean < *b) {
                    best = Some((mean, hp));
                }
            }
        }
    }
    Ok(best.expect("grids are non-empty").1)
}

/// One method's results across all benchmark trials. Every per-trial list
/// has exactly `trials` entries; a failed trial holds NaN/zero placeholders
/// and its error message.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub method: String,
    pub rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub fit_time_s: Vec<f64>,
    pub cv_time_s: Vec<f64>,
    pub comm_floats: Vec<u64>,
    pub params: Vec<HyperParams>,
    pub errors: Vec<Option<String>>,
}

/// Benchmark protocol configuration. `new` applies the standard defaults:
/// 30 trials, 70/30 splits, 5-fold cross-validation, the default grids.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub grids: Grids,
    pub settings: FitSettings,
    pub standardize: bool,
}

impl BenchmarkConfig {
    pub fn new(methods: Vec<Method>, seed: u64) -> Self {
        BenchmarkConfig {
            methods,
            trials: 30,
            train_fraction: 0.7,
            folds: 5,
            seed,
            grids: Grids::default(),
            settings: FitSettings::default(),
            standardize: false,
        }
    }
}

/// Dry-run summary of the work a benchmark run would execute.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkPlan {
    pub trials: usize,
    pub folds: usize,
    pub train_fraction: f64,
    pub lambda_points: usize,
    pub gamma_points: usize,
    pub sigma_points: usize,
    pub methods: Vec<MethodPlan>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodPlan {
    pub method: String,
    /// Grid cells searched per trial.
    pub grid_cells: usize,
    /// Fits per trial: every cell on every fold, plus the final fit.
    pub fits_per_trial: usize,
}

pub fn plan_benchmark(cfg: &BenchmarkConfig) -> BenchmarkPlan {
    let methods = cfg
        .methods
        .iter()
        .map(|method| {
            let mut cells = cfg.grids.lambdas.len();
            if method.uses_gamma() {
                cells *= cfg.grids.gammas.len();
            }
            if method.uses_sigma() {
                cells *= cfg.grids.sigmas.len();
            }
            MethodPlan {
                method: method.name(),
                grid_cells: cells,
                fits_per_trial: cells * cfg.folds + 1,
            }
        })
        .collect();
    BenchmarkPlan {
        trials: cfg.trials,
        folds: cfg.folds,
        train_fraction: cfg.train_fraction,
        lambda_points: cfg.grids.lambdas.len(),
        gamma_points: cfg.grids.gammas.len(),
        sigma_points: cfg.grids.sigmas.len(),
        methods,
    }
}

const STREAM_SPLIT: u64 = 1;
const STREAM_TRIAL: u64 = 2;
const STREAM_KFOLD: u64 = 3;

/// Execute the benchmark protocol; one report per method, assembled in
/// (trial, method) order.
pub fn run_benchmark(ds: &Dataset, cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkReport>, EvalError> {
    if cfg.trials == 0 {
        return Err(EvalError::ZeroTrials);
    }
    struct Acc {
        rmse: Vec<f64>,
        fit_time_s: Vec<f64>,
        cv_time_s: Vec<f64>,
        comm_floats: Vec<u64>,
        params: Vec<HyperParams>,
        errors: Vec<Option<String>>,
    }
    let mut accs: Vec<Acc> = cfg
        .methods
        .iter()
        .map(|_| Acc {
            rmse: Vec::new(),
            fit_time_s: Vec::new(),
            cv_time_s: Vec::new(),
            comm_floats: Vec::new(),
            params: Vec::new(),
            errors: Vec::new(),
        })
        .collect();

    for trial in 0..cfg.trials {
        let split_seed = derive_seed(cfg.seed, STREAM_SPLIT, trial as u64);
        let trial_seed = derive_seed(cfg.seed, STREAM_TRIAL, trial as u64);
        let (train, test) = split_train_test(ds, cfg.train_fraction, split_seed)?;
        let (train, test) = if cfg.standardize {
            let (tr, te, _) = standardize(&train, &test)?;
            (tr, te)
        } else {
            (train, test)
        };
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let spec = MethodSpec {
                method,
                settings: cfg.settings.clone(),
            };
            let cv_start = Instant::now();
            let outcome: Result<(f64, f64, f64, u64, HyperParams), EvalError> = (|| {
                let hp = kfold_cv(&train, &spec, &cfg.grids, cfg.folds, trial_seed)?;
                let cv_time = cv_start.elapsed().as_secs_f64();
                let fit_start = Instant::now();
                let out = fit(&train, method, &hp, trial_seed, &cfg.settings)?;
                let fit_time = fit_start.elapsed().as_secs_f64();
                let pred = out.model.predict(test.features())?;
                let score = rmse(pred.view(), test.targets())?;
                Ok((score, fit_time, cv_time, out.comm_floats, hp))
            })();
            let acc = &mut accs[mi];
            match outcome {
                Ok((score, fit_time, cv_time, comm, hp)) => {
                    acc.rmse.push(score);
                    acc.fit_time_s.push(fit_time);
                    acc.cv_time_s.push(cv_time);
                    acc.comm_floats.push(comm);
                    acc.params.push(hp);
                    acc.errors.push(None);
                }
                Err(e) => {
                    acc.rmse.push(f64::NAN);
                    acc.fit_time_s.push(0.0);
                    acc.cv_time_s.push(0.0);
                    acc.comm_floats.push(0);
                    acc.params.push(HyperParams {
                        lambda: f64::NAN,
                        gamma: None,
                        sigma: None,
                    });
                    acc.errors.push(Some(e.to_string()));
                }
            }
        }
    }

    Ok(cfg
        .methods
        .iter()
        .zip(accs)
        .map(|(method, acc)| {
            let (mean, std) = mean_std(&acc.rmse);
            BenchmarkReport {
                method: method.name(),
                rmse: acc.rmse,
                mean_rmse: mean,
                std_rmse: std,
                fit_time_s: acc.fit_time_s,
                cv_time_s: acc.cv_time_s,
                comm_floats: acc.comm_floats,
                params: acc.params,
                errors: acc.errors,
            }
        })
        .collect())
}

/// Mean and sample standard deviation over the finite entries.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    if finite.len() < 2 {
        return (mean, 0.0);
    }
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Report export: `method,trial,rmse,time_s,floats_comm,lambda,gamma,sigma`,
/// one section per method, one row per trial. `time_s` is the fit-only wall
/// time; cross-validation time is reported separately in the JSON document.
pub fn write_report_csv<W: Write>(mut w: W, reports: &[BenchmarkReport]) -> Result<(), EvalError> {
    writeln!(w, "method,trial,rmse,time_s,floats_comm,lambda,gamma,sigma")?;
    for report in reports {
        for trial in 0..report.rmse.len() {
            let params = &report.params[trial];
            let lambda = if params.lambda.is_finite() {
                params.lambda.to_string()
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                report.method,
                trial,
                report.rmse[trial],
                report.fit_time_s[trial],
                report.comm_floats[trial],
                lambda,
                fmt_opt(params.gamma),
                fmt_opt(params.sigma),
            )?;
        }
    }
    Ok(())
}

/// JSON document mirroring [`BenchmarkReport`].
pub fn write_report_json<W: Write>(w: W, reports: &[BenchmarkReport]) -> Result<(), EvalError> {
    serde_json::to_writer_pretty(w, reports).map_err(TrainError::Json)?;
    Ok(())
}

/// Welch's unequal-variance two-sample t-test, two-sided, with
/// Welch-Satterthwaite degrees of freedom.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub significant_95: bool,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    for sample in [a, b] {
        if sample.len() < 2 {
            return Err(EvalError::SampleTooSmall {
                need: 2,
                got: sample.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / (nb - 1.0);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        // both samples are constant: equal means is the defined t=0, p=1
        // case; distinct constants separate with certainty
        return Ok(if ma == mb {
            TTest {
                t: 0.0,
                df: na + nb - 2.0,
                p: 1.0,
                significant_95: false,
            }
        } else {
            TTest {
                t: if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY },
                df: na + nb - 2.0,
                p: 0.0,
                significant_95: true,
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(TTest {
        t,
        df,
        p,
        significant_95: p < 0.05,
    })
}

/// Deterministic seed derivation (splitmix64 chain) so every trial, split,
/// and fold assignment is reproducible from one master seed.
pub(crate) fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)) ^ index)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthetic_regression, SynthConfig};
    use ndarray::{array, Array1};
    use rand::{Rng, SeedableRng};

    #[test]
    #[allow(clippy::approx_constant)]
    fn rmse_hand_values() {
        let r = rmse(array![1.0, 2.0].view(), array![1.0, 4.0].view()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!((r - 1.4142136).abs() < 1e-7);
        let zero = rmse(array![3.0, -1.0].view(), array![3.0, -1.0].view()).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn rmse_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pred = Array1::from_shape_fn(100, |_| rng.random::<f64>() * 4.0 - 2.0);
        let target = Array1::from_shape_fn(100, |_| rng.random::<f64>() * 4.0 - 2.0);
        let fast = rmse(pred.view(), target.view()).unwrap();
        let mut acc = 0.0_f64;
        for i in 0..100 {
            acc += (pred[i] - target[i]).powi(2);
        }
        let slow = (acc / 100.0).sqrt();
        assert!((fast - slow).abs() < 1e-12);
    }

    #[test]
    fn rmse_rejects_length_mismatch() {
        assert!(rmse(array![1.0].view(), array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn default_grids_have_protocol_sizes() {
        let grids = Grids::default();
        assert_eq!(grids.lambdas.len(), 10);
        assert_eq!(grids.gammas.len(), 10);
        assert_eq!(grids.sigmas.len(), 21);
        assert_eq!(grids.lambdas[0], 1e-6);
        assert_eq!(*grids.lambdas.last().unwrap(), 1e3);
        assert_eq!(grids.sigmas[0], 2f64.powi(-10));
        assert_eq!(*grids.sigmas.last().unwrap(), 1024.0);
    }

    #[test]
    fn method_parsing_and_names() {
        assert_eq!(Method::parse("rr", 5).unwrap(), Method::Rr);
        assert_eq!(Method::parse("MDD-LS", 5).unwrap(), Method::MddLs { m: 5 });
        assert_eq!(Method::parse("drr", 3).unwrap().name(), "drr-3");
        assert!(Method::parse("mdd-ls", 1).is_err());
        assert!(Method::parse("boosting", 5).is_err());
    }

    #[test]
    fn kfold_indices_disjoint_cover_balanced() {
        for (n, k) in [(10, 2), (11, 3), (25, 5), (7, 7)] {
            let folds = kfold_indices(n, k, 9);
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            let min = folds.iter().map(|f| f.len()).min().unwrap();
            let max = folds.iter().map(|f| f.len()).max().unwrap();
            assert!(max - min <= 1);
        }
    }

    #[test]
    fn cv_single_point_grid_returns_it() {
        let ds = synthetic_regression(&SynthConfig::new(40, 3, 0.2, 32));
        let grids = Grids {
            lambdas: vec![0.25],
            gammas: vec![],
            sigmas: vec![],
        };
        let spec = MethodSpec {
            method: Method::Rr,
            settings: FitSettings::default(),
        };
        let hp = kfold_cv(&ds, &spec, &grids, 5, 1).unwrap();
        assert_eq!(hp.lambda, 0.25);
        assert_eq!(hp.gamma, None);
        assert_eq!(hp.sigma, None);
    }

    #[test]
    fn cv_picks_planted_lambda() {
        // clean linear signal: tiny ridge wins every fold by a wide margin
        let ds = synthetic_regression(&SynthConfig::new(80, 4, 0.01, 33));
        let grids = Grids {
            lambdas: vec![1e-3, 1e3],
            gammas: vec![],
            sigmas: vec![],
        };
        let spec = MethodSpec {
            method: Method::Rr,
            settings: FitSettings::default(),
        };
        let hp = kfold_cv(&ds, &spec, &grids, 5, 2).unwrap();
        assert_eq!(hp.lambda, 1e-3);
    }

    #[test]
    fn cv_rejects_bad_fold_counts() {
        let ds = synthetic_regression(&SynthConfig::new(4, 2, 0.1, 34));
        let spec = MethodSpec {
            method: Method::Rr,
            settings: FitSettings::default(),
        };
        assert!(matches!(
            kfold_cv(&ds, &spec, &Grids::default(), 5, 0),
            Err(EvalError::BadFolds { k: 5, n: 4 })
        ));
        assert!(kfold_cv(&ds, &spec, &Grids::default(), 1, 0).is_err());
    }

    #[test]
    fn cv_is_deterministic() {
        let ds = synthetic_regression(&SynthConfig::new(50, 3, 0.3, 35));
        let grids = Grids {
            lambdas: vec![1e-3, 1e-1, 10.0],
            gammas: vec![1e-3, 1e-1],
            sigmas: vec![],
        };
        let spec = MethodSpec {
            method: Method::MddLs { m: 2 },
            settings: FitSettings::default(),
        };
        let a = kfold_cv(&ds, &spec, &grids, 4, 7).unwrap();
        let b = kfold_cv(&ds, &spec, &grids, 4, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cv_survives_divergent_gamma_cells() {
        let ds = synthetic_regression(&SynthConfig::new(60, 3, 0.3, 36));
        let grids = Grids {
            lambdas: vec![0.1],
            gammas: vec![1e-3, 1e3], // the large cell diverges
            sigmas: vec![],
        };
        let spec = MethodSpec {
            method: Method::MddLs { m: 3 },
            settings: FitSettings::default(),
        };
        let hp = kfold_cv(&ds, &spec, &grids, 3, 4).unwrap();
        assert_eq!(hp.gamma, Some(1e-3));
    }

    #[test]
    fn krr_size_limit_reported_infeasible() {
        let ds = synthetic_regression(&SynthConfig::new(50, 3, 0.2, 37));
        let settings = FitSettings {
            krr_max_n: Some(10),
            ..FitSettings::default()
        };
        let hp = HyperParams {
            lambda: 0.1,
            gamma: None,
            sigma: Some(1.0),
        };
        assert!(matches!(
            fit(&ds, Method::Krr, &hp, 0, &settings),
            Err(EvalError::GlobalKernelInfeasible { n: 50, max_n: 10 })
        ));
    }

    #[test]
    fn benchmark_smoke_single_trial() {
        let ds = synthetic_regression(&SynthConfig::new(50, 3, 0.3, 38));
        let mut cfg = BenchmarkConfig::new(vec![Method::Rr], 5);
        cfg.trials = 1;
        cfg.grids = Grids {
            lambdas: vec![1e-3, 1e-1],
            gammas: vec![],
            sigmas: vec![],
        };
        let reports = run_benchmark(&ds, &cfg).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].rmse.len(), 1);
        assert!(reports[0].rmse[0].is_finite());
        assert!(reports[0].fit_time_s[0] >= 0.0);
        assert!(reports[0].errors[0].is_none());
    }

    #[test]
    fn benchmark_deterministic_modulo_time() {
        let ds = synthetic_regression(&SynthConfig::new(80, 3, 0.4, 39));
        let mut cfg = BenchmarkConfig::new(vec![Method::Rr, Method::Drr { m: 2 }], 11);
        cfg.trials = 3;
        cfg.grids = Grids {
            lambdas: vec![1e-3, 1e-1],
            gammas: vec![],
            sigmas: vec![],
        };
        let a = run_benchmark(&ds, &cfg).unwrap();
        let b = run_benchmark(&ds, &cfg).unwrap();
        for (ra, rb) in a.iter().zip(b.iter()) {
            assert_eq!(ra.method, rb.method);
            assert_eq!(ra.rmse, rb.rmse);
            assert_eq!(ra.comm_floats, rb.comm_floats);
            for (pa, pb) in ra.params.iter().zip(rb.params.iter()) {
                assert_eq!(pa, pb);
            }
        }
    }

    #[test]
    fn report_stats_recomputable_from_list() {
        let ds = synthetic_regression(&SynthConfig::new(60, 3, 0.4, 40));
        let mut cfg = BenchmarkConfig::new(vec![Method::Rr], 3);
        cfg.trials = 4;
        cfg.grids = Grids {
            lambdas: vec![1e-2],
            gammas: vec![],
            sigmas: vec![],
        };
        let reports = run_benchmark(&ds, &cfg).unwrap();
        let (mean, std) = mean_std(&reports[0].rmse);
        assert!((mean - reports[0].mean_rmse).abs() < 1e-12);
        assert!((std - reports[0].std_rmse).abs() < 1e-12);
    }

    #[test]
    fn report_csv_shape() {
        let ds = synthetic_regression(&SynthConfig::new(40, 2, 0.3, 41));
        let mut cfg =
            BenchmarkConfig::new(vec![Method::Rr, Method::Drr { m: 2 }, Method::MddLs { m: 2 }], 3);
        cfg.trials = 2;
        cfg.grids = Grids {
            lambdas: vec![1e-2],
            gammas: vec![1e-3],
            sigmas: vec![],
        };
        let reports = run_benchmark(&ds, &cfg).unwrap();
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "method,trial,rmse,time_s,floats_comm,lambda,gamma,sigma");
        assert_eq!(lines.len(), 1 + 3 * 2);
        assert!(lines[1].starts_with("rr,0,"));
        assert!(lines[3].starts_with("drr-2,0,"));
        assert!(lines[5].starts_with("mdd-ls-2,0,"));
    }

    #[test]
    fn plan_counts_default_protocol() {
        let cfg = BenchmarkConfig::new(
            vec![Method::Rr, Method::MddLs { m: 5 }, Method::MddRkhs { m: 5 }],
            0,
        );
        let plan = plan_benchmark(&cfg);
        assert_eq!(plan.trials, 30);
        assert_eq!(plan.folds, 5);
        assert_eq!(plan.lambda_points, 10);
        assert_eq!(plan.gamma_points, 10);
        assert_eq!(plan.sigma_points, 21);
        assert_eq!(plan.methods[0].grid_cells, 10);
        assert_eq!(plan.methods[1].grid_cells, 100);
        assert_eq!(plan.methods[2].grid_cells, 2100);
        assert_eq!(plan.methods[1].fits_per_trial, 501);
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.t, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
        assert!(!r.significant_95);
    }

    #[test]
    fn welch_constant_equal_samples_defined() {
        let r = welch_t_test(&[2.0, 2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p, 1.0);
        assert!(!r.significant_95);
    }

    #[test]
    fn welch_separated_samples_significant() {
        let a = [0.0, 1e-6, -1e-6, 2e-6];
        let b = [1.0, 1.0 + 1e-6, 1.0 - 1e-6, 1.0 + 2e-6];
        let r = welch_t_test(&a, &b).unwrap();
        assert!(r.significant_95);
        assert!(r.p < 1e-6);
    }

    #[test]
    fn welch_symmetry_under_swap() {
        let a = [0.3, 0.9, 1.4, 0.2, 0.7];
        let b = [1.1, 1.3, 0.8, 1.9];
        let ab = welch_t_test(&a, &b).unwrap();
        let ba = welch_t_test(&b, &a).unwrap();
        assert!((ab.t + ba.t).abs() < 1e-12);
        assert!((ab.p - ba.p).abs() < 1e-12);
        assert_eq!(ab.significant_95, ba.significant_95);
    }

    #[test]
    fn welch_p_matches_integration_oracle() {
        // oracle: two-sided p = 1 - 2 * integral_0^{|t|} pdf(x) dx via
        // Simpson's rule with a hand-rolled log-gamma
        #[allow(clippy::excessive_precision)]
        fn ln_gamma(x: f64) -> f64 {
            // Lanczos approximation, g = 7
            const COEF: [f64; 9] = [
                0.999_999_999_999_809_9,
                676.520_368_121_885_1,
                -1_259.139_216_722_402_8,
                771.323_428_777_653_1,
                -176.615_029_162_140_6,
                12.507_343_278_686_905,
                -0.138_571_095_265_720_12,
                9.984_369_578_019_572e-6,
                1.505_632_735_149_311_6e-7,
            ];
            let x = x - 1.0;
            let mut a = COEF[0];
            let t = x + 7.5;
            for (i, &c) in COEF.iter().enumerate().skip(1) {
                a += c / (x + i as f64);
            }
            0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
        }
        fn t_pdf(x: f64, df: f64) -> f64 {
            let log_norm = ln_gamma((df + 1.0) / 2.0)
                - ln_gamma(df / 2.0)
                - 0.5 * (df * std::f64::consts::PI).ln();
            (log_norm - (df + 1.0) / 2.0 * (1.0 + x * x / df).ln()).exp()
        }
        fn two_sided_p(t: f64, df: f64) -> f64 {
            let hi = t.abs();
            let steps = 200_000;
            let h = hi / steps as f64;
            let mut area = t_pdf(0.0, df) + t_pdf(hi, df);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                area += w * t_pdf(i as f64 * h, df);
            }
            (1.0 - 2.0 * (area * h / 3.0)).clamp(0.0, 1.0)
        }

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let a: Vec<f64> = (0..12).map(|_| rng.random::<f64>() * 2.0).collect();
            let b: Vec<f64> = (0..9).map(|_| rng.random::<f64>() * 2.0 + 0.4).collect();
            let r = welch_t_test(&a, &b).unwrap();
            let oracle = two_sided_p(r.t, r.df);
            assert!(
                (r.p - oracle).abs() < 1e-6,
                "p = {}, oracle = {}",
                r.p,
                oracle
            );
        }
    }

    #[test]
    fn welch_rejects_tiny_samples() {
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn derive_seed_streams_differ() {
        let base = derive_seed(7, STREAM_SPLIT, 0);
        assert_ne!(base, derive_seed(7, STREAM_TRIAL, 0));
        assert_ne!(base, derive_seed(7, STREAM_SPLIT, 1));
        assert_eq!(base, derive_seed(7, STREAM_SPLIT, 0));
    }
}
