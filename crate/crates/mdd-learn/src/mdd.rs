//! Max-diversity distributed training in linear space and RKHS, plus the
//! empirical diversity meter.
//!
//! Both trainers start from the plain divide-and-conquer solution
//! `w0_i = A_i^{-1} b_i` and then iterate on a synchronous parameter server:
//! each round, worker `i` pulls the leave-one-out average of the other
//! shards' state, computes a direction `d_i` against its cached local system,
//! and pushes `w_i = w0_i - gamma * d_i`. Every update is anchored at the
//! round-zero solution; only the pulled average changes between rounds, so
//! the iteration is a fixed-point map on the averages. With `gamma = 0` the
//! first round reproduces the divide-and-conquer estimator exactly and the
//! server stops immediately.
//!
//! The direction solve has two modes: `Exact` reuses the cached Cholesky
//! factor (`O(d^2)` or `O(n^2)` per apply), while `FastLemma4` uses the
//! `O(l)` elementwise shortcut [`crate::linalg::fast_inverse_apply`]. The
//! shortcut is not a valid inverse for `l >= 2` (its constructive identity
//! and divergence from the exact solve are both under test), so `Exact` is
//! the default; workers hitting the shortcut's zero guard fall back to the
//! exact solve and the event is recorded on the run.
//!
//! Convergence is not guaranteed for arbitrary `gamma`. Runs abort with a
//! divergence error once the consensus delta has grown for
//! [`DIVERGENCE_PATIENCE`] consecutive rounds or turns non-finite.
//!
//! Communication counters in the trace cover the iterative rounds (one pull
//! and one push per worker per round); the one-time setup push of the local
//! solutions happens before the loop and is not part of per-round accounting.

use std::io::Write;
use std::sync::Mutex;

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::baselines::{
    solve_kernel_shard, solve_linear_shard, KernelShard, LinearModel, ShardedKernelModel,
    TrainError,
};
use crate::linalg::{
    fast_inverse_apply, kernel_matrix, mean_vectors, KernelConfig, LinalgError, SpdFactor,
};
use crate::paramserver::{
    EngineError, Payload, RoundEngine, RunOutcome, ServerDecision,
};

pub const DEFAULT_ZETA: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100;
/// Consecutive rounds of growing consensus delta before a run is declared
/// divergent.
pub const DIVERGENCE_PATIENCE: usize = 5;

#[derive(Debug, Error)]
pub enum MddError {
    #[error("max-diversity training requires at least two shards, got {0}")]
    NeedTwoShards(usize),
    #[error("shard {0} is empty")]
    EmptyShard(usize),
    #[error("diverging (gamma too large): consensus delta grew for {patience} consecutive rounds ending at round {round}")]
    Diverging { round: usize, patience: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// How workers apply `A_i^{-1}` to the pulled average each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Cached Cholesky factor, numerically correct. The default.
    Exact,
    /// Elementwise `(d^T c) ./ b` shortcut with exact-solve fallback on the
    /// zero guard.
    FastLemma4,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Ridge strength, must be positive.
    pub lambda: f64,
    /// Diversity strength, non-negative. Zero reduces to plain
    /// divide-and-conquer training.
    pub gamma: f64,
    /// Stop threshold on the consensus delta.
    pub zeta: f64,
    /// Shard count; must match the number of shards passed to the trainer.
    pub m: usize,
    pub max_iters: usize,
    pub solver_mode: SolverMode,
    /// Gaussian kernel bandwidth for the RKHS trainer.
    pub sigma: Option<f64>,
}

impl TrainConfig {
    pub fn new(lambda: f64, gamma: f64, m: usize) -> Self {
        TrainConfig {
            lambda,
            gamma,
            zeta: DEFAULT_ZETA,
            m,
            max_iters: DEFAULT_MAX_ITERS,
            solver_mode: SolverMode::Exact,
            sigma: None,
        }
    }

    pub fn validate(&self) -> Result<(), MddError> {
        if self.lambda <= 0.0 || !self.lambda.is_finite() {
            return Err(MddError::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(MddError::Config(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if self.zeta <= 0.0 || !self.zeta.is_finite() {
            return Err(MddError::Config(format!(
                "zeta must be positive, got {}",
                self.zeta
            )));
        }
        if self.max_iters == 0 {
            return Err(MddError::Config("max_iters must be at least 1".into()));
        }
        if let Some(sigma) = self.sigma {
            if sigma <= 0.0 || !sigma.is_finite() {
                return Err(MddError::Config(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// One iteration record. Float counters are cumulative across the trace.
#[derive(Debug, Clone)]
pub struct RoundTrace {
    pub t: usize,
    /// `||wbar_t - wbar_{t-1}||_2`, or the mean per-shard cross-prediction
    /// delta in the RKHS trainer.
    pub consensus_delta: f64,
    /// Empirical diversity of the shard models pushed this round.
    pub diversity: f64,
    pub floats_pushed: u64,
    pub floats_pulled: u64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Consensus delta fell below `zeta` at this round.
    Converged { round: usize },
    /// Iteration cap hit; the returned model is the last iterate.
    MaxItersReached,
}

/// A worker's fast-mode shortcut was unavailable (zero-guarded `b` entry)
/// and the exact solve was used instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEvent {
    pub round: usize,
    pub worker: usize,
}

#[derive(Debug)]
pub struct MddLsRun {
    /// Final averaged weights.
    pub model: LinearModel,
    /// Final per-shard weights, shard-index order.
    pub shard_models: Vec<LinearModel>,
    pub trace: Vec<RoundTrace>,
    pub termination: Termination,
    pub fallbacks: Vec<FallbackEvent>,
}

#[derive(Debug)]
pub struct MddRkhsRun {
    pub model: ShardedKernelModel,
    pub trace: Vec<RoundTrace>,
    pub termination: Termination,
    pub fallbacks: Vec<FallbackEvent>,
}

/// Leave-one-out average: `(m * mean - member) / (m - 1)`.
pub fn loo_average(
    mean: ArrayView1<f64>,
    member: ArrayView1<f64>,
    m: usize,
) -> Result<Array1<f64>, MddError> {
    if m < 2 {
        return Err(MddError::NeedTwoShards(m));
    }
    if mean.len() != member.len() {
        return Err(MddError::Config(format!(
            "leave-one-out length mismatch: {} vs {}",
            mean.len(),
            member.len()
        )));
    }
    let mf = m as f64;
    Ok((&mean.mapv(|v| v * mf) - &member) / (mf - 1.0))
}

fn l2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Per-worker direction solve shared by both trainers.
#[allow(clippy::too_many_arguments)]
fn worker_direction(
    t: usize,
    worker: usize,
    factor: &SpdFactor,
    w0: &Array1<f64>,
    b: &Array1<f64>,
    mode: SolverMode,
    pulled: &[f64],
    fallbacks: &Mutex<Vec<FallbackEvent>>,
) -> Result<Array1<f64>, EngineError> {
    let pulled = ArrayView1::from(pulled);
    let result = match mode {
        SolverMode::Exact => factor.solve(pulled),
        SolverMode::FastLemma4 => match fast_inverse_apply(w0.view(), b.view(), pulled) {
            Ok(d) => Ok(d),
            Err(LinalgError::FastApplyUnavailable { .. }) => {
                fallbacks
                    .lock()
                    .unwrap()
                    .push(FallbackEvent { round: t, worker });
                factor.solve(pulled)
            }
            Err(e) => Err(e),
        },
    };
    result.map_err(|e| EngineError::Worker {
        worker,
        message: e.to_string(),
    })
}

/// Stop/divergence bookkeeping shared by both server tasks.
struct StopTracker {
    zeta: f64,
    last_delta: Option<f64>,
    grow_streak: usize,
    diverged_at: Option<usize>,
}

impl StopTracker {
    fn new(zeta: f64) -> Self {
        StopTracker {
            zeta,
            last_delta: None,
            grow_streak: 0,
            diverged_at: None,
        }
    }

    /// Returns true when the engine should stop this round.
    fn observe(&mut self, t: usize, delta: f64) -> bool {
        if !delta.is_finite() {
            self.diverged_at = Some(t);
            return true;
        }
        if delta <= self.zeta {
            return true;
        }
        if let Some(prev) = self.last_delta {
            if delta > prev {
                self.grow_streak += 1;
            } else {
                self.grow_streak = 0;
            }
        }
        self.last_delta = Some(delta);
        if self.grow_streak >= DIVERGENCE_PATIENCE {
            self.diverged_at = Some(t);
            return true;
        }
        false
    }
}

fn drain_fallbacks(fallbacks: Mutex<Vec<FallbackEvent>>) -> Vec<FallbackEvent> {
    let mut events = fallbacks.into_inner().unwrap();
    events.sort_by_key(|e| (e.round, e.worker));
    events
}

fn assemble_trace(rounds: &[crate::paramserver::RoundStats], metrics: &[(f64, f64)]) -> Vec<RoundTrace> {
    rounds
        .iter()
        .zip(metrics)
        .map(|(r, &(consensus_delta, diversity))| RoundTrace {
            t: r.t,
            consensus_delta,
            diversity,
            floats_pushed: r.floats_pushed,
            floats_pulled: r.floats_pulled,
            elapsed_s: r.elapsed_s,
        })
        .collect()
}

/// Max-diversity training in linear space.
///
/// `shards[i]` holds shard `i`'s samples as `n_i x d` feature rows plus its
/// `n_i` targets. Returns the final averaged model, the per-shard models,
/// and the full per-round trace.
pub fn mdd_ls_train(
    shards: &[(Array2<f64>, Array1<f64>)],
    cfg: &TrainConfig,
) -> Result<MddLsRun, MddError> {
    cfg.validate()?;
    let m = shards.len();
    if m < 2 {
        return Err(MddError::NeedTwoShards(m));
    }
    if cfg.m != m {
        return Err(MddError::Config(format!(
            "config says m = {}, but {} shards were provided",
            cfg.m, m
        )));
    }
    let d = shards[0].0.ncols();
    for (i, (x, y)) in shards.iter().enumerate() {
        if x.nrows() == 0 {
            return Err(MddError::EmptyShard(i));
        }
        if x.ncols() != d || y.len() != x.nrows() {
            return Err(MddError::Config(format!("shard {i} has inconsistent shape")));
        }
    }

    // Setup: local solves and the first leave-one-out averages.
    let systems: Vec<_> = shards
        .iter()
        .map(|(x, y)| solve_linear_shard(x.view(), y.view(), cfg.lambda))
        .collect::<Result<_, _>>()?;
    let w0: Vec<Array1<f64>> = systems.iter().map(|s| s.w0.clone()).collect();
    let wbar0 = mean_vectors(&w0);
    let initial_pulls: Vec<Payload> = w0
        .iter()
        .map(|w| loo_average(wbar0.view(), w.view(), m).map(|v| v.to_vec()))
        .collect::<Result<_, _>>()?;

    struct LsState {
        wbar: Array1<f64>,
        models: Vec<Array1<f64>>,
        metrics: Vec<(f64, f64)>,
        tracker: StopTracker,
    }
    let mut state = LsState {
        wbar: wbar0,
        models: w0,
        metrics: Vec::new(),
        tracker: StopTracker::new(cfg.zeta),
    };
    let fallbacks = Mutex::new(Vec::new());
    let gamma = cfg.gamma;
    let mode = cfg.solver_mode;

    let report = {
        let worker = |t: usize, i: usize, pulled: &[f64]| -> Result<Payload, EngineError> {
            let dir = worker_direction(
                t,
                i,
                &systems[i].factor,
                &systems[i].w0,
                &systems[i].b,
                mode,
                pulled,
                &fallbacks,
            )?;
            Ok((&systems[i].w0 - &(dir * gamma)).to_vec())
        };
        let server = |t: usize, pushes: &[Payload]| -> Result<ServerDecision, EngineError> {
            let models: Vec<Array1<f64>> =
                pushes.iter().map(|p| Array1::from_vec(p.clone())).collect();
            let wbar = mean_vectors(&models);
            let delta = l2(&(&wbar - &state.wbar));
            let diversity = diversity_of_weights(&models);
            state.metrics.push((delta, diversity));
            state.models = models;
            state.wbar = wbar;
            if state.tracker.observe(t, delta) {
                return Ok(ServerDecision::Stop);
            }
            let pulls = state
                .models
                .iter()
                .map(|w| {
                    loo_average(state.wbar.view(), w.view(), m)
                        .map(|v| v.to_vec())
                        .map_err(|e| EngineError::Server(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ServerDecision::Continue(pulls))
        };
        let mut engine = RoundEngine::new(initial_pulls, worker, server)?
            .with_threads(RoundEngine::threads_from_env());
        engine.run(cfg.max_iters)?
    };

    if let Some(round) = state.tracker.diverged_at {
        return Err(MddError::Diverging {
            round,
            patience: DIVERGENCE_PATIENCE,
        });
    }
    let termination = match report.outcome {
        RunOutcome::ServerStopped => Termination::Converged {
            round: report.rounds.last().map(|r| r.t).unwrap_or(0),
        },
        RunOutcome::MaxItersReached => Termination::MaxItersReached,
    };
    Ok(MddLsRun {
        model: LinearModel { w: state.wbar },
        shard_models: state
            .models
            .into_iter()
            .map(|w| LinearModel { w })
            .collect(),
        trace: assemble_trace(&report.rounds, &state.metrics),
        termination,
        fallbacks: drain_fallbacks(fallbacks),
    })
}

/// Max-diversity training in RKHS.
///
/// The server maintains the cross-shard kernel blocks `K_{i,j}` and the
/// per-shard cross predictions `g_{i,j} = K_{i,j} w_j`; workers pull the
/// leave-one-out averaged prediction and push updated coefficients. Stops
/// when the mean `||gbar_i^t - gbar_i^{t-1}||_2` falls below `zeta`.
pub fn mdd_rkhs_train(
    shards: &[(Array2<f64>, Array1<f64>)],
    cfg: &TrainConfig,
    kernel: &KernelConfig,
) -> Result<MddRkhsRun, MddError> {
    cfg.validate()?;
    let m = shards.len();
    if m < 2 {
        return Err(MddError::NeedTwoShards(m));
    }
    if cfg.m != m {
        return Err(MddError::Config(format!(
            "config says m = {}, but {} shards were provided",
            cfg.m, m
        )));
    }
    for (i, (x, _)) in shards.iter().enumerate() {
        if x.nrows() == 0 {
            return Err(MddError::EmptyShard(i));
        }
    }

    let systems: Vec<_> = shards
        .iter()
        .map(|(x, y)| solve_kernel_shard(x.clone(), y.view(), cfg.lambda, kernel))
        .collect::<Result<_, _>>()?;

    // Cross-shard kernel blocks; the diagonal reuses each system's own block
    // and K_{j,i} is the exact transpose of K_{i,j}.
    let mut blocks: Vec<Vec<Array2<f64>>> =
        vec![vec![Array2::zeros((0, 0)); m]; m];
    for i in 0..m {
        blocks[i][i] = systems[i].kii.clone();
        for j in i + 1..m {
            let kij = kernel_matrix(
                systems[i].anchors.view(),
                systems[j].anchors.view(),
                kernel,
            )?;
            blocks[j][i] = kij.t().to_owned();
            blocks[i][j] = kij;
        }
    }

    let w0: Vec<Array1<f64>> = systems.iter().map(|s| s.w0.clone()).collect();
    let cross0 = cross_predictions(&blocks, &w0);
    let gbar0: Vec<Array1<f64>> = cross0.iter().map(|row| mean_vectors(row)).collect();
    let initial_pulls: Vec<Payload> = (0..m)
        .map(|i| loo_average(gbar0[i].view(), cross0[i][i].view(), m).map(|v| v.to_vec()))
        .collect::<Result<_, _>>()?;

    struct RkhsState {
        gbar: Vec<Array1<f64>>,
        coeffs: Vec<Array1<f64>>,
        metrics: Vec<(f64, f64)>,
        tracker: StopTracker,
    }
    let mut state = RkhsState {
        gbar: gbar0,
        coeffs: w0,
        metrics: Vec::new(),
        tracker: StopTracker::new(cfg.zeta),
    };
    let fallbacks = Mutex::new(Vec::new());
    let gamma = cfg.gamma;
    let mode = cfg.solver_mode;

    let report = {
        let blocks = &blocks;
        let worker = |t: usize, i: usize, pulled: &[f64]| -> Result<Payload, EngineError> {
            let dir = worker_direction(
                t,
                i,
                &systems[i].factor,
                &systems[i].w0,
                &systems[i].b,
                mode,
                pulled,
                &fallbacks,
            )?;
            Ok((&systems[i].w0 - &(dir * gamma)).to_vec())
        };
        let server = |t: usize, pushes: &[Payload]| -> Result<ServerDecision, EngineError> {
            let coeffs: Vec<Array1<f64>> =
                pushes.iter().map(|p| Array1::from_vec(p.clone())).collect();
            let cross = cross_predictions(blocks, &coeffs);
            let gbar: Vec<Array1<f64>> = cross.iter().map(|row| mean_vectors(row)).collect();
            let delta = gbar
                .iter()
                .zip(&state.gbar)
                .map(|(cur, prev)| l2(&(cur - prev)))
                .sum::<f64>()
                / m as f64;
            let diversity = diversity_from_pairwise(&rkhs_pairwise(&coeffs, &cross));
            state.metrics.push((delta, diversity));
            state.coeffs = coeffs;
            state.gbar = gbar;
            if state.tracker.observe(t, delta) {
                return Ok(ServerDecision::Stop);
            }
            let pulls = (0..m)
                .map(|i| {
                    loo_average(state.gbar[i].view(), cross[i][i].view(), m)
                        .map(|v| v.to_vec())
                        .map_err(|e| EngineError::Server(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ServerDecision::Continue(pulls))
        };
        let mut engine = RoundEngine::new(initial_pulls, worker, server)?
            .with_threads(RoundEngine::threads_from_env());
        engine.run(cfg.max_iters)?
    };

    if let Some(round) = state.tracker.diverged_at {
        return Err(MddError::Diverging {
            round,
            patience: DIVERGENCE_PATIENCE,
        });
    }
    let termination = match report.outcome {
        RunOutcome::ServerStopped => Termination::Converged {
            round: report.rounds.last().map(|r| r.t).unwrap_or(0),
        },
        RunOutcome::MaxItersReached => Termination::MaxItersReached,
    };
    let model = ShardedKernelModel {
        shards: systems
            .into_iter()
            .zip(state.coeffs)
            .map(|(sys, coeffs)| KernelShard {
                anchors: sys.anchors,
                coeffs,
            })
            .collect(),
        kernel: kernel.clone(),
    };
    Ok(MddRkhsRun {
        model,
        trace: assemble_trace(&report.rounds, &state.metrics),
        termination,
        fallbacks: drain_fallbacks(fallbacks),
    })
}

/// `g_{i,j} = K_{i,j} w_j` for all shard pairs.
fn cross_predictions(
    blocks: &[Vec<Array2<f64>>],
    coeffs: &[Array1<f64>],
) -> Vec<Vec<Array1<f64>>> {
    blocks
        .iter()
        .map(|row| {
            row.iter()
                .zip(coeffs)
                .map(|(kij, wj)| kij.dot(wj))
                .collect()
        })
        .collect()
}

/// Pairwise squared distances between linear models' weight vectors.
pub fn pairwise_sq_distances_linear(models: &[LinearModel]) -> Result<Array2<f64>, MddError> {
    if models.len() < 2 {
        return Err(MddError::NeedTwoShards(models.len()));
    }
    let ws: Vec<Array1<f64>> = models.iter().map(|m| m.w.clone()).collect();
    Ok(linear_pairwise(&ws))
}

fn linear_pairwise(ws: &[Array1<f64>]) -> Array2<f64> {
    let m = ws.len();
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        for j in i + 1..m {
            let diff = &ws[i] - &ws[j];
            let d2 = diff.dot(&diff);
            out[[i, j]] = d2;
            out[[j, i]] = d2;
        }
    }
    out
}

fn diversity_from_pairwise(pairwise: &Array2<f64>) -> f64 {
    let m = pairwise.nrows() as f64;
    pairwise.sum() / (m * m)
}

/// Empirical diversity of an ensemble of linear models:
/// `(1/m^2) sum_{i != j} ||w_i - w_j||_2^2`. Zero iff all models are equal.
pub fn diversity_linear(models: &[LinearModel]) -> Result<f64, MddError> {
    Ok(diversity_from_pairwise(&pairwise_sq_distances_linear(
        models,
    )?))
}

fn diversity_of_weights(ws: &[Array1<f64>]) -> f64 {
    diversity_from_pairwise(&linear_pairwise(ws))
}

/// Pairwise squared RKHS distances between a kernel model's shard
/// predictors: `||f_i - f_j||^2 = w_i^T K_ii w_i - 2 w_i^T K_ij w_j +
/// w_j^T K_jj w_j`, the expansion of the reproducing-kernel inner product.
pub fn pairwise_sq_distances_rkhs(model: &ShardedKernelModel) -> Result<Array2<f64>, MddError> {
    let m = model.shards.len();
    if m < 2 {
        return Err(MddError::NeedTwoShards(m));
    }
    let mut blocks: Vec<Vec<Array2<f64>>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = Vec::with_capacity(m);
        for j in 0..m {
            if j < i {
                row.push(blocks[j][i].t().to_owned());
            } else {
                row.push(kernel_matrix(
                    model.shards[i].anchors.view(),
                    model.shards[j].anchors.view(),
                    &model.kernel,
                )?);
            }
        }
        blocks.push(row);
    }
    let coeffs: Vec<Array1<f64>> = model.shards.iter().map(|s| s.coeffs.clone()).collect();
    let cross = cross_predictions(&blocks, &coeffs);
    Ok(rkhs_pairwise(&coeffs, &cross))
}

fn rkhs_pairwise(coeffs: &[Array1<f64>], cross: &[Vec<Array1<f64>>]) -> Array2<f64> {
    let m = coeffs.len();
    // self energies w_i^T K_ii w_i
    let self_energy: Vec<f64> = (0..m).map(|i| coeffs[i].dot(&cross[i][i])).collect();
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        for j in i + 1..m {
            let inner = coeffs[i].dot(&cross[i][j]); // w_i^T K_ij w_j
            let d2 = self_energy[i] - 2.0 * inner + self_energy[j];
            out[[i, j]] = d2;
            out[[j, i]] = d2;
        }
    }
    out
}

/// Empirical diversity of a kernel ensemble in RKHS norm; non-negative up to
/// round-off.
pub fn diversity_rkhs(model: &ShardedKernelModel) -> Result<f64, MddError> {
    Ok(diversity_from_pairwise(&pairwise_sq_distances_rkhs(model)?))
}

/// Trace export: `t,consensus_delta,diversity,floats_pushed,floats_pulled,elapsed_s`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[RoundTrace]) -> std::io::Result<()> {
    writeln!(
        w,
        "t,consensus_delta,diversity,floats_pushed,floats_pulled,elapsed_s"
    )?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.t, r.consensus_delta, r.diversity, r.floats_pushed, r.floats_pulled, r.elapsed_s
        )?;
    }
    Ok(())
}
