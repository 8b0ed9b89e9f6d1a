//! Distributed empirical-risk minimization for least-squares regression.
//!
//! The crate trains ridge and kernel ridge regressors either globally or in a
//! divide-and-conquer fashion (`m` disjoint shards solved independently and
//! averaged), and extends the divide-and-conquer estimators with
//! *max-diversity* training: an iterative scheme that nudges each shard's
//! model away from the leave-one-out average of the others, increasing the
//! pairwise spread of the ensemble while keeping each local fit anchored to
//! its own data.
//!
//! The iteration runs on an in-process synchronous parameter-server engine
//! ([`paramserver`]) that counts every float pushed and pulled, so the
//! communication cost of a run is an exact integer, not an estimate.
//!
//! Module map:
//!
//! - [`data`] — LIBSVM parsing, train/test splits, disjoint partitions,
//!   standardization, a flat binary dataset cache, and a synthetic-data
//!   generator for demos and tests.
//! - [`linalg`] — dense Cholesky solves, Gram/kernel matrix construction, and
//!   the elementwise fast inverse-apply shortcut (with its exact-solve
//!   fallback).
//! - [`baselines`] — global and divide-and-conquer trainers (`rr`, `drr`,
//!   `krr`, `kdrr`), prediction, and model (de)serialization.
//! - [`mdd`] — max-diversity training in linear space and RKHS, the
//!   empirical diversity meter, and per-round traces.
//! - [`paramserver`] — the synchronous round engine with exact message
//!   accounting.
//! - [`eval`] — RMSE, k-fold cross-validated grid search, the repeated-split
//!   benchmark harness, and Welch's t-test.
//! - [`cli`] — the `mdd` binary's `train` / `benchmark` / `diversity`
//!   subcommands.
//!
//! Most capabilities have a runnable demo under `examples/`; see the README
//! for the full list.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod eval;
pub mod linalg;
pub mod mdd;
pub mod paramserver;

pub use baselines::{LinearModel, ShardedKernelModel, TrainedModel};
pub use data::{Dataset, Partition};
pub use linalg::{KernelConfig, SpdFactor};
pub use mdd::{RoundTrace, SolverMode, TrainConfig};
