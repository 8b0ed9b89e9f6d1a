//! Synchronous worker/server round engine with exact message accounting.
//!
//! A run alternates a worker phase (each of the `m` workers receives its pull
//! payload and produces a push payload; workers share no mutable state and
//! may execute on several threads) and a server phase (single-threaded, sees
//! all pushes, decides to stop or to emit the next round's pulls). The engine
//! is the only owner of the float counters and updates them between phases,
//! so `floats_pushed` / `floats_pulled` are exact integers: the sum of the
//! payload lengths actually delivered.
//!
//! The protocol is an in-process simulation: "push" and "pull" are in-memory
//! handoffs with counted sizes, and no worker starts round `t + 1` before the
//! server finishes round `t`.

use std::sync::Mutex;
use std::time::Instant;

use thiserror::Error;

pub type Payload = Vec<f64>;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("worker {worker} failed: {message}")]
    Worker { worker: usize, message: String },
    #[error("server failed: {0}")]
    Server(String),
    #[error("server must supply one pull per worker: expected {expected}, got {got}")]
    PullCountMismatch { expected: usize, got: usize },
    #[error("max_iters must be at least 1")]
    ZeroIterations,
}

/// What the server decides after seeing a round's pushes.
pub enum ServerDecision {
    /// Run another round with these per-worker pull payloads.
    Continue(Vec<Payload>),
    /// Terminate the run.
    Stop,
}

/// Per-round accounting snapshot. Counters are cumulative across the run.
#[derive(Debug, Clone)]
pub struct RoundStats {
    pub t: usize,
    pub floats_pushed: u64,
    pub floats_pulled: u64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// The server returned [`ServerDecision::Stop`].
    ServerStopped,
    /// The iteration cap was reached before the server stopped.
    MaxItersReached,
}

#[derive(Debug)]
pub struct EngineReport {
    pub outcome: RunOutcome,
    pub rounds: Vec<RoundStats>,
}

/// Worker task: `(round, worker id, pulled payload) -> pushed payload`.
pub type WorkerTask<'a> = dyn Fn(usize, usize, &[f64]) -> Result<Payload, EngineError> + Sync + 'a;
/// Server task: `(round, pushed payloads) -> decision`.
pub type ServerTask<'a> = dyn FnMut(usize, &[Payload]) -> Result<ServerDecision, EngineError> + 'a;

pub struct RoundEngine<'a> {
    m: usize,
    threads: usize,
    pending_pulls: Vec<Payload>,
    worker: Box<WorkerTask<'a>>,
    server: Box<ServerTask<'a>>,
    floats_pushed: u64,
    floats_pulled: u64,
}

impl<'a> RoundEngine<'a> {
    /// `initial_pulls` seeds round 1 with one payload per worker.
    pub fn new<W, S>(initial_pulls: Vec<Payload>, worker: W, server: S) -> Result<Self, EngineError>
    where
        W: Fn(usize, usize, &[f64]) -> Result<Payload, EngineError> + Sync + 'a,
        S: FnMut(usize, &[Payload]) -> Result<ServerDecision, EngineError> + 'a,
    {
        let m = initial_pulls.len();
        if m == 0 {
            return Err(EngineError::PullCountMismatch { expected: 1, got: 0 });
        }
        Ok(RoundEngine {
            m,
            threads: 1,
            pending_pulls: initial_pulls,
            worker: Box::new(worker),
            server: Box::new(server),
            floats_pushed: 0,
            floats_pulled: 0,
        })
    }

    /// Number of threads for the worker phase. Results are independent of
    /// this setting; it only affects wall time.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    /// Worker-phase thread count from the environment: `MDD_THREADS` if set,
    /// otherwise the machine's available parallelism.
    pub fn threads_from_env() -> usize {
        if let Ok(v) = std::env::var("MDD_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                return n.max(1);
            }
        }
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }

    pub fn workers(&self) -> usize {
        self.m
    }

    pub fn floats_pushed(&self) -> u64 {
        self.floats_pushed
    }

    pub fn floats_pulled(&self) -> u64 {
        self.floats_pulled
    }

    /// Run until the server stops or `max_iters` rounds complete.
    pub fn run(&mut self, max_iters: usize) -> Result<EngineReport, EngineError> {
        if max_iters == 0 {
            return Err(EngineError::ZeroIterations);
        }
        let mut rounds = Vec::new();
        for t in 1..=max_iters {
            let start = Instant::now();
            self.floats_pulled += self.pending_pulls.iter().map(|p| p.len() as u64).sum::<u64>();
            let pushes = self.worker_phase(t)?;
            self.floats_pushed += pushes.iter().map(|p| p.len() as u64).sum::<u64>();
            let decision = (self.server)(t, &pushes)?;
            rounds.push(RoundStats {
                t,
                floats_pushed: self.floats_pushed,
                floats_pulled: self.floats_pulled,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
            match decision {
                ServerDecision::Stop => {
                    return Ok(EngineReport {
                        outcome: RunOutcome::ServerStopped,
                        rounds,
                    })
                }
                ServerDecision::Continue(pulls) => {
                    if pulls.len() != self.m {
                        return Err(EngineError::PullCountMismatch {
                            expected: self.m,
                            got: pulls.len(),
                        });
                    }
                    self.pending_pulls = pulls;
                }
            }
        }
        Ok(EngineReport {
            outcome: RunOutcome::MaxItersReached,
            rounds,
        })
    }

    fn worker_phase(&self, t: usize) -> Result<Vec<Payload>, EngineError> {
        let pulls = &self.pending_pulls;
        let worker = &self.worker;
        if self.threads <= 1 || self.m == 1 {
            return (0..self.m).map(|i| worker(t, i, &pulls[i])).collect();
        }
        let threads = self.threads.min(self.m);
        let chunk = self.m.div_ceil(threads);
        let slots: Vec<Mutex<Option<Result<Payload, EngineError>>>> =
            (0..self.m).map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for start in (0..self.m).step_by(chunk) {
                let end = (start + chunk).min(self.m);
                let slots = &slots;
                scope.spawn(move || {
                    for i in start..end {
                        let result = worker(t, i, &pulls[i]);
                        *slots[i].lock().unwrap() = Some(result);
                    }
                });
            }
        });
        // first failure in worker-id order, independent of scheduling
        let mut out = Vec::with_capacity(self.m);
        for slot in slots {
            out.push(slot.into_inner().unwrap().expect("worker slot filled")?);
        }
        Ok(out)
    }
}
