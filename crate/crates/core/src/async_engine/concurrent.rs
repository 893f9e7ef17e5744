//! Thread-per-rank executors.
//!
//! Rank 0 owns the global model (and the complement, whose reaction is a
//! post-processing of the global solve). Patches are dealt round-robin to
//! ranks `1..rank_count`. Each patch rank exposes a window receiving the
//! global trace `u_Γ`; the global rank exposes one window per patch receiving
//! its projected reaction `q^s`.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Barrier, Mutex};
use std::time::{Duration, Instant};

use nalgebra::DVector;

use super::simulated::{AsyncTrace, TraceRecord};
use super::window::{WindowCell, WindowReader};
use crate::coupling_topology::{CouplingScenario, SubdomainKind};
use crate::error::{CouplingError, Result};
use crate::solvers::{
    global_solve, IterationRecord, Monitor, Relaxation, RelaxationState, SolveReport, Status, StoppingCriteria,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ConcurrentOptions {
    pub omega: f64,
    pub criteria: StoppingCriteria,
    /// One global rank plus at least one patch rank.
    pub rank_count: usize,
    /// Recompute with whatever data is available instead of waiting for
    /// new versions.
    pub always_recompute: bool,
    /// The global rank waits while a contribution is older than this many
    /// steps. `None` leaves delays unbounded.
    pub max_delay: Option<usize>,
    /// Artificial work added to every patch solve.
    pub solve_cost: Duration,
    /// Per-patch multiplier of `solve_cost` (missing entries count as 1).
    pub slowdown: Vec<f64>,
    /// Livelock is declared when no window changes for this long.
    pub watchdog: Option<Duration>,
}

impl ConcurrentOptions {
    pub fn new(omega: f64, rank_count: usize) -> Self {
        ConcurrentOptions {
            omega,
            criteria: StoppingCriteria::default(),
            rank_count,
            always_recompute: true,
            max_delay: None,
            solve_cost: Duration::ZERO,
            slowdown: Vec::new(),
            watchdog: Some(Duration::from_secs(10)),
        }
    }
}

struct Backoff(u32);

impl Backoff {
    fn new() -> Self {
        Backoff(0)
    }

    fn snooze(&mut self) {
        self.0 += 1;
        if self.0 < 64 {
            std::thread::yield_now();
        } else {
            std::thread::sleep(Duration::from_micros(50));
        }
    }

    fn reset(&mut self) {
        self.0 = 0;
    }
}

struct Shared<'a> {
    scenario: &'a CouplingScenario,
    patch_slots: Vec<usize>,
    owner_rank: Vec<usize>,
    u_windows: Vec<WindowCell>,
    q_windows: Vec<WindowCell>,
    progress: AtomicU64,
    abort: AtomicBool,
    finished: AtomicBool,
    patch_solves: Vec<AtomicUsize>,
    error: Mutex<Option<CouplingError>>,
}

impl<'a> Shared<'a> {
    fn new(scenario: &'a CouplingScenario, rank_count: usize) -> Result<Self> {
        if rank_count < 2 {
            return Err(CouplingError::invalid(format!("need at least 2 ranks, got {rank_count}")));
        }
        let patch_slots: Vec<usize> = (0..scenario.subdomains.len())
            .filter(|&s| scenario.subdomains[s].kind == SubdomainKind::Patch)
            .collect();
        let workers = rank_count - 1;
        let owner_rank = (0..patch_slots.len()).map(|k| 1 + k % workers).collect();
        Ok(Shared {
            scenario,
            u_windows: (1..rank_count).map(|r| WindowCell::new(r, Vec::new())).collect(),
            q_windows: patch_slots.iter().map(|_| WindowCell::new(0, Vec::new())).collect(),
            patch_slots,
            owner_rank,
            progress: AtomicU64::new(0),
            abort: AtomicBool::new(false),
            finished: AtomicBool::new(false),
            patch_solves: Vec::new(),
            error: Mutex::new(None),
        }
        .with_counters())
    }

    fn with_counters(mut self) -> Self {
        self.patch_solves = self.patch_slots.iter().map(|_| AtomicUsize::new(0)).collect();
        self
    }

    fn patches_of(&self, rank: usize) -> Vec<usize> {
        (0..self.patch_slots.len()).filter(|&k| self.owner_rank[k] == rank).collect()
    }

    fn fail(&self, e: CouplingError) {
        let mut slot = self.error.lock().expect("error slot poisoned");
        slot.get_or_insert(e);
        self.abort.store(true, Ordering::SeqCst);
    }

    fn publish_trace(&self, source: u64, stop: bool, u: &DVector<f64>) {
        for w in &self.u_windows {
            w.put(source, stop, u.as_slice().to_vec());
        }
        self.progress.fetch_add(1, Ordering::SeqCst);
    }

    fn solve_counts(&self) -> Vec<usize> {
        self.patch_solves.iter().map(|c| c.load(Ordering::SeqCst)).collect()
    }

    fn take_error(&self) -> Option<CouplingError> {
        self.error.lock().expect("error slot poisoned").take()
    }
}

fn patch_rank_async(shared: &Shared<'_>, rank: usize, opts: &ConcurrentOptions) {
    let mine = shared.patches_of(rank);
    let window = &shared.u_windows[rank - 1];
    let mut reader = WindowReader::default();
    let mut last_source: Vec<Option<u64>> = vec![None; mine.len()];
    let mut backoff = Backoff::new();
    while !shared.abort.load(Ordering::SeqCst) {
        let u = match reader.read(window) {
            Ok(u) => u,
            Err(e) => return shared.fail(e),
        };
        if u.stop {
            return;
        }
        if u.version == 0 {
            backoff.snooze();
            continue;
        }
        let u_gamma = DVector::from_column_slice(&u.data);
        let mut worked = false;
        for (i, &k) in mine.iter().enumerate() {
            if !opts.always_recompute && last_source[i] == Some(u.source) {
                continue;
            }
            let q = shared.scenario.subdomains[shared.patch_slots[k]].reaction(&u_gamma);
            let factor = opts.slowdown.get(k).copied().unwrap_or(1.0);
            if !opts.solve_cost.is_zero() {
                std::thread::sleep(opts.solve_cost.mul_f64(factor));
            }
            shared.q_windows[k].put(u.source, false, q.as_slice().to_vec());
            shared.patch_solves[k].fetch_add(1, Ordering::SeqCst);
            shared.progress.fetch_add(1, Ordering::SeqCst);
            last_source[i] = Some(u.source);
            worked = true;
        }
        if worked {
            backoff.reset();
            std::thread::yield_now();
        } else {
            backoff.snooze();
        }
    }
}

fn global_rank_async(
    shared: &Shared<'_>,
    opts: &ConcurrentOptions,
    comp_slot: Option<usize>,
) -> Result<(SolveReport, AsyncTrace)> {
    let scenario = shared.scenario;
    let n_sub = scenario.subdomains.len();
    let mut monitor = Monitor::new(scenario, opts.criteria);
    let mut trace = AsyncTrace::new(scenario);
    let mut report = SolveReport {
        history: Vec::new(),
        converged: false,
        final_u_gamma: DVector::zeros(0),
        final_p_gamma: DVector::zeros(scenario.interface_size()),
        total_global_solves: 0,
        per_patch_solves: vec![0; shared.patch_slots.len()],
    };
    let mut readers: Vec<WindowReader> = vec![WindowReader::default(); shared.q_windows.len()];
    let mut p = DVector::zeros(scenario.interface_size());
    let mut u = global_solve(scenario, &p);
    report.total_global_solves += 1;
    shared.publish_trace(0, false, &u);
    let mut backoff = Backoff::new();
    let mut seen_version: Vec<u64> = vec![0; shared.q_windows.len()];
    let mut j: usize = 0;
    let finish = |report: &mut SolveReport, stop_u: &DVector<f64>, j: usize| {
        shared.publish_trace(j as u64, true, stop_u);
        report.per_patch_solves = shared.solve_counts();
    };
    loop {
        // gather the latest reactions, honouring warm-up, throttle and novelty
        let payloads = loop {
            if shared.abort.load(Ordering::SeqCst) {
                finish(&mut report, &u, j);
                return Err(shared
                    .take_error()
                    .unwrap_or_else(|| CouplingError::Livelock("run aborted".into())));
            }
            let mut payloads = Vec::with_capacity(readers.len());
            for (reader, w) in readers.iter_mut().zip(&shared.q_windows) {
                payloads.push(reader.read(w)?);
            }
            let warm = payloads.iter().all(|q| q.version > 0);
            let bounded = opts.max_delay.is_none_or(|d| payloads.iter().all(|q| j - q.source as usize <= d));
            let novel = opts.always_recompute
                || j == 0
                || payloads.iter().zip(&seen_version).any(|(q, &v)| q.version > v);
            if warm && bounded && novel {
                break payloads;
            }
            backoff.snooze();
        };
        backoff.reset();
        for (v, q) in seen_version.iter_mut().zip(&payloads) {
            *v = q.version;
        }
        let mut sigma = vec![0usize; n_sub];
        let mut reactions: Vec<DVector<f64>> = vec![DVector::zeros(0); n_sub];
        for (k, q) in payloads.iter().enumerate() {
            let s = shared.patch_slots[k];
            sigma[s] = j - q.source as usize;
            reactions[s] = DVector::from_column_slice(&q.data);
        }
        if let Some(c) = comp_slot {
            reactions[c] = scenario.subdomains[c].reaction(&u);
        }
        let r = scenario.assemble_residual(&reactions);
        let norm = r.norm();
        let status = monitor.check(norm);
        report.history.push(IterationRecord {
            j,
            p_gamma: p.clone(),
            residual: r.clone(),
            residual_norm: norm,
            omega: opts.omega,
            wall_time: monitor.elapsed(),
            delays: sigma.clone(),
        });
        let mut solves = vec![report.total_global_solves];
        solves.extend(shared.solve_counts());
        trace.records.push(TraceRecord {
            j,
            sigma,
            residual_norm: norm,
            omega: opts.omega,
            solves,
        });
        report.final_u_gamma = u.clone();
        report.final_p_gamma = p.clone();
        match status {
            Status::Converged => {
                report.converged = true;
                finish(&mut report, &u, j);
                return Ok((report, trace));
            }
            Status::Diverged => {
                finish(&mut report, &u, j);
                return Err(CouplingError::Divergence { report: Box::new(report) });
            }
            Status::Continue => {}
        }
        if j >= monitor.max_iter() {
            finish(&mut report, &u, j);
            return Ok((report, trace));
        }
        p += opts.omega * &r;
        j += 1;
        u = global_solve(scenario, &p);
        report.total_global_solves += 1;
        shared.publish_trace(j as u64, false, &u);
        std::thread::yield_now();
    }
}

/// Asynchronous iteration with one thread per rank.
///
/// The calling thread acts as watchdog: if no window changes during
/// `options.watchdog`, every rank is stopped and a livelock error returned.
pub fn run_async_concurrent(
    scenario: &CouplingScenario,
    options: &ConcurrentOptions,
) -> Result<(SolveReport, AsyncTrace)> {
    if !(options.omega > 0.0 && options.omega.is_finite()) {
        return Err(CouplingError::invalid(format!("relaxation must be positive, got {}", options.omega)));
    }
    options.criteria.validate()?;
    let shared = Shared::new(scenario, options.rank_count)?;
    let comp_slot = scenario.subdomains.iter().position(|s| s.kind == SubdomainKind::Complement);
    std::thread::scope(|scope| {
        for rank in 1..options.rank_count {
            let shared = &shared;
            scope.spawn(move || patch_rank_async(shared, rank, options));
        }
        let global = scope.spawn(|| {
            let out = global_rank_async(&shared, options, comp_slot);
            shared.finished.store(true, Ordering::SeqCst);
            out
        });
        let mut last_progress = shared.progress.load(Ordering::SeqCst);
        let mut last_change = Instant::now();
        while !shared.finished.load(Ordering::SeqCst) {
            std::thread::sleep(Duration::from_millis(2));
            let now = shared.progress.load(Ordering::SeqCst);
            if now != last_progress {
                last_progress = now;
                last_change = Instant::now();
            } else if let Some(limit) = options.watchdog {
                if last_change.elapsed() > limit {
                    shared.fail(CouplingError::Livelock(format!("no window advanced for {limit:?}")));
                    break;
                }
            }
        }
        let out = global.join().expect("global rank panicked");
        shared.abort.store(true, Ordering::SeqCst);
        out
    })
}

/// Synchronous iteration with fence (barrier) epochs: global solve and put,
/// fence, patch solves and puts, fence, residual and update, fence. The
/// iterates equal [`crate::solvers::richardson_sync`].
pub fn run_sync_concurrent(
    scenario: &CouplingScenario,
    relaxation: Relaxation,
    criteria: StoppingCriteria,
    rank_count: usize,
) -> Result<SolveReport> {
    relaxation.validate()?;
    criteria.validate()?;
    let shared = Shared::new(scenario, rank_count)?;
    let barrier = Barrier::new(rank_count);
    let stop = AtomicBool::new(false);
    let comp_slot = scenario.subdomains.iter().position(|s| s.kind == SubdomainKind::Complement);
    std::thread::scope(|scope| {
        for rank in 1..rank_count {
            let (shared, barrier, stop) = (&shared, &barrier, &stop);
            scope.spawn(move || {
                let mine = shared.patches_of(rank);
                let mut reader = WindowReader::default();
                loop {
                    barrier.wait();
                    match reader.read(&shared.u_windows[rank - 1]) {
                        Ok(u) => {
                            let u_gamma = DVector::from_column_slice(&u.data);
                            for &k in &mine {
                                let q = shared.scenario.subdomains[shared.patch_slots[k]].reaction(&u_gamma);
                                shared.q_windows[k].put(u.source, false, q.as_slice().to_vec());
                                shared.patch_solves[k].fetch_add(1, Ordering::SeqCst);
                            }
                        }
                        Err(e) => shared.fail(e),
                    }
                    barrier.wait();
                    barrier.wait();
                    if stop.load(Ordering::SeqCst) {
                        return;
                    }
                }
            });
        }
        let n_sub = scenario.subdomains.len();
        let mut monitor = Monitor::new(scenario, criteria);
        let mut state = RelaxationState::new(relaxation);
        let mut readers: Vec<WindowReader> = vec![WindowReader::default(); shared.q_windows.len()];
        let mut report = SolveReport {
            history: Vec::new(),
            converged: false,
            final_u_gamma: DVector::zeros(0),
            final_p_gamma: DVector::zeros(scenario.interface_size()),
            total_global_solves: 0,
            per_patch_solves: vec![0; shared.patch_slots.len()],
        };
        let mut p = DVector::zeros(scenario.interface_size());
        let mut outcome: Option<Result<()>> = None;
        for j in 0..=criteria.max_iter {
            let u = global_solve(scenario, &p);
            report.total_global_solves += 1;
            shared.publish_trace(j as u64, false, &u);
            barrier.wait();
            barrier.wait();
            let mut reactions: Vec<DVector<f64>> = vec![DVector::zeros(0); n_sub];
            for (k, (reader, w)) in readers.iter_mut().zip(&shared.q_windows).enumerate() {
                match reader.read(w) {
                    Ok(q) => reactions[shared.patch_slots[k]] = DVector::from_column_slice(&q.data),
                    Err(e) => shared.fail(e),
                }
            }
            if let Some(c) = comp_slot {
                reactions[c] = scenario.subdomains[c].reaction(&u);
            }
            if let Some(e) = shared.take_error() {
                outcome = Some(Err(e));
            } else {
                let r = scenario.assemble_residual(&reactions);
                let norm = r.norm();
                let status = monitor.check(norm);
                let omega = match status {
                    Status::Continue => state.observe(&r),
                    _ => Ok(state.current()),
                };
                match omega {
                    Err(e) => outcome = Some(Err(e)),
                    Ok(omega) => {
                        report.history.push(IterationRecord {
                            j,
                            p_gamma: p.clone(),
                            residual: r.clone(),
                            residual_norm: norm,
                            omega,
                            wall_time: monitor.elapsed(),
                            delays: Vec::new(),
                        });
                        report.final_u_gamma = u;
                        report.final_p_gamma = p.clone();
                        match status {
                            Status::Converged => {
                                report.converged = true;
                                outcome = Some(Ok(()));
                            }
                            Status::Diverged => {
                                outcome = Some(Err(CouplingError::Divergence {
                                    report: Box::new(report.clone()),
                                }))
                            }
                            Status::Continue if j == criteria.max_iter => outcome = Some(Ok(())),
                            Status::Continue => p += omega * &r,
                        }
                    }
                }
            }
            if outcome.is_some() {
                stop.store(true, Ordering::SeqCst);
            }
            barrier.wait();
            if outcome.is_some() {
                break;
            }
        }
        report.per_patch_solves = shared.solve_counts();
        match outcome {
            Some(Err(e)) => Err(e),
            _ => Ok(report),
        }
    })
}
