use std::collections::VecDeque;
use std::io::Write;

use nalgebra::DVector;

use super::schedule::DelaySchedule;
use crate::coupling_topology::{CouplingScenario, SubdomainKind};
use crate::error::{CouplingError, Result};
use crate::solvers::{global_solve, IterationRecord, Monitor, SolveReport, Status, StoppingCriteria};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub j: usize,
    /// Delay per subdomain, in scenario order.
    pub sigma: Vec<usize>,
    pub residual_norm: f64,
    pub omega: f64,
    /// Cumulative solves per rank: rank 0 is the global model, rank `k` the
    /// `k`-th patch.
    pub solves: Vec<usize>,
}

impl TraceRecord {
    /// Subdomains contributing fresh data at this step.
    pub fn active(&self) -> Vec<usize> {
        (0..self.sigma.len()).filter(|&s| self.sigma[s] == 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AsyncTrace {
    /// Identifier of each subdomain (0 for the complement), scenario order.
    pub subdomain_ids: Vec<usize>,
    pub records: Vec<TraceRecord>,
}

impl AsyncTrace {
    pub fn new(scenario: &CouplingScenario) -> Self {
        AsyncTrace {
            subdomain_ids: scenario.subdomains.iter().map(|s| s.id).collect(),
            records: Vec::new(),
        }
    }

    /// Final solve count per rank (global first).
    pub fn rank_solves(&self) -> Vec<usize> {
        self.records.last().map(|r| r.solves.clone()).unwrap_or_default()
    }

    pub fn global_solves(&self) -> usize {
        self.rank_solves().first().copied().unwrap_or(0)
    }

    /// `[min, max]` solves over patch ranks.
    pub fn patch_solve_range(&self) -> (usize, usize) {
        let solves = self.rank_solves();
        let patches = solves.get(1..).unwrap_or(&[]);
        (
            patches.iter().copied().min().unwrap_or(0),
            patches.iter().copied().max().unwrap_or(0),
        )
    }

    pub fn max_observed_delay(&self) -> usize {
        self.records.iter().flat_map(|r| r.sigma.iter().copied()).max().unwrap_or(0)
    }

    /// One row per (step, rank) with columns
    /// `j, rank, sigma_<id>..., residual_norm, omega, solves_rank`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["j".to_string(), "rank".to_string()];
        header.extend(self.subdomain_ids.iter().map(|id| format!("sigma_{id}")));
        header.extend(["residual_norm", "omega", "solves_rank"].map(String::from));
        w.write_record(&header)?;
        for rec in &self.records {
            for (rank, solves) in rec.solves.iter().enumerate() {
                let mut row = vec![rec.j.to_string(), rank.to_string()];
                row.extend(rec.sigma.iter().map(|k| k.to_string()));
                row.push(format!("{:e}", rec.residual_norm));
                row.push(format!("{:e}", rec.omega));
                row.push(solves.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Asynchronous iteration replaying `schedule` on a virtual clock.
///
/// Step 0 is a synchronous sweep; afterwards subdomain `s` contributes the
/// reaction computed from `u_{Γ, j−σ(s,j)}`. With an all-zero schedule the
/// iterates coincide with [`crate::solvers::richardson_sync`].
pub fn run_async_simulated(
    scenario: &CouplingScenario,
    omega: f64,
    schedule: &DelaySchedule,
    criteria: StoppingCriteria,
) -> Result<(SolveReport, AsyncTrace)> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(CouplingError::invalid(format!("relaxation must be positive, got {omega}")));
    }
    criteria.validate()?;
    let layout: Vec<SubdomainKind> = scenario.subdomains.iter().map(|s| s.kind).collect();
    let table = schedule.materialize(&layout, criteria.max_iter + 1)?;
    let d = table.max_delay;
    let patch_slots: Vec<usize> = (0..layout.len()).filter(|&s| layout[s] == SubdomainKind::Patch).collect();

    let mut monitor = Monitor::new(scenario, criteria);
    let mut trace = AsyncTrace::new(scenario);
    let mut report = SolveReport {
        history: Vec::new(),
        converged: false,
        final_u_gamma: DVector::zeros(0),
        final_p_gamma: DVector::zeros(scenario.interface_size()),
        total_global_solves: 0,
        per_patch_solves: vec![0; patch_slots.len()],
    };
    let mut traces: VecDeque<DVector<f64>> = VecDeque::with_capacity(d + 1);
    let mut cache: Vec<Option<(usize, DVector<f64>)>> = vec![None; layout.len()];
    let mut p = DVector::zeros(scenario.interface_size());
    for j in 0..table.len() {
        let u = global_solve(scenario, &p);
        report.total_global_solves += 1;
        traces.push_back(u);
        if traces.len() > d + 1 {
            traces.pop_front();
        }
        let sigma = &table.sigma[j];
        let mut reactions = Vec::with_capacity(layout.len());
        for (s, sub) in scenario.subdomains.iter().enumerate() {
            let version = j - sigma[s];
            let stale = cache[s].as_ref().is_none_or(|(v, _)| *v != version);
            if stale {
                let u_old = &traces[traces.len() - 1 - sigma[s]];
                cache[s] = Some((version, sub.reaction(u_old)));
            }
            reactions.push(cache[s].as_ref().expect("filled above").1.clone());
        }
        for (k, &s) in patch_slots.iter().enumerate() {
            report.per_patch_solves[k] += table.solves[j][s];
        }
        let r = scenario.assemble_residual(&reactions);
        let norm = r.norm();
        let status = monitor.check(norm);
        report.history.push(IterationRecord {
            j,
            p_gamma: p.clone(),
            residual: r.clone(),
            residual_norm: norm,
            omega,
            wall_time: monitor.elapsed(),
            delays: sigma.clone(),
        });
        let mut solves = vec![report.total_global_solves];
        solves.extend(&report.per_patch_solves);
        trace.records.push(TraceRecord {
            j,
            sigma: sigma.clone(),
            residual_norm: norm,
            omega,
            solves,
        });
        report.final_u_gamma = traces.back().expect("pushed above").clone();
        report.final_p_gamma = p.clone();
        match status {
            Status::Converged => {
                report.converged = true;
                return Ok((report, trace));
            }
            Status::Diverged => return Err(CouplingError::Divergence { report: Box::new(report) }),
            Status::Continue => {}
        }
        if j + 1 < table.len() {
            p += omega * &r;
        }
    }
    Ok((report, trace))
}
