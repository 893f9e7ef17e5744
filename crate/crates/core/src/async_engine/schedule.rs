use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling_topology::SubdomainKind;
use crate::error::{CouplingError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// Every subdomain is fresh at every step (synchronous iteration).
    AllZero,
    /// Explicit delays, `sigma[j][s]`. Steps beyond the table end the run.
    Table(Vec<Vec<usize>>),
    /// Each patch refreshes with probability `update_probability` per step,
    /// and is forced to refresh when its delay would exceed the bound.
    RandomBounded { seed: u64, update_probability: f64 },
    /// Ranks run on a virtual clock: a global step costs `global_cost`, a
    /// solve of patch `k` costs `patch_costs[k]`. Patches always recompute
    /// with the latest trace; the global rank waits when a delay would
    /// exceed the bound.
    VirtualTime { global_cost: f64, patch_costs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySchedule {
    pub kind: ScheduleKind,
    pub max_delay: usize,
}

/// Materialized schedule over a finite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    pub max_delay: usize,
    /// `sigma[j][s]`, indexed like the scenario's subdomains.
    pub sigma: Vec<Vec<usize>>,
    /// `solves[j][s]`: solves of subdomain `s` completed for step `j`.
    pub solves: Vec<Vec<usize>>,
}

impl DelaySchedule {
    pub fn all_zero() -> Self {
        DelaySchedule {
            kind: ScheduleKind::AllZero,
            max_delay: 0,
        }
    }

    pub fn random(max_delay: usize, seed: u64) -> Self {
        DelaySchedule {
            kind: ScheduleKind::RandomBounded {
                seed,
                update_probability: 0.5,
            },
            max_delay,
        }
    }

    pub fn table(sigma: Vec<Vec<usize>>, max_delay: usize) -> Self {
        DelaySchedule {
            kind: ScheduleKind::Table(sigma),
            max_delay,
        }
    }

    pub fn virtual_time(max_delay: usize, global_cost: f64, patch_costs: Vec<f64>) -> Self {
        DelaySchedule {
            kind: ScheduleKind::VirtualTime {
                global_cost,
                patch_costs,
            },
            max_delay,
        }
    }

    /// Delay table for steps `0..horizon` (fewer for a short explicit table).
    pub fn materialize(&self, layout: &[SubdomainKind], horizon: usize) -> Result<DelayTable> {
        let n = layout.len();
        let d = self.max_delay;
        let (sigma, solves) = match &self.kind {
            ScheduleKind::AllZero => (vec![vec![0; n]; horizon], vec![vec![1; n]; horizon]),
            ScheduleKind::Table(rows) => {
                let sigma: Vec<Vec<usize>> = rows.iter().take(horizon).cloned().collect();
                let solves = sigma.iter().map(|row| row.iter().map(|&k| usize::from(k == 0)).collect()).collect();
                (sigma, solves)
            }
            ScheduleKind::RandomBounded {
                seed,
                update_probability,
            } => {
                if !(*update_probability > 0.0 && *update_probability <= 1.0) {
                    return Err(CouplingError::Schedule(format!(
                        "update probability {update_probability} outside (0, 1]"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut sigma = Vec::with_capacity(horizon);
                let mut prev = vec![0usize; n];
                for j in 0..horizon {
                    let mut row = vec![0usize; n];
                    if j > 0 {
                        for s in 0..n {
                            if layout[s] == SubdomainKind::Complement {
                                continue;
                            }
                            let fresh = prev[s] + 1 > d || rng.random_bool(*update_probability);
                            row[s] = if fresh { 0 } else { prev[s] + 1 };
                        }
                    }
                    prev.clone_from(&row);
                    sigma.push(row);
                }
                let solves = sigma.iter().map(|row| row.iter().map(|&k| usize::from(k == 0)).collect()).collect();
                (sigma, solves)
            }
            ScheduleKind::VirtualTime {
                global_cost,
                patch_costs,
            } => virtual_time_table(layout, d, *global_cost, patch_costs, horizon)?,
        };
        let table = DelayTable {
            max_delay: d,
            sigma,
            solves,
        };
        table.validate(layout)?;
        Ok(table)
    }
}

impl DelayTable {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Checks the delay model: `σ ≤ D`, `σ(s,0) = 0`, `σ(s,j) ≤ σ(s,j−1)+1`,
    /// complement always fresh.
    pub fn validate(&self, layout: &[SubdomainKind]) -> Result<()> {
        for (j, row) in self.sigma.iter().enumerate() {
            if row.len() != layout.len() {
                return Err(CouplingError::Schedule(format!(
                    "step {j} lists {} delays for {} subdomains",
                    row.len(),
                    layout.len()
                )));
            }
            for (s, &k) in row.iter().enumerate() {
                if k > self.max_delay {
                    return Err(CouplingError::Schedule(format!(
                        "delay {k} of subdomain {s} at step {j} exceeds bound {}",
                        self.max_delay
                    )));
                }
                if layout[s] == SubdomainKind::Complement && k != 0 {
                    return Err(CouplingError::Schedule(format!("complement delayed at step {j}")));
                }
                let limit = if j == 0 { 0 } else { self.sigma[j - 1][s] + 1 };
                if k > limit {
                    return Err(CouplingError::Schedule(format!(
                        "delay of subdomain {s} jumps to {k} at step {j} (at most {limit})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Subdomain sets `ϖ(k, j)` for `k = 0..=D`.
pub fn partition_by_delay(table: &DelayTable, j: usize) -> Result<Vec<Vec<usize>>> {
    let row = table
        .sigma
        .get(j)
        .ok_or_else(|| CouplingError::Schedule(format!("step {j} beyond schedule horizon {}", table.len())))?;
    let mut sets = vec![Vec::new(); table.max_delay + 1];
    for (s, &k) in row.iter().enumerate() {
        if k > table.max_delay {
            return Err(CouplingError::Schedule(format!(
                "delay {k} of subdomain {s} exceeds bound {}",
                table.max_delay
            )));
        }
        sets[k].push(s);
    }
    Ok(sets)
}

#[derive(Debug, Clone)]
struct PatchClock {
    cost: f64,
    job_version: usize,
    finish: f64,
    latest: Option<usize>,
    completed: usize,
}

impl PatchClock {
    fn version_at(published: &[f64], t: f64) -> usize {
        published.partition_point(|&u| u <= t).saturating_sub(1)
    }

    fn complete_one(&mut self, published: &[f64]) {
        self.completed += 1;
        self.latest = Some(self.latest.map_or(self.job_version, |v| v.max(self.job_version)));
        let start = self.finish;
        self.job_version = Self::version_at(published, start);
        self.finish = start + self.cost;
    }

    fn advance_to(&mut self, t: f64, published: &[f64]) {
        while self.finish <= t {
            self.complete_one(published);
        }
    }

    /// Time at which a contribution of version `need` or newer is available.
    fn ready_time(&self, need: usize, published: &[f64]) -> f64 {
        if self.latest.is_some_and(|v| v >= need) {
            return f64::NEG_INFINITY;
        }
        let mut probe = self.clone();
        loop {
            let done = probe.finish;
            let version = probe.job_version;
            probe.complete_one(published);
            if version >= need {
                return done;
            }
        }
    }
}

/// Per-step, per-subdomain counts.
type Delays = Vec<Vec<usize>>;

fn virtual_time_table(
    layout: &[SubdomainKind],
    d: usize,
    global_cost: f64,
    patch_costs: &[f64],
    horizon: usize,
) -> Result<(Delays, Delays)> {
    let patches: Vec<usize> = (0..layout.len()).filter(|&s| layout[s] == SubdomainKind::Patch).collect();
    if patch_costs.len() != patches.len() {
        return Err(CouplingError::Schedule(format!(
            "{} patch costs for {} patches",
            patch_costs.len(),
            patches.len()
        )));
    }
    if !(global_cost > 0.0) || patch_costs.iter().any(|&c| !(c > 0.0)) {
        return Err(CouplingError::Schedule("virtual costs must be positive".into()));
    }
    // published[v]: time at which u_v becomes readable
    let mut published = vec![global_cost];
    let mut clocks: Vec<PatchClock> = patch_costs
        .iter()
        .map(|&cost| PatchClock {
            cost,
            job_version: 0,
            finish: global_cost + cost,
            latest: None,
            completed: 0,
        })
        .collect();
    let mut sigma = Vec::with_capacity(horizon);
    let mut solves = Vec::with_capacity(horizon);
    for j in 0..horizon {
        let need = j.saturating_sub(d);
        let mut t = published[j];
        for c in &clocks {
            t = t.max(c.ready_time(need, &published));
        }
        let mut row = vec![0usize; layout.len()];
        let mut done = vec![0usize; layout.len()];
        for (c, &s) in clocks.iter_mut().zip(&patches) {
            let before = c.completed;
            c.advance_to(t, &published);
            done[s] = c.completed - before;
            row[s] = j - c.latest.expect("ready_time guarantees a contribution");
        }
        for (s, kind) in layout.iter().enumerate() {
            if *kind == SubdomainKind::Complement {
                done[s] = 1;
            }
        }
        sigma.push(row);
        solves.push(done);
        published.push(t + global_cost);
    }
    Ok((sigma, solves))
}
