//! Synchronous drivers, the coupled residual and the monolithic reference.
//!
//! One iteration of the stationary scheme reads
//!
//! ```text
//! u_Γ = S^{G⁻¹}(p_Γ + b^G)
//! r   = −Σ_s A^s J^{sᵀ}(S^{s,F} J^s A^{sᵀ} u_Γ − b^{s,F})
//! p_Γ ← p_Γ + ω r
//! ```
//!
//! starting from `p_Γ = 0`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::coupling_topology::{CouplingScenario, SubdomainKind};
use crate::error::{CouplingError, Result};

/// Default relative residual tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Divergence is declared when `‖r_j‖ > DIVERGENCE_FACTOR · ‖r₀‖`.
pub const DIVERGENCE_FACTOR: f64 = 1e6;
pub const AITKEN_CAP: f64 = 10.0;
/// Residuals below `ABSOLUTE_FLOOR · ‖b^G‖` count as converged whatever `‖r₀‖`.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub j: usize,
    /// Interface load that produced `residual`.
    pub p_gamma: DVector<f64>,
    pub residual: DVector<f64>,
    pub residual_norm: f64,
    /// Relaxation applied after this record (the current value on the last one).
    pub omega: f64,
    /// Seconds since the start of the run, zero when timing is disabled.
    pub wall_time: f64,
    /// Delay of each subdomain's contribution; empty for synchronous runs.
    pub delays: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub final_u_gamma: DVector<f64>,
    pub final_p_gamma: DVector<f64>,
    pub total_global_solves: usize,
    /// One counter per patch, in scenario order.
    pub per_patch_solves: Vec<usize>,
}

impl SolveReport {
    pub fn last_residual_norm(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual_norm)
    }

    pub fn initial_residual_norm(&self) -> f64 {
        self.history.first().map_or(f64::NAN, |r| r.residual_norm)
    }

    /// Number of updates performed (index of the last record).
    pub fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }

    pub fn relative_residual(&self) -> f64 {
        let r0 = self.initial_residual_norm();
        if r0 > 0.0 {
            self.last_residual_norm() / r0
        } else {
            0.0
        }
    }

    pub fn patch_solve_range(&self) -> (usize, usize) {
        let min = self.per_patch_solves.iter().copied().min().unwrap_or(0);
        let max = self.per_patch_solves.iter().copied().max().unwrap_or(0);
        (min, max)
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.omega).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCriteria {
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_factor: f64,
    pub record_wall_time: bool,
}

impl Default for StoppingCriteria {
    fn default() -> Self {
        StoppingCriteria {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            divergence_factor: DIVERGENCE_FACTOR,
            record_wall_time: true,
        }
    }
}

impl StoppingCriteria {
    pub fn with_tol(tol: f64) -> Self {
        StoppingCriteria {
            tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(CouplingError::invalid(format!("tolerance {} outside (0, 1)", self.tol)));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(CouplingError::invalid("divergence factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    Fixed(f64),
    Aitken { initial: f64 },
}

impl Relaxation {
    pub fn aitken() -> Self {
        Relaxation::Aitken { initial: 1.0 }
    }

    fn initial(self) -> f64 {
        match self {
            Relaxation::Fixed(w) => w,
            Relaxation::Aitken { initial } => initial,
        }
    }

    pub fn validate(self) -> Result<()> {
        let w = self.initial();
        if !(w > 0.0 && w.is_finite()) {
            return Err(CouplingError::invalid(format!("relaxation must be positive, got {w}")));
        }
        Ok(())
    }
}

/// Relaxation parameter sequence shared by all synchronous drivers.
#[derive(Debug, Clone)]
pub(crate) struct RelaxationState {
    mode: Relaxation,
    omega: f64,
    previous: Option<DVector<f64>>,
}

impl RelaxationState {
    pub(crate) fn new(mode: Relaxation) -> Self {
        RelaxationState {
            mode,
            omega: mode.initial(),
            previous: None,
        }
    }

    pub(crate) fn current(&self) -> f64 {
        self.omega
    }

    /// Relaxation to apply after observing residual `r`.
    pub(crate) fn observe(&mut self, r: &DVector<f64>) -> Result<f64> {
        if let Relaxation::Aitken { .. } = self.mode {
            if let Some(prev) = &self.previous {
                self.omega = aitken_update(self.omega, r, prev)?;
            }
            self.previous = Some(r.clone());
        }
        Ok(self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Status {
    Continue,
    Converged,
    Diverged,
}

/// Convergence and divergence tests relative to the first residual.
#[derive(Debug, Clone)]
pub(crate) struct Monitor {
    criteria: StoppingCriteria,
    floor: f64,
    r0: Option<f64>,
    start: Instant,
}

impl Monitor {
    pub(crate) fn new(scenario: &CouplingScenario, criteria: StoppingCriteria) -> Self {
        Monitor {
            criteria,
            floor: ABSOLUTE_FLOOR * scenario.global_rhs.norm(),
            r0: None,
            start: Instant::now(),
        }
    }

    pub(crate) fn check(&mut self, norm: f64) -> Status {
        let r0 = *self.r0.get_or_insert(norm);
        if !norm.is_finite() {
            return Status::Diverged;
        }
        if norm <= self.criteria.tol * r0 || norm <= self.floor {
            Status::Converged
        } else if norm > self.criteria.divergence_factor * r0 {
            Status::Diverged
        } else {
            Status::Continue
        }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        if self.criteria.record_wall_time {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    pub(crate) fn max_iter(&self) -> usize {
        self.criteria.max_iter
    }
}

/// `u_Γ = S^{G⁻¹}(p_Γ + b^G)`.
pub fn global_solve(scenario: &CouplingScenario, p_gamma: &DVector<f64>) -> DVector<f64> {
    scenario.solve_global_schur(&(p_gamma + &scenario.global_rhs))
}

/// Reaction `q^s` of every subdomain at the global trace `u_gamma`.
pub fn subdomain_reactions(scenario: &CouplingScenario, u_gamma: &DVector<f64>) -> Vec<DVector<f64>> {
    scenario.subdomains.iter().map(|s| s.reaction(u_gamma)).collect()
}

/// `r_Γ = −Σ_s A^s J^{sᵀ} λ^{s,F}` at the global trace `u_gamma`.
pub fn compute_residual(scenario: &CouplingScenario, u_gamma: &DVector<f64>) -> DVector<f64> {
    scenario.assemble_residual(&subdomain_reactions(scenario, u_gamma))
}

/// Aitken δ² update `ω_{j+1} = −ω_j ⟨r_prev, r_j − r_prev⟩ / ‖r_j − r_prev‖²`.
///
/// Values outside `(0, AITKEN_CAP]` are clamped to the cap from above; a
/// non-positive or non-finite value keeps `omega_j`.
pub fn aitken_update(omega_j: f64, r_j: &DVector<f64>, r_prev: &DVector<f64>) -> Result<f64> {
    if r_j.len() != r_prev.len() {
        return Err(CouplingError::invalid("residual lengths differ"));
    }
    let diff = r_j - r_prev;
    let denom = diff.norm_squared();
    if denom == 0.0 {
        if r_j.iter().all(|&x| x == 0.0) {
            return Ok(omega_j);
        }
        return Err(CouplingError::Stagnation);
    }
    let w = -omega_j * r_prev.dot(&diff) / denom;
    if !(w > 0.0) || !w.is_finite() {
        return Ok(omega_j);
    }
    Ok(w.min(AITKEN_CAP))
}

fn patch_indices(scenario: &CouplingScenario) -> Vec<usize> {
    scenario
        .subdomains
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SubdomainKind::Patch)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn patch_count(scenario: &CouplingScenario) -> usize {
    patch_indices(scenario).len()
}

/// Synchronous stationary iterations.
///
/// Returns `Ok` with `converged = false` when `max_iter` updates are
/// exhausted, and a divergence error (carrying the history) when the
/// residual exceeds the divergence guard.
pub fn richardson_sync(
    scenario: &CouplingScenario,
    relaxation: Relaxation,
    criteria: StoppingCriteria,
) -> Result<SolveReport> {
    relaxation.validate()?;
    criteria.validate()?;
    let mut monitor = Monitor::new(scenario, criteria);
    let mut state = RelaxationState::new(relaxation);
    let patches = patch_count(scenario);
    let mut report = SolveReport {
        history: Vec::new(),
        converged: false,
        final_u_gamma: DVector::zeros(0),
        final_p_gamma: DVector::zeros(scenario.interface_size()),
        total_global_solves: 0,
        per_patch_solves: vec![0; patches],
    };
    let mut p = DVector::zeros(scenario.interface_size());
    for j in 0..=criteria.max_iter {
        let u = global_solve(scenario, &p);
        report.total_global_solves += 1;
        let r = compute_residual(scenario, &u);
        report.per_patch_solves.iter_mut().for_each(|c| *c += 1);
        let norm = r.norm();
        let status = monitor.check(norm);
        let omega = match status {
            Status::Continue => state.observe(&r)?,
            _ => state.current(),
        };
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
                return Ok(report);
            }
            Status::Diverged => return Err(CouplingError::Divergence { report: Box::new(report) }),
            Status::Continue => {}
        }
        if j < monitor.max_iter() {
            p += omega * &r;
        }
    }
    Ok(report)
}

/// Solution of the glued reference problem.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub u_gamma: DVector<f64>,
    /// Converged interface load `p̂_Γ = S^G u*_Γ − b^G`.
    pub p_gamma: DVector<f64>,
    /// Free-dof field of each subdomain's fine model (global restriction for
    /// the complement), in scenario order.
    pub fields: Vec<DVector<f64>>,
}

/// Solves the single coupled problem made of the complement and all fine
/// patches, the fine interface dofs being slaved to the global interface
/// through `J^s A^{sᵀ}`. Unknowns: `Γ` first, then subdomain interiors.
pub fn monolithic_reference(scenario: &CouplingScenario) -> Result<ReferenceSolution> {
    let n_gamma = scenario.interface_size();
    let mut offsets = Vec::with_capacity(scenario.subdomains.len());
    let mut total = n_gamma;
    for sub in &scenario.subdomains {
        offsets.push(total);
        total += sub.fine_condensed.interior.len();
    }
    let mut coo = CooMatrix::new(total, total);
    let mut load = DVector::zeros(total);
    // fine dof -> combination of glued unknowns
    let mut maps: Vec<Vec<Vec<(usize, f64)>>> = Vec::with_capacity(scenario.subdomains.len());
    for (sub, &offset) in scenario.subdomains.iter().zip(&offsets) {
        let sys = &sub.fine_system;
        let mut map: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sys.size()];
        for (k, &d) in sub.fine_condensed.interior.iter().enumerate() {
            map[d] = vec![(offset + k, 1.0)];
        }
        let rows = sub.assembly.rows();
        for (k, &d) in sub.fine_condensed.interface.iter().enumerate() {
            map[d] = sub.transfer.rows()[k].iter().map(|&(c, w)| (rows[c], w)).collect();
        }
        for (i, row) in sys.stiffness.row_iter().enumerate() {
            for (&j, &kij) in row.col_indices().iter().zip(row.values()) {
                for &(a, wa) in &map[i] {
                    for &(b, wb) in &map[j] {
                        coo.push(a, b, wa * wb * kij);
                    }
                }
            }
        }
        for (i, targets) in map.iter().enumerate() {
            for &(a, w) in targets {
                load[a] += w * sys.load[i];
            }
        }
        maps.push(map);
    }
    let csc = CscMatrix::from(&coo);
    let factor = CscCholesky::factor(&csc)
        .map_err(|e| CouplingError::Configuration(format!("reference system is not positive definite: {e:?}")))?;
    let x = factor.solve(&DMatrix::from_column_slice(total, 1, load.as_slice()));
    let x = DVector::from_column_slice(x.as_slice());
    let u_gamma = x.rows(0, n_gamma).into_owned();
    let fields = maps
        .iter()
        .map(|map| {
            DVector::from_iterator(
                map.len(),
                map.iter().map(|t| t.iter().map(|&(a, w)| w * x[a]).sum::<f64>()),
            )
        })
        .collect();
    let p_gamma = &scenario.global_schur * &u_gamma - &scenario.global_rhs;
    Ok(ReferenceSolution {
        u_gamma,
        p_gamma,
        fields,
    })
}

/// `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_error(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let nb = b.norm();
    let d = (a - b).norm();
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn aitken_arithmetic() {
        let w = aitken_update(1.0, &v(&[0.5]), &v(&[1.0])).unwrap();
        assert!((w - 2.0).abs() < 1e-15);
    }

    #[test]
    fn aitken_exact_on_geometric_sequence() {
        // p_{j+1} = p_j + ω r_j with r = β − α p
        let (alpha, beta) = (0.37, 1.3);
        let mut p = 0.0;
        let r0 = beta - alpha * p;
        p += 1.0 * r0;
        let r1 = beta - alpha * p;
        let w = aitken_update(1.0, &v(&[r1]), &v(&[r0])).unwrap();
        p += w * r1;
        assert!((beta - alpha * p).abs() < 1e-14);
    }

    #[test]
    fn aitken_stagnation_and_zero() {
        assert!(matches!(
            aitken_update(1.0, &v(&[1.0, 2.0]), &v(&[1.0, 2.0])),
            Err(CouplingError::Stagnation)
        ));
        assert_eq!(aitken_update(0.7, &v(&[0.0]), &v(&[0.0])).unwrap(), 0.7);
    }

    #[test]
    fn aitken_clamps() {
        // r_j almost equal to r_prev pushes ω to the cap
        let w = aitken_update(1.0, &v(&[0.999]), &v(&[1.0])).unwrap();
        assert_eq!(w, AITKEN_CAP);
        // growing residual gives a negative value, previous ω is kept
        let w = aitken_update(0.4, &v(&[2.0]), &v(&[1.0])).unwrap();
        assert_eq!(w, 0.4);
    }

    #[test]
    fn relaxation_state_sequence() {
        let mut s = RelaxationState::new(Relaxation::Fixed(0.3));
        assert_eq!(s.observe(&v(&[1.0])).unwrap(), 0.3);
        assert_eq!(s.observe(&v(&[0.5])).unwrap(), 0.3);
        let mut s = RelaxationState::new(Relaxation::aitken());
        assert_eq!(s.observe(&v(&[1.0])).unwrap(), 1.0);
        assert!((s.observe(&v(&[0.5])).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters() {
        assert!(Relaxation::Fixed(0.0).validate().is_err());
        assert!(StoppingCriteria::with_tol(0.0).validate().is_err());
        assert!(StoppingCriteria::with_tol(1.5).validate().is_err());
    }
}
