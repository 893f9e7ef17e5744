//! Convergence certification of the relaxed (a)synchronous iteration.
//!
//! With `X_k = (Σ_{s∈ϖ(k,j)} Ŝ^{s,F}) S^{G⁻¹}`, the iteration over the last
//! `D+1` loads is driven by the block companion matrix
//!
//! ```text
//!       | I−ωX_0  −ωX_1  …  −ωX_D |
//! B_j = |   I       0    …    0   |
//!       |   ⋮       ⋱         ⋮   |
//!       |   0       …    I    0   |
//! ```
//!
//! and `α_min, α_max` are the extreme generalized eigenvalues of
//! `(Σ_s Ŝ^{s,F}, S^G)`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coupling_topology::{CouplingScenario, SubdomainKind};
use crate::error::{CouplingError, Result};

/// `ρ(B_j)` must stay below `1 − CERTIFICATE_MARGIN` for a trial to pass.
pub const CERTIFICATE_MARGIN: f64 = 1e-6;
/// Largest companion dimension accepted by the dense eigen-solver.
pub const MAX_COMPANION_SIZE: usize = 5000;

#[derive(Debug, Clone)]
pub struct CompanionSystem {
    pub max_delay: usize,
    pub omega: f64,
    /// `X_k` for `k = 0..=D`.
    pub blocks: Vec<DMatrix<f64>>,
    pub matrix: DMatrix<f64>,
}

impl CompanionSystem {
    pub fn interface_size(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    /// `B_j · stack(p) − ω · stack₀(b) − stack(p)`; zero at the fixed point
    /// of the iteration with condensed right-hand side `b`.
    pub fn fixed_point_defect(&self, p: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = self.interface_size();
        let d = self.max_delay;
        let mut stack = DVector::zeros(n * (d + 1));
        for k in 0..=d {
            stack.rows_mut(k * n, n).copy_from(p);
        }
        let mut out = &self.matrix * &stack - &stack;
        let mut top = out.rows_mut(0, n);
        top -= b * self.omega;
        out
    }

    /// `det((1−λ)λ^D I − ω Σ_k λ^{D−k} X_k)` evaluated at complex `λ`,
    /// the characteristic polynomial of `B_j` up to sign.
    pub fn characteristic(&self, lambda: Complex<f64>) -> Complex<f64> {
        let n = self.interface_size();
        let d = self.max_delay as i32;
        let one = Complex::new(1.0, 0.0);
        let mut m = DMatrix::<Complex<f64>>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = (one - lambda) * lambda.powi(d);
        }
        for (k, x) in self.blocks.iter().enumerate() {
            let c = lambda.powi(d - k as i32) * self.omega;
            for j in 0..n {
                for i in 0..n {
                    m[(i, j)] -= c * x[(i, j)];
                }
            }
        }
        m.determinant()
    }
}

/// Assembles `B_j` from explicit blocks `X_0..X_D`.
pub fn companion_from_blocks(blocks: Vec<DMatrix<f64>>, omega: f64) -> Result<CompanionSystem> {
    let Some(first) = blocks.first() else {
        return Err(CouplingError::invalid("companion needs at least one block"));
    };
    let n = first.nrows();
    if blocks.iter().any(|b| b.nrows() != n || b.ncols() != n) {
        return Err(CouplingError::invalid("companion blocks must be square and of equal size"));
    }
    let d = blocks.len() - 1;
    let size = n * (d + 1);
    if size > MAX_COMPANION_SIZE {
        return Err(CouplingError::invalid(format!("companion size {size} exceeds {MAX_COMPANION_SIZE}")));
    }
    let mut b = DMatrix::zeros(size, size);
    for (k, x) in blocks.iter().enumerate() {
        let mut top = b.view_mut((0, k * n), (n, n));
        top -= x * omega;
    }
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    for k in 1..=d {
        for i in 0..n {
            b[(k * n + i, (k - 1) * n + i)] = 1.0;
        }
    }
    Ok(CompanionSystem {
        max_delay: d,
        omega,
        blocks,
        matrix: b,
    })
}

fn check_partition(scenario: &CouplingScenario, partition: &[Vec<usize>], max_delay: usize) -> Result<()> {
    if partition.len() != max_delay + 1 {
        return Err(CouplingError::invalid(format!(
            "partition has {} sets, expected {}",
            partition.len(),
            max_delay + 1
        )));
    }
    let mut seen = vec![false; scenario.subdomains.len()];
    for &s in partition.iter().flatten() {
        if s >= seen.len() || seen[s] {
            return Err(CouplingError::invalid(format!("subdomain {s} missing from scenario or listed twice")));
        }
        seen[s] = true;
    }
    if seen.iter().any(|x| !x) {
        return Err(CouplingError::invalid("partition does not cover every subdomain"));
    }
    Ok(())
}

/// Precomputed `Ŝ^{s,F} S^{G⁻¹}` per subdomain, so that partitions are cheap
/// to turn into companion matrices.
#[derive(Debug, Clone)]
pub struct CompanionFactory {
    products: Vec<DMatrix<f64>>,
    kinds: Vec<SubdomainKind>,
}

impl CompanionFactory {
    pub fn new(scenario: &CouplingScenario) -> Self {
        let products = (0..scenario.subdomains.len())
            .map(|s| {
                // Ŝ and S^G are symmetric: Ŝ S^{G⁻¹} = (S^{G⁻¹} Ŝ)ᵀ
                scenario.solve_global_schur_matrix(&scenario.hat_fine(s)).transpose()
            })
            .collect();
        CompanionFactory {
            products,
            kinds: scenario.subdomains.iter().map(|s| s.kind).collect(),
        }
    }

    pub fn blocks(&self, partition: &[Vec<usize>]) -> Vec<DMatrix<f64>> {
        let n = self.products.first().map_or(0, |p| p.nrows());
        partition
            .iter()
            .map(|set| {
                let mut x = DMatrix::zeros(n, n);
                for &s in set {
                    x += &self.products[s];
                }
                x
            })
            .collect()
    }

    /// Random admissible partition: each patch gets a delay in `0..=D`,
    /// the complement stays fresh.
    pub fn random_partition(&self, max_delay: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
        let mut sets = vec![Vec::new(); max_delay + 1];
        for (s, kind) in self.kinds.iter().enumerate() {
            let k = match kind {
                SubdomainKind::Complement => 0,
                SubdomainKind::Patch => rng.random_range(0..=max_delay),
            };
            sets[k].push(s);
        }
        sets
    }
}

/// `B_j` for the delay partition `ϖ(·, j)` of the scenario's subdomains.
pub fn build_companion(
    scenario: &CouplingScenario,
    partition: &[Vec<usize>],
    omega: f64,
    max_delay: usize,
) -> Result<CompanionSystem> {
    check_partition(scenario, partition, max_delay)?;
    let factory = CompanionFactory::new(scenario);
    companion_from_blocks(factory.blocks(partition), omega)
}

/// Largest eigenvalue modulus of `B_j`.
pub fn spectral_radius(system: &CompanionSystem) -> Result<f64> {
    matrix_spectral_radius(&system.matrix)
}

pub fn matrix_spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(matrix_eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Eigenvalues of a general real square matrix, in no particular order.
pub fn matrix_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(CouplingError::invalid("eigenvalues need a square matrix"));
    }
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let a = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let eig = a
        .eigenvalues()
        .map_err(|e| CouplingError::Numerical(format!("non-symmetric eigen-solver failed: {e:?}")))?;
    Ok(eig.iter().map(|z| Complex::new(z.re, z.im)).collect())
}

/// Eigenvalues of `L⁻¹ (ΣŜ) L⁻ᵀ` with `S^G = L Lᵀ`, ascending.
pub fn generalized_spectrum(sum_hat: &DMatrix<f64>, global_schur: &DMatrix<f64>) -> Result<DVector<f64>> {
    let chol = nalgebra::Cholesky::new(global_schur.clone())
        .ok_or_else(|| CouplingError::Configuration("global Schur complement is not positive definite".into()))?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(sum_hat)
        .ok_or_else(|| CouplingError::Numerical("singular Cholesky factor".into()))?;
    let z = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| CouplingError::Numerical("singular Cholesky factor".into()))?;
    let sym = (&z + z.transpose()) * 0.5;
    let mut values: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(DVector::from_vec(values))
}

/// `(α_min, α_max)`, extreme generalized eigenvalues of `(ΣŜ^{s,F}, S^G)`.
pub fn generalized_alphas(scenario: &CouplingScenario) -> Result<(f64, f64)> {
    let spectrum = generalized_spectrum(&scenario.sum_hat_fine(), &scenario.global_schur)?;
    let (min, max) = (spectrum[0], spectrum[spectrum.len() - 1]);
    if !(min > 0.0) {
        return Err(CouplingError::Numerical(format!("non-positive generalized eigenvalue {min:e}")));
    }
    Ok((min, max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub max_delay: usize,
    /// `min(sin(π/(3D)), 1/2)`, absent for `D = 0`.
    pub epsilon: Option<f64>,
    /// `2 / α_max`.
    pub omega_sync: f64,
    /// `(1−ε)^D α_min / ((1+ε)^{2D} α_max²)`, absent for `D = 0`.
    pub omega_async_factor: Option<f64>,
}

impl SpectralBounds {
    /// Asynchronous factor when `D ≥ 1`, synchronous bound otherwise.
    pub fn safe_omega(&self) -> f64 {
        self.omega_async_factor.unwrap_or(self.omega_sync)
    }
}

pub fn relaxation_bounds(alpha_min: f64, alpha_max: f64, max_delay: usize) -> Result<SpectralBounds> {
    if !(alpha_min > 0.0 && alpha_max >= alpha_min && alpha_max.is_finite()) {
        return Err(CouplingError::invalid(format!(
            "need 0 < alpha_min <= alpha_max, got {alpha_min}, {alpha_max}"
        )));
    }
    let omega_sync = 2.0 / alpha_max;
    if max_delay == 0 {
        return Ok(SpectralBounds {
            alpha_min,
            alpha_max,
            max_delay,
            epsilon: None,
            omega_sync,
            omega_async_factor: None,
        });
    }
    let d = max_delay as f64;
    let eps = (PI / (3.0 * d)).sin().min(0.5);
    let factor = (1.0 - eps).powf(d) * alpha_min / ((1.0 + eps).powf(2.0 * d) * alpha_max * alpha_max);
    Ok(SpectralBounds {
        alpha_min,
        alpha_max,
        max_delay,
        epsilon: Some(eps),
        omega_sync,
        omega_async_factor: Some(factor),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub rho: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub omega: f64,
    pub max_delay: usize,
    pub trials: Vec<TrialResult>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.trials.iter().all(|t| t.pass)
    }

    pub fn max_rho(&self) -> f64 {
        self.trials.iter().map(|t| t.rho).fold(0.0, f64::max)
    }

    /// Columns `trial, D, omega, rho, pass`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial", "D", "omega", "rho", "pass"])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                self.max_delay.to_string(),
                format!("{:e}", self.omega),
                format!("{:e}", t.rho),
                t.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Partitions drawn by [`certify_paracontraction`] for a given seed.
pub fn sample_partitions(factory: &CompanionFactory, max_delay: usize, trials: usize, seed: u64) -> Vec<Vec<Vec<usize>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| factory.random_partition(max_delay, &mut rng)).collect()
}

fn certify_partitions(
    factory: &CompanionFactory,
    partitions: &[Vec<Vec<usize>>],
    omega: f64,
    max_delay: usize,
) -> Result<CertificateReport> {
    let trials = partitions
        .par_iter()
        .enumerate()
        .map(|(trial, part)| {
            let sys = companion_from_blocks(factory.blocks(part), omega)?;
            let rho = spectral_radius(&sys)?;
            Ok(TrialResult {
                trial,
                rho,
                pass: rho < 1.0 - CERTIFICATE_MARGIN,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificateReport {
        omega,
        max_delay,
        trials,
    })
}

/// Samples `trials` random delay partitions and checks `ρ(B_j) < 1` for
/// each. Failure is reported, not raised.
pub fn certify_paracontraction(
    scenario: &CouplingScenario,
    omega: f64,
    max_delay: usize,
    trials: usize,
    seed: u64,
) -> Result<CertificateReport> {
    if trials == 0 {
        return Err(CouplingError::invalid("at least one trial is required"));
    }
    let factory = CompanionFactory::new(scenario);
    let partitions = sample_partitions(&factory, max_delay, trials, seed);
    certify_partitions(&factory, &partitions, omega, max_delay)
}

/// Largest `ω` in `[lo, hi]` for which the sampled partitions all certify,
/// by bisection (`lo` is assumed admissible).
pub fn max_admissible_omega(
    scenario: &CouplingScenario,
    max_delay: usize,
    trials: usize,
    seed: u64,
    (mut lo, mut hi): (f64, f64),
    steps: usize,
) -> Result<f64> {
    let factory = CompanionFactory::new(scenario);
    let partitions = sample_partitions(&factory, max_delay, trials, seed);
    if certify_partitions(&factory, &partitions, hi, max_delay)?.passed() {
        return Ok(hi);
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if certify_partitions(&factory, &partitions, mid, max_delay)?.passed() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
