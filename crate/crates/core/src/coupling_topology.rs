//! Decomposition bookkeeping for the Global/Local coupling.
//!
//! The global model is split into subdomains: one per patch region plus an
//! optional complement made of the remaining elements. The interface `Γ` is
//! the set of global free dofs on nodes shared by two or more subdomains.
//! For every subdomain `s` we keep
//!
//! - the boolean assembly operator `A^s` (local `Γ^s` dof -> `Γ` position),
//! - the Global-to-Fine transfer `J^s` (fine interface dofs from `Γ^s`),
//! - the condensed global part `S^{s,G}, b^{s,G}` and fine part
//!   `S^{s,F}, b^{s,F}`.
//!
//! For the complement the fine model is the global restriction and `J = I`.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::assembly::{assemble, AssembledSystem, Loading, Physics};
use crate::condensation::{condense, CondensedOperator};
use crate::error::{CouplingError, Result};
use crate::mesh::{MeshModel, Point, Region};

/// Boolean map from a subdomain's local interface dofs into `Γ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblyOperator {
    rows: Vec<usize>,
    global_size: usize,
}

impl AssemblyOperator {
    pub fn new(rows: Vec<usize>, global_size: usize) -> Result<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= global_size) {
            return Err(CouplingError::Topology(format!("row {r} outside interface of size {global_size}")));
        }
        Ok(AssemblyOperator { rows, global_size })
    }

    pub fn identity(n: usize) -> Self {
        AssemblyOperator {
            rows: (0..n).collect(),
            global_size: n,
        }
    }

    /// `Γ` position of each local interface dof.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn local_size(&self) -> usize {
        self.rows.len()
    }

    pub fn global_size(&self) -> usize {
        self.global_size
    }

    /// `Aᵀ g`: restriction of interface data to the subdomain.
    pub fn restrict(&self, global: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|&r| global[r]))
    }

    /// `g += A l`.
    pub fn scatter_add(&self, local: &DVector<f64>, global: &mut DVector<f64>) {
        for (k, &r) in self.rows.iter().enumerate() {
            global[r] += local[k];
        }
    }

    /// `G += A M Aᵀ`.
    pub fn scatter_add_matrix(&self, local: &DMatrix<f64>, global: &mut DMatrix<f64>) {
        for (b, &rb) in self.rows.iter().enumerate() {
            for (a, &ra) in self.rows.iter().enumerate() {
                global[(ra, rb)] += local[(a, b)];
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.global_size, self.rows.len());
        for (k, &r) in self.rows.iter().enumerate() {
            m[(r, k)] = 1.0;
        }
        m
    }
}

/// Builds `A^s` for every subdomain from dof identifiers.
///
/// `global_interface` lists the identifiers making up `Γ` (their position is
/// the `Γ` index); `subdomain_interfaces[s]` lists the identifiers of
/// `Γ^s` in local order. Every `Γ` entry must be covered by some subdomain.
pub fn build_assembly_operators(
    global_interface: &[usize],
    subdomain_interfaces: &[Vec<usize>],
) -> Result<Vec<AssemblyOperator>> {
    let position: HashMap<usize, usize> = global_interface.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    if position.len() != global_interface.len() {
        return Err(CouplingError::Topology("duplicate identifiers on the global interface".into()));
    }
    let mut covered = vec![false; global_interface.len()];
    let mut ops = Vec::with_capacity(subdomain_interfaces.len());
    for (s, keys) in subdomain_interfaces.iter().enumerate() {
        let mut rows = Vec::with_capacity(keys.len());
        for k in keys {
            let &r = position
                .get(k)
                .ok_or_else(|| CouplingError::Topology(format!("interface entry {k} of subdomain {s} is not on Γ")))?;
            covered[r] = true;
            rows.push(r);
        }
        ops.push(AssemblyOperator::new(rows, global_interface.len())?);
    }
    if let Some(i) = covered.iter().position(|c| !c) {
        return Err(CouplingError::Topology(format!("interface entry {} belongs to no subdomain", global_interface[i])));
    }
    Ok(ops)
}

/// Sparse Global-to-Fine transfer `J`: each row gives a fine interface value
/// as a weighted sum of global interface values.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    rows: Vec<Vec<(usize, f64)>>,
    cols: usize,
}

impl TransferOperator {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Result<Self> {
        for row in &rows {
            if let Some(&(c, _)) = row.iter().find(|(c, _)| *c >= cols) {
                return Err(CouplingError::invalid(format!("transfer column {c} out of range {cols}")));
            }
        }
        Ok(TransferOperator { rows, cols })
    }

    pub fn identity(n: usize) -> Self {
        TransferOperator {
            rows: (0..n).map(|i| vec![(i, 1.0)]).collect(),
            cols: n,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|(_, w)| w).sum()).collect()
    }

    /// `J x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.iter().map(|&(c, w)| w * x[c]).sum::<f64>()),
        )
    }

    /// `Jᵀ y`.
    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, w) in r {
                out[c] += w * y[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), self.cols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, w) in r {
                m[(i, c)] += w;
            }
        }
        m
    }
}

/// Nodal transfer from global interface nodes to fine interface nodes by
/// multilinear interpolation on the global grid (piecewise linear along
/// interface edges). Coincident nodes receive unit weights, so matching
/// meshes give a permutation.
pub fn build_transfer(
    global: &MeshModel,
    global_iface_nodes: &[usize],
    fine: &MeshModel,
    fine_iface_nodes: &[usize],
) -> Result<TransferOperator> {
    let grid = global
        .grid
        .as_ref()
        .ok_or_else(|| CouplingError::Geometry("global model carries no grid for point location".into()))?;
    let column: HashMap<usize, usize> = global_iface_nodes.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    let mut rows = Vec::with_capacity(fine_iface_nodes.len());
    for &f in fine_iface_nodes {
        let p = fine.nodes[f];
        let weights = grid
            .interpolation_weights(&p)
            .ok_or_else(|| CouplingError::Geometry(format!("fine node {f} at {p:?} lies outside the global mesh")))?;
        let mut row = Vec::with_capacity(weights.len());
        for (node, w) in weights {
            match column.get(&node) {
                Some(&c) => row.push((c, w)),
                None => {
                    return Err(CouplingError::Geometry(format!(
                        "fine node {f} at {p:?} is off the global interface (weight {w:.3e} on node {node})"
                    )))
                }
            }
        }
        rows.push(row);
    }
    TransferOperator::new(rows, global_iface_nodes.len())
}

/// Patch description handed to [`CouplingScenario::build`]: the region it
/// replaces in the global model and its fine model.
#[derive(Debug, Clone)]
pub struct PatchDefinition {
    pub id: usize,
    pub region: Region,
    pub fine: MeshModel,
}

/// Global and fine representations of one zone of interest.
#[derive(Debug, Clone)]
pub struct PatchPair {
    pub id: usize,
    pub region: Region,
    pub global_part: MeshModel,
    pub fine_part: MeshModel,
    /// Indices in the global model.
    pub interface_nodes_global: Vec<usize>,
    /// Indices in the fine model.
    pub interface_nodes_fine: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ComplementDomain {
    pub model: MeshModel,
    /// Indices in the global model.
    pub interface_nodes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdomainKind {
    Complement,
    Patch,
}

/// Subdomain, its interface dofs in `Γ`, and the patch or complement it came from.
type BuiltSlot = (Subdomain, Vec<usize>, Option<PatchPair>, Option<ComplementDomain>);

/// Condensed data of one subdomain.
#[derive(Debug, Clone)]
pub struct Subdomain {
    /// 0 for the complement, the patch id otherwise.
    pub id: usize,
    pub kind: SubdomainKind,
    pub assembly: AssemblyOperator,
    pub transfer: TransferOperator,
    pub global_condensed: CondensedOperator,
    pub fine_condensed: CondensedOperator,
    pub fine_system: AssembledSystem,
}

impl Subdomain {
    /// Projected nodal reaction `q = Jᵀ(S^F J Aᵀ u_Γ − b^F)` on `Γ^s`.
    pub fn reaction(&self, u_gamma: &DVector<f64>) -> DVector<f64> {
        let local = self.assembly.restrict(u_gamma);
        self.reaction_from_local(&local)
    }

    /// Same as [`Subdomain::reaction`] with `Aᵀ u_Γ` already extracted.
    pub fn reaction_from_local(&self, local: &DVector<f64>) -> DVector<f64> {
        let fine_trace = self.transfer.apply(local);
        let lambda = &self.fine_condensed.schur * fine_trace - &self.fine_condensed.rhs;
        self.transfer.apply_transpose(&lambda)
    }

    pub fn fine_dof_count(&self) -> usize {
        self.fine_system.size()
    }
}

/// Everything needed to evaluate one coupled residual.
#[derive(Debug, Clone)]
pub struct CouplingScenario {
    pub physics: Physics,
    pub loading: Loading,
    pub global_model: MeshModel,
    pub global_system: AssembledSystem,
    /// Global free dofs forming `Γ`, ascending.
    pub interface_dofs: Vec<usize>,
    /// Complement first (when present), then patches in definition order.
    pub subdomains: Vec<Subdomain>,
    pub patches: Vec<PatchPair>,
    pub complement: Option<ComplementDomain>,
    pub global_schur: DMatrix<f64>,
    pub global_rhs: DVector<f64>,
    global_factor: Cholesky<f64, Dyn>,
}

impl CouplingScenario {
    pub fn build(
        physics: Physics,
        loading: Loading,
        global_model: MeshModel,
        patches: Vec<PatchDefinition>,
    ) -> Result<Self> {
        global_model.validate()?;
        let grid = global_model
            .grid
            .clone()
            .ok_or_else(|| CouplingError::Geometry("global model must be a structured grid".into()))?;
        if global_model.dirichlet.is_empty() {
            return Err(CouplingError::Configuration("global model has no Dirichlet condition".into()));
        }
        if !global_model.has_homogeneous_dirichlet() {
            return Err(CouplingError::Configuration("coupled models require homogeneous Dirichlet data".into()));
        }
        if patches.is_empty() {
            return Err(CouplingError::Configuration("scenario has no patch".into()));
        }
        let dim = global_model.dimension;
        let global_system = assemble(&global_model, physics, &loading)?;
        let gmap = &global_system.dof_map;
        let tol = 1e-9 * grid.min_spacing();

        // element -> subdomain slot (0 = complement, k+1 = patches[k])
        let mut owner = vec![0usize; global_model.element_count()];
        for e in 0..global_model.element_count() {
            let c = global_model.centroid(e);
            let mut hits = patches.iter().enumerate().filter(|(_, p)| p.region.contains(&c, dim));
            if let Some((k, p)) = hits.next() {
                if hits.next().is_some() {
                    return Err(CouplingError::Geometry(format!("element {e} lies in two patch regions")));
                }
                let inside = global_model.elements[e].iter().all(|&n| {
                    let x = global_model.nodes[n];
                    (0..dim).all(|d| x[d] >= p.region.min[d] - tol && x[d] <= p.region.max[d] + tol)
                });
                if !inside {
                    return Err(CouplingError::Geometry(format!(
                        "region of patch {} is not aligned with the global mesh",
                        p.id
                    )));
                }
                owner[e] = k + 1;
            }
        }
        let slots = patches.len() + 1;
        let mut elements_of: Vec<Vec<usize>> = vec![Vec::new(); slots];
        for (e, &o) in owner.iter().enumerate() {
            elements_of[o].push(e);
        }
        for (k, p) in patches.iter().enumerate() {
            if elements_of[k + 1].is_empty() {
                return Err(CouplingError::Geometry(format!("patch {} covers no global element", p.id)));
            }
        }

        // nodes shared by two or more subdomains form the interface
        let mut node_slots: Vec<Vec<usize>> = vec![Vec::new(); global_model.node_count()];
        for (slot, elems) in elements_of.iter().enumerate() {
            for &e in elems {
                for &n in &global_model.elements[e] {
                    if !node_slots[n].contains(&slot) {
                        node_slots[n].push(slot);
                    }
                }
            }
        }
        let on_gamma: Vec<bool> = node_slots.iter().map(|s| s.len() >= 2).collect();
        let interface_dofs: Vec<usize> = (0..global_model.node_count())
            .filter(|&n| on_gamma[n])
            .flat_map(|n| gmap.free_dofs_of(n).collect::<Vec<_>>())
            .collect();
        if interface_dofs.is_empty() {
            return Err(CouplingError::Topology("the interface carries no free dof".into()));
        }

        let active: Vec<usize> = (0..slots).filter(|&s| !elements_of[s].is_empty()).collect();
        let built: Vec<Result<BuiltSlot>> = active
            .par_iter()
            .map(|&slot| {
                let (sub_mesh, to_parent) = global_model.restrict(&elements_of[slot]);
                let iface_nodes_local: Vec<usize> = (0..sub_mesh.node_count()).filter(|&l| on_gamma[to_parent[l]]).collect();
                let iface_nodes_global: Vec<usize> = iface_nodes_local.iter().map(|&l| to_parent[l]).collect();
                let sub_system = assemble(&sub_mesh, physics, &loading)?;
                let comps = sub_system.dof_map.components;
                let mut local_dofs = Vec::new();
                let mut keys = Vec::new();
                // (Γ^s node position, component) -> local column
                let mut column_of: Vec<Vec<Option<usize>>> = Vec::with_capacity(iface_nodes_local.len());
                for (&l, &g) in iface_nodes_local.iter().zip(&iface_nodes_global) {
                    let mut cols = vec![None; comps];
                    for (c, col) in cols.iter_mut().enumerate() {
                        if let Some(d) = sub_system.dof_map.free_dof(l, c) {
                            *col = Some(local_dofs.len());
                            local_dofs.push(d);
                            keys.push(gmap.free_dof(g, c).expect("free in the sub-mesh implies free globally"));
                        }
                    }
                    column_of.push(cols);
                }
                let label = if slot == 0 {
                    "complement (global)".to_string()
                } else {
                    format!("patch {} (global)", patches[slot - 1].id)
                };
                let global_condensed = condense(&sub_system, &local_dofs, &label)?;
                if slot == 0 {
                    let n = local_dofs.len();
                    let sub = Subdomain {
                        id: 0,
                        kind: SubdomainKind::Complement,
                        assembly: AssemblyOperator::identity(0),
                        transfer: TransferOperator::identity(n),
                        fine_condensed: global_condensed.clone(),
                        global_condensed,
                        fine_system: sub_system,
                    };
                    let comp = ComplementDomain {
                        model: sub_mesh,
                        interface_nodes: iface_nodes_global,
                    };
                    return Ok((sub, keys, None, Some(comp)));
                }

                let def = &patches[slot - 1];
                def.fine.validate()?;
                if def.fine.dimension != dim {
                    return Err(CouplingError::Geometry(format!("patch {} has wrong dimension", def.id)));
                }
                if !def.fine.has_homogeneous_dirichlet() {
                    return Err(CouplingError::Configuration(format!(
                        "patch {} carries non-homogeneous Dirichlet data",
                        def.id
                    )));
                }
                let bounds = grid.bounds();
                let fine_iface: Vec<usize> = (0..def.fine.node_count())
                    .filter(|&n| on_interface_face(&def.fine.nodes[n], &def.region, &bounds, dim, tol))
                    .collect();
                for &g in &iface_nodes_global {
                    let x = global_model.nodes[g];
                    let matched = fine_iface
                        .iter()
                        .any(|&f| (0..dim).all(|d| (def.fine.nodes[f][d] - x[d]).abs() <= tol));
                    if !matched {
                        return Err(CouplingError::Geometry(format!(
                            "global interface node {g} at {x:?} has no fine counterpart in patch {}",
                            def.id
                        )));
                    }
                }
                let nodal = build_transfer(&global_model, &iface_nodes_global, &def.fine, &fine_iface)?;
                let fine_system = assemble(&def.fine, physics, &loading)?;
                let fmap = &fine_system.dof_map;
                let mut fine_dofs = Vec::new();
                let mut rows = Vec::new();
                for (r, &f) in fine_iface.iter().enumerate() {
                    for c in 0..comps {
                        let Some(d) = fmap.free_dof(f, c) else { continue };
                        fine_dofs.push(d);
                        rows.push(
                            nodal.rows()[r]
                                .iter()
                                .filter_map(|&(k, w)| column_of[k][c].map(|col| (col, w)))
                                .collect(),
                        );
                    }
                }
                let transfer = TransferOperator::new(rows, local_dofs.len())?;
                let fine_condensed = condense(&fine_system, &fine_dofs, &format!("patch {} (fine)", def.id))?;
                let pair = PatchPair {
                    id: def.id,
                    region: def.region,
                    global_part: sub_mesh,
                    fine_part: def.fine.clone(),
                    interface_nodes_global: iface_nodes_global,
                    interface_nodes_fine: fine_iface,
                };
                let sub = Subdomain {
                    id: def.id,
                    kind: SubdomainKind::Patch,
                    assembly: AssemblyOperator::identity(0),
                    transfer,
                    global_condensed,
                    fine_condensed,
                    fine_system,
                };
                Ok((sub, keys, Some(pair), None))
            })
            .collect();

        let mut subdomains = Vec::new();
        let mut key_sets = Vec::new();
        let mut pairs = Vec::new();
        let mut complement = None;
        for item in built {
            let (sub, keys, pair, comp) = item?;
            subdomains.push(sub);
            key_sets.push(keys);
            pairs.extend(pair);
            if comp.is_some() {
                complement = comp;
            }
        }
        let ops = build_assembly_operators(&interface_dofs, &key_sets)?;
        for (sub, op) in subdomains.iter_mut().zip(ops) {
            sub.assembly = op;
        }
        let (global_schur, global_rhs) = assemble_global_schur_parts(&subdomains, interface_dofs.len());
        let global_factor = Cholesky::new(global_schur.clone()).ok_or_else(|| {
            CouplingError::Configuration("assembled global Schur complement is singular (missing Dirichlet?)".into())
        })?;
        Ok(CouplingScenario {
            physics,
            loading,
            global_model,
            global_system,
            interface_dofs,
            subdomains,
            patches: pairs,
            complement,
            global_schur,
            global_rhs,
            global_factor,
        })
    }

    pub fn interface_size(&self) -> usize {
        self.interface_dofs.len()
    }

    pub fn patch_count(&self) -> usize {
        self.subdomains.iter().filter(|s| s.kind == SubdomainKind::Patch).count()
    }

    /// `S^{G⁻¹} x` through the retained Cholesky factor.
    pub fn solve_global_schur(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.global_factor.solve(rhs)
    }

    pub fn solve_global_schur_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.global_factor.solve(rhs)
    }

    pub fn global_cholesky_l(&self) -> DMatrix<f64> {
        self.global_factor.l()
    }

    /// `r = −Σ_s A^s q^s`, summed in subdomain order.
    pub fn assemble_residual(&self, reactions: &[DVector<f64>]) -> DVector<f64> {
        let mut r = DVector::zeros(self.interface_size());
        for (sub, q) in self.subdomains.iter().zip(reactions) {
            sub.assembly.scatter_add(q, &mut r);
        }
        -r
    }

    /// `Ŝ^{s,F}` of subdomain index `s` (position in `subdomains`).
    pub fn hat_fine(&self, s: usize) -> DMatrix<f64> {
        let sub = &self.subdomains[s];
        hat_fine_operator(&sub.fine_condensed.schur, &sub.assembly, &sub.transfer)
            .expect("dimensions are consistent by construction")
    }

    /// `Σ_s Ŝ^{s,F}`.
    pub fn sum_hat_fine(&self) -> DMatrix<f64> {
        let mut total = DMatrix::zeros(self.interface_size(), self.interface_size());
        for s in 0..self.subdomains.len() {
            total += self.hat_fine(s);
        }
        total
    }

    /// Characteristic length used for geometric tolerances.
    pub fn mesh_size(&self) -> f64 {
        self.global_model.grid.as_ref().map(|g| g.min_spacing()).unwrap_or(1.0)
    }
}

/// A fine node lies on `Γ^s` when it sits on a face of the patch box that is
/// interior to the global domain.
fn on_interface_face(p: &Point, region: &Region, domain: &Region, dim: usize, tol: f64) -> bool {
    (0..dim).any(|d| {
        ((p[d] - region.min[d]).abs() <= tol && region.min[d] > domain.min[d] + tol)
            || ((p[d] - region.max[d]).abs() <= tol && region.max[d] < domain.max[d] - tol)
    })
}

fn assemble_global_schur_parts(subdomains: &[Subdomain], n: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut s = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for sub in subdomains {
        sub.assembly.scatter_add_matrix(&sub.global_condensed.schur, &mut s);
        sub.assembly.scatter_add(&sub.global_condensed.rhs, &mut b);
    }
    (s, b)
}

/// `S^G = Σ A^s S^{s,G} A^{sᵀ}` and `b^G = Σ A^s b^{s,G}`; positive
/// definiteness is checked by a Cholesky factorization.
pub fn assemble_global_schur(scenario: &CouplingScenario) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (s, b) = assemble_global_schur_parts(&scenario.subdomains, scenario.interface_size());
    if Cholesky::new(s.clone()).is_none() {
        return Err(CouplingError::Configuration("assembled global Schur complement is singular".into()));
    }
    Ok((s, b))
}

/// `Ŝ^{s,F} = A J^ᵀ S^F J Aᵀ`.
pub fn hat_fine_operator(
    fine_schur: &DMatrix<f64>,
    assembly: &AssemblyOperator,
    transfer: &TransferOperator,
) -> Result<DMatrix<f64>> {
    if transfer.nrows() != fine_schur.nrows() || fine_schur.nrows() != fine_schur.ncols() {
        return Err(CouplingError::invalid(format!(
            "transfer has {} rows but fine Schur complement is {}x{}",
            transfer.nrows(),
            fine_schur.nrows(),
            fine_schur.ncols()
        )));
    }
    if transfer.ncols() != assembly.local_size() {
        return Err(CouplingError::invalid("transfer and assembly operator disagree on Γ^s size"));
    }
    let j = transfer.to_dense();
    let local = j.transpose() * fine_schur * &j;
    let mut out = DMatrix::zeros(assembly.global_size(), assembly.global_size());
    assembly.scatter_add_matrix(&local, &mut out);
    Ok(out)
}

/// `b̂ = Σ A Jᵀ(S^F J Aᵀ S^{G⁻¹} b^G − b^F)`.
pub fn hat_rhs(scenario: &CouplingScenario) -> DVector<f64> {
    let u0 = scenario.solve_global_schur(&scenario.global_rhs);
    let reactions: Vec<DVector<f64>> = scenario.subdomains.iter().map(|s| s.reaction(&u0)).collect();
    // assemble_residual returns −Σ A q
    -scenario.assemble_residual(&reactions)
}
