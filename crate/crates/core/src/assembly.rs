//! Finite-element assembly for the thermal (Poisson) and linear elasticity
//! model problems.
//!
//! Elements: linear intervals (1D), linear triangles (2D), trilinear
//! hexahedra with 2x2x2 Gauss quadrature (3D). 2D elasticity is plane
//! strain. Dirichlet dofs are removed by symmetric elimination, their
//! prescribed values moved to the right-hand side.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{CouplingError, Result};
use crate::mesh::{ElementKind, Material, MeshModel, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Physics {
    Thermal,
    Elasticity,
}

impl Physics {
    pub fn components(self, dimension: usize) -> usize {
        match self {
            Physics::Thermal => 1,
            Physics::Elasticity => dimension,
        }
    }
}

/// Volume loading: scalar source for thermal problems, body force for
/// elasticity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loading {
    pub source: f64,
    pub body_force: [f64; 3],
}

impl Loading {
    pub fn source(source: f64) -> Self {
        Loading {
            source,
            body_force: [0.0; 3],
        }
    }

    pub fn body_force(force: [f64; 3]) -> Self {
        Loading {
            source: 0.0,
            body_force: force,
        }
    }
}

/// Association between mesh nodes and (free) degrees of freedom.
///
/// Full dof of `(node, c)` is `node * components + c`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub components: usize,
    free_index: Vec<Option<usize>>,
    free_to_full: Vec<usize>,
    prescribed: Vec<(usize, f64)>,
}

impl DofMap {
    fn new(mesh: &MeshModel, components: usize) -> Result<Self> {
        let total = mesh.node_count() * components;
        let mut fixed: Vec<Option<f64>> = vec![None; total];
        for (&node, values) in &mesh.dirichlet {
            let vals: Vec<f64> = match values.len() {
                1 => vec![values[0]; components],
                l if l == components => values.clone(),
                l => {
                    return Err(CouplingError::invalid(format!(
                        "node {node} has {l} Dirichlet values for {components} components"
                    )))
                }
            };
            for (c, v) in vals.into_iter().enumerate() {
                fixed[node * components + c] = Some(v);
            }
        }
        let mut free_index = vec![None; total];
        let mut free_to_full = Vec::new();
        let mut prescribed = Vec::new();
        for (dof, f) in fixed.iter().enumerate() {
            match f {
                None => {
                    free_index[dof] = Some(free_to_full.len());
                    free_to_full.push(dof);
                }
                Some(v) => prescribed.push((dof, *v)),
            }
        }
        Ok(DofMap {
            components,
            free_index,
            free_to_full,
            prescribed,
        })
    }

    pub fn full_count(&self) -> usize {
        self.free_index.len()
    }

    pub fn free_count(&self) -> usize {
        self.free_to_full.len()
    }

    pub fn free_dof(&self, node: usize, component: usize) -> Option<usize> {
        self.free_index[node * self.components + component]
    }

    /// Free dofs carried by `node`, in component order.
    pub fn free_dofs_of(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.components).filter_map(move |c| self.free_dof(node, c))
    }

    pub fn full_of_free(&self, free: usize) -> usize {
        self.free_to_full[free]
    }

    pub fn node_of_free(&self, free: usize) -> (usize, usize) {
        let full = self.free_to_full[free];
        (full / self.components, full % self.components)
    }

    pub fn prescribed(&self) -> &[(usize, f64)] {
        &self.prescribed
    }

    /// Full-length nodal vector from free values plus prescribed values.
    pub fn expand(&self, reduced: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.full_count());
        for (i, &dof) in self.free_to_full.iter().enumerate() {
            full[dof] = reduced[i];
        }
        for &(dof, v) in &self.prescribed {
            full[dof] = v;
        }
        full
    }
}

/// Reduced (Dirichlet-eliminated) linear system `K u = f`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: CsrMatrix<f64>,
    pub load: DVector<f64>,
    pub dof_map: DofMap,
}

impl AssembledSystem {
    /// Wraps a dense SPD system with no constrained dofs.
    pub fn from_dense(stiffness: &DMatrix<f64>, load: DVector<f64>) -> Self {
        let n = load.len();
        let mut coo = CooMatrix::new(n, n);
        for j in 0..n {
            for i in 0..n {
                let v = stiffness[(i, j)];
                if v != 0.0 {
                    coo.push(i, j, v);
                }
            }
        }
        AssembledSystem {
            stiffness: CsrMatrix::from(&coo),
            load,
            dof_map: DofMap {
                components: 1,
                free_index: (0..n).map(Some).collect(),
                free_to_full: (0..n).collect(),
                prescribed: Vec::new(),
            },
        }
    }

    pub fn size(&self) -> usize {
        self.load.len()
    }

    pub fn dense_stiffness(&self) -> DMatrix<f64> {
        let n = self.size();
        let mut k = DMatrix::zeros(n, n);
        for (i, j, v) in self.stiffness.triplet_iter() {
            k[(i, j)] += *v;
        }
        k
    }

    /// Dense block `K[rows, cols]`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut col_pos = vec![usize::MAX; self.size()];
        for (p, &c) in cols.iter().enumerate() {
            col_pos[c] = p;
        }
        let mut out = DMatrix::zeros(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            let row = self.stiffness.row(i);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                let p = col_pos[j];
                if p != usize::MAX {
                    out[(r, p)] += v;
                }
            }
        }
        out
    }

    /// Direct dense solve of the reduced system.
    pub fn solve_dense(&self) -> Result<DVector<f64>> {
        let chol = self
            .dense_stiffness()
            .cholesky()
            .ok_or_else(|| CouplingError::Configuration("stiffness is not positive definite".into()))?;
        Ok(chol.solve(&self.load))
    }
}

pub fn assemble_poisson(mesh: &MeshModel, source: f64) -> Result<AssembledSystem> {
    assemble(mesh, Physics::Thermal, &Loading::source(source))
}

pub fn assemble_elasticity(mesh: &MeshModel, body_force: &[f64]) -> Result<AssembledSystem> {
    let mut f = [0.0; 3];
    for (d, v) in body_force.iter().take(3).enumerate() {
        f[d] = *v;
    }
    assemble(mesh, Physics::Elasticity, &Loading::body_force(f))
}

/// Assembles the reduced system for `physics` on `mesh`.
pub fn assemble(mesh: &MeshModel, physics: Physics, loading: &Loading) -> Result<AssembledSystem> {
    mesh.validate()?;
    if physics == Physics::Elasticity && mesh.dimension < 2 {
        return Err(CouplingError::invalid("elasticity requires dimension 2 or 3"));
    }
    let comps = physics.components(mesh.dimension);
    let dof_map = DofMap::new(mesh, comps)?;
    let n = dof_map.free_count();
    let mut fixed_value = vec![None; dof_map.full_count()];
    for &(dof, v) in dof_map.prescribed() {
        fixed_value[dof] = Some(v);
    }

    let mut coo = CooMatrix::new(n, n);
    let mut load = DVector::zeros(n);
    for (e, conn) in mesh.elements.iter().enumerate() {
        let coords: Vec<Point> = conn.iter().map(|&i| mesh.nodes[i]).collect();
        let (ke, fe) = element_matrices(mesh.kind, mesh.dimension, physics, &coords, &mesh.materials[e], loading)?;
        let dofs: Vec<usize> = conn
            .iter()
            .flat_map(|&node| (0..comps).map(move |c| node * comps + c))
            .collect();
        for (a, &ga) in dofs.iter().enumerate() {
            let Some(ia) = dof_map.free_index[ga] else { continue };
            load[ia] += fe[a];
            for (b, &gb) in dofs.iter().enumerate() {
                match dof_map.free_index[gb] {
                    Some(ib) => coo.push(ia, ib, ke[(a, b)]),
                    None => {
                        let v = fixed_value[gb].unwrap_or(0.0);
                        if v != 0.0 {
                            load[ia] -= ke[(a, b)] * v;
                        }
                    }
                }
            }
        }
    }
    Ok(AssembledSystem {
        stiffness: CsrMatrix::from(&coo),
        load,
        dof_map,
    })
}

fn element_matrices(
    kind: ElementKind,
    dim: usize,
    physics: Physics,
    x: &[Point],
    mat: &Material,
    loading: &Loading,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match (kind, physics) {
        (ElementKind::Interval, Physics::Thermal) => {
            let h = (x[1][0] - x[0][0]).abs();
            if h <= 0.0 {
                return Err(CouplingError::invalid("degenerate interval element"));
            }
            let k = mat.diffusivity / h;
            Ok((
                DMatrix::from_row_slice(2, 2, &[k, -k, -k, k]),
                DVector::from_element(2, loading.source * h / 2.0),
            ))
        }
        (ElementKind::Triangle, _) => {
            let (area, b, c) = triangle_gradients(x)?;
            match physics {
                Physics::Thermal => {
                    let mut ke = DMatrix::zeros(3, 3);
                    for i in 0..3 {
                        for j in 0..3 {
                            ke[(i, j)] = mat.diffusivity * area * (b[i] * b[j] + c[i] * c[j]);
                        }
                    }
                    Ok((ke, DVector::from_element(3, loading.source * area / 3.0)))
                }
                Physics::Elasticity => {
                    let mut bm = DMatrix::zeros(3, 6);
                    for i in 0..3 {
                        bm[(0, 2 * i)] = b[i];
                        bm[(1, 2 * i + 1)] = c[i];
                        bm[(2, 2 * i)] = c[i];
                        bm[(2, 2 * i + 1)] = b[i];
                    }
                    let d = constitutive_matrix(2, mat);
                    let ke = bm.transpose() * d * bm * area;
                    let mut fe = DVector::zeros(6);
                    for i in 0..3 {
                        fe[2 * i] = loading.body_force[0] * area / 3.0;
                        fe[2 * i + 1] = loading.body_force[1] * area / 3.0;
                    }
                    Ok((ke, fe))
                }
            }
        }
        (ElementKind::Hexahedron, _) => Ok(hexahedron_matrices(physics, x, mat, loading)),
        (ElementKind::Interval, Physics::Elasticity) => {
            debug_assert!(dim == 1);
            Err(CouplingError::invalid("elasticity requires dimension 2 or 3"))
        }
    }
}

/// Area and shape-function gradients `(dN/dx, dN/dy)` of a linear triangle.
fn triangle_gradients(x: &[Point]) -> Result<(f64, [f64; 3], [f64; 3])> {
    let det = (x[1][0] - x[0][0]) * (x[2][1] - x[0][1]) - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]);
    if det.abs() < 1e-300 {
        return Err(CouplingError::invalid("degenerate triangle"));
    }
    let area = det.abs() / 2.0;
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        b[i] = (x[j][1] - x[k][1]) / det;
        c[i] = (x[k][0] - x[j][0]) / det;
    }
    Ok((area, b, c))
}

/// Isotropic Hooke law in Voigt form with engineering shear strains.
/// `dim == 2` gives the plane strain restriction.
pub fn constitutive_matrix(dim: usize, mat: &Material) -> DMatrix<f64> {
    let (e, nu) = (mat.young, mat.poisson);
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    if dim == 2 {
        DMatrix::from_row_slice(
            3,
            3,
            &[lambda + 2.0 * mu, lambda, 0.0, lambda, lambda + 2.0 * mu, 0.0, 0.0, 0.0, mu],
        )
    } else {
        let mut d = DMatrix::zeros(6, 6);
        for i in 0..3 {
            for j in 0..3 {
                d[(i, j)] = lambda;
            }
            d[(i, i)] = lambda + 2.0 * mu;
            d[(i + 3, i + 3)] = mu;
        }
        d
    }
}

const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Shape values and physical gradients of the trilinear hexahedron at a
/// reference point; also returns `det(J)`.
fn hex_shape(x: &[Point], xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8], f64) {
    let mut n = [0.0; 8];
    let mut dref = [[0.0; 3]; 8];
    for (a, c) in HEX_CORNERS.iter().enumerate() {
        let f = [1.0 + c[0] * xi[0], 1.0 + c[1] * xi[1], 1.0 + c[2] * xi[2]];
        n[a] = f[0] * f[1] * f[2] / 8.0;
        dref[a] = [c[0] * f[1] * f[2] / 8.0, f[0] * c[1] * f[2] / 8.0, f[0] * f[1] * c[2] / 8.0];
    }
    let mut jac = nalgebra::Matrix3::<f64>::zeros();
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                jac[(i, j)] += dref[a][j] * x[a][i];
            }
        }
    }
    let det = jac.determinant();
    let inv = jac.try_inverse().unwrap_or_else(nalgebra::Matrix3::zeros);
    let mut grad = [[0.0; 3]; 8];
    for a in 0..8 {
        for i in 0..3 {
            grad[a][i] = (0..3).map(|j| dref[a][j] * inv[(j, i)]).sum();
        }
    }
    (n, grad, det)
}

fn hex_b_matrix(grad: &[[f64; 3]; 8]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(6, 24);
    for (a, g) in grad.iter().enumerate() {
        let c = 3 * a;
        b[(0, c)] = g[0];
        b[(1, c + 1)] = g[1];
        b[(2, c + 2)] = g[2];
        b[(3, c)] = g[1];
        b[(3, c + 1)] = g[0];
        b[(4, c + 1)] = g[2];
        b[(4, c + 2)] = g[1];
        b[(5, c)] = g[2];
        b[(5, c + 2)] = g[0];
    }
    b
}

fn hexahedron_matrices(physics: Physics, x: &[Point], mat: &Material, loading: &Loading) -> (DMatrix<f64>, DVector<f64>) {
    let g = 1.0 / 3f64.sqrt();
    let comps = physics.components(3);
    let mut ke = DMatrix::zeros(8 * comps, 8 * comps);
    let mut fe = DVector::zeros(8 * comps);
    let d = constitutive_matrix(3, mat);
    for gp in HEX_CORNERS.iter() {
        let (n, grad, det) = hex_shape(x, [gp[0] * g, gp[1] * g, gp[2] * g]);
        let w = det.abs();
        match physics {
            Physics::Thermal => {
                for a in 0..8 {
                    fe[a] += loading.source * n[a] * w;
                    for b in 0..8 {
                        let dot: f64 = (0..3).map(|i| grad[a][i] * grad[b][i]).sum();
                        ke[(a, b)] += mat.diffusivity * dot * w;
                    }
                }
            }
            Physics::Elasticity => {
                let bm = hex_b_matrix(&grad);
                ke += bm.transpose() * &d * bm * w;
                for a in 0..8 {
                    for c in 0..3 {
                        fe[3 * a + c] += loading.body_force[c] * n[a] * w;
                    }
                }
            }
        }
    }
    (ke, fe)
}

/// Stress (Voigt, engineering shear) at each element centroid for a full
/// nodal displacement vector.
pub fn element_stresses(mesh: &MeshModel, displacement: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let dim = mesh.dimension;
    if dim < 2 || displacement.len() != mesh.node_count() * dim {
        return Err(CouplingError::invalid("displacement length does not match mesh"));
    }
    let mut out = Vec::with_capacity(mesh.element_count());
    for (e, conn) in mesh.elements.iter().enumerate() {
        let coords: Vec<Point> = conn.iter().map(|&i| mesh.nodes[i]).collect();
        let ue = DVector::from_iterator(
            conn.len() * dim,
            conn.iter().flat_map(|&n| (0..dim).map(move |c| displacement[n * dim + c])),
        );
        let d = constitutive_matrix(dim, &mesh.materials[e]);
        let b = match mesh.kind {
            ElementKind::Triangle => {
                let (_, b, c) = triangle_gradients(&coords)?;
                let mut bm = DMatrix::zeros(3, 6);
                for i in 0..3 {
                    bm[(0, 2 * i)] = b[i];
                    bm[(1, 2 * i + 1)] = c[i];
                    bm[(2, 2 * i)] = c[i];
                    bm[(2, 2 * i + 1)] = b[i];
                }
                bm
            }
            ElementKind::Hexahedron => hex_b_matrix(&hex_shape(&coords, [0.0; 3]).1),
            ElementKind::Interval => unreachable!(),
        };
        out.push(d * (b * ue));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    fn chain() -> MeshModel {
        let mut m = build_structured_mesh(1, &[2], &[2.0]).unwrap();
        m.dirichlet.insert(0, vec![0.0]);
        m
    }

    #[test]
    fn reduced_chain_system() {
        let sys = assemble_poisson(&chain(), 1.0).unwrap();
        let k = sys.dense_stiffness();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]));
        assert_eq!(sys.load.as_slice(), &[1.0, 0.5]);
    }

    #[test]
    fn stiffness_linear_in_diffusivity() {
        let base = assemble_poisson(&chain(), 1.0).unwrap().dense_stiffness();
        let mut m = chain();
        m.set_uniform_material(Material::default().scaled(10.0));
        let scaled = assemble_poisson(&m, 1.0).unwrap().dense_stiffness();
        assert!((scaled - base * 10.0).abs().max() < 1e-12);
    }

    #[test]
    fn zero_source_all_fixed_gives_zero() {
        let mut m = build_structured_mesh(2, &[3, 3], &[1.0, 1.0]).unwrap();
        m.fix_nodes_where(|p| p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0);
        let sys = assemble_poisson(&m, 0.0).unwrap();
        let u = sys.solve_dense().unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn nu_zero_collapses_hooke_law() {
        let m = Material {
            diffusivity: 1.0,
            young: 1.0,
            poisson: 0.0,
        };
        let d = constitutive_matrix(2, &m);
        // normal stress equals normal strain, shear modulus 1/2
        assert_eq!(d, DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5]));
    }

    #[test]
    fn young_modulus_scaling() {
        let mut m = build_structured_mesh(2, &[2, 2], &[1.0, 1.0]).unwrap();
        m.fix_nodes_where(|p| p[0] == 0.0);
        let k1 = assemble_elasticity(&m, &[0.0, 0.0]).unwrap().dense_stiffness();
        m.set_uniform_material(Material::default().scaled(100.0));
        let k100 = assemble_elasticity(&m, &[0.0, 0.0]).unwrap().dense_stiffness();
        assert!((k100 - k1 * 100.0).abs().max() < 1e-10);
    }

    #[test]
    fn elasticity_rejects_incompressible() {
        let mut m = build_structured_mesh(2, &[1, 1], &[1.0, 1.0]).unwrap();
        m.materials[0].poisson = 0.5;
        assert!(matches!(
            assemble_elasticity(&m, &[0.0, 0.0]),
            Err(CouplingError::InvalidArgument(_))
        ));
    }

    #[test]
    fn hexahedron_load_integrates_volume() {
        let mut m = build_structured_mesh(3, &[2, 1, 1], &[2.0, 1.0, 0.5]).unwrap();
        m.dirichlet.clear();
        let sys = assemble_poisson(&m, 1.0).unwrap();
        assert!((sys.load.sum() - 1.0).abs() < 1e-12);
        // constant field lies in the kernel of the unconstrained operator
        let k = sys.dense_stiffness();
        let ones = DVector::from_element(sys.size(), 1.0);
        assert!((k * ones).amax() < 1e-12);
    }
}
