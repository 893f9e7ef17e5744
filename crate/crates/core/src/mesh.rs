//! Structured tensor-grid meshes and per-element material records.
//!
//! Node numbering is lexicographic with `x` running fastest. In 2D each grid
//! cell is split into two triangles along its `(0,0)-(1,1)` diagonal, which
//! keeps uniformly refined meshes nested. 3D cells are trilinear hexahedra.

use std::collections::BTreeMap;

use crate::error::{CouplingError, Result};

/// Coordinates are always stored with three components; unused ones are zero.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Interval,
    Triangle,
    Hexahedron,
}

impl ElementKind {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementKind::Interval => 2,
            ElementKind::Triangle => 3,
            ElementKind::Hexahedron => 8,
        }
    }
}

/// Coefficients carried by every element. Thermal problems read
/// `diffusivity`, elasticity reads `young` and `poisson`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub diffusivity: f64,
    pub young: f64,
    pub poisson: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            diffusivity: 1.0,
            young: 1.0,
            poisson: 0.3,
        }
    }
}

impl Material {
    /// Same material with every stiffness coefficient multiplied by `factor`.
    pub fn scaled(self, factor: f64) -> Material {
        Material {
            diffusivity: self.diffusivity * factor,
            young: self.young * factor,
            poisson: self.poisson,
        }
    }
}

/// Axis-aligned box, used for patch regions and grid extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Point,
    pub max: Point,
}

impl Region {
    pub fn new(min: Point, max: Point) -> Self {
        Region { min, max }
    }

    pub fn contains(&self, p: &Point, dimension: usize) -> bool {
        (0..dimension).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    pub fn size(&self) -> Point {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }
}

/// Tensor-grid description kept alongside a generated mesh; used for point
/// location when interpolating between non-matching meshes.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGrid {
    pub dimension: usize,
    pub origin: Point,
    pub extent: Point,
    pub divisions: [usize; 3],
}

impl StructuredGrid {
    pub fn new(dimension: usize, origin: Point, extent: &[f64], divisions: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(CouplingError::invalid(format!("dimension must be 1, 2 or 3, got {dimension}")));
        }
        if divisions.len() != dimension || extent.len() != dimension {
            return Err(CouplingError::invalid(format!(
                "expected {dimension} divisions and extents, got {} and {}",
                divisions.len(),
                extent.len()
            )));
        }
        let mut div = [1usize; 3];
        let mut ext = [0.0; 3];
        for d in 0..dimension {
            if divisions[d] == 0 {
                return Err(CouplingError::invalid(format!("zero divisions along axis {d}")));
            }
            if !(extent[d] > 0.0) {
                return Err(CouplingError::invalid(format!("non-positive extent along axis {d}")));
            }
            div[d] = divisions[d];
            ext[d] = extent[d];
        }
        Ok(StructuredGrid {
            dimension,
            origin,
            extent: ext,
            divisions: div,
        })
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.divisions[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dimension).map(|d| self.spacing(d)).fold(f64::INFINITY, f64::min)
    }

    pub fn bounds(&self) -> Region {
        let mut max = self.origin;
        for d in 0..self.dimension {
            max[d] += self.extent[d];
        }
        Region::new(self.origin, max)
    }

    fn nodes_along(&self, axis: usize) -> usize {
        if axis < self.dimension {
            self.divisions[axis] + 1
        } else {
            1
        }
    }

    pub fn node_count(&self) -> usize {
        (0..3).map(|d| self.nodes_along(d)).product()
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let nx = self.nodes_along(0);
        let ny = self.nodes_along(1);
        i + nx * (j + ny * k)
    }

    /// Multilinear interpolation weights of the grid nodes at `p`.
    ///
    /// Returns `None` when `p` lies outside the grid by more than
    /// `1e-9 * min_spacing`. Weights below `1e-14` are dropped.
    pub fn interpolation_weights(&self, p: &Point) -> Option<Vec<(usize, f64)>> {
        let tol = 1e-9 * self.min_spacing();
        let mut cell = [0usize; 3];
        let mut local = [0.0f64; 3];
        for d in 0..self.dimension {
            let h = self.spacing(d);
            let x = p[d] - self.origin[d];
            if x < -tol || x > self.extent[d] + tol {
                return None;
            }
            let t = (x / h).clamp(0.0, self.divisions[d] as f64);
            let mut c = t.floor() as usize;
            if c >= self.divisions[d] {
                c = self.divisions[d] - 1;
            }
            let mut xi = t - c as f64;
            // snap onto grid lines so coincident nodes get exact unit weights
            if (xi * h).abs() < tol {
                xi = 0.0;
            } else if ((1.0 - xi) * h).abs() < tol {
                xi = 1.0;
            }
            cell[d] = c;
            local[d] = xi;
        }
        let corners = 1usize << self.dimension;
        let mut weights = Vec::with_capacity(corners);
        for corner in 0..corners {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for d in 0..self.dimension {
                let bit = (corner >> d) & 1;
                idx[d] = cell[d] + bit;
                w *= if bit == 1 { local[d] } else { 1.0 - local[d] };
            }
            if w.abs() > 1e-14 {
                weights.push((self.node_index(idx[0], idx[1], idx[2]), w));
            }
        }
        Some(weights)
    }
}

/// A discretized subdomain: nodes, elements, materials and Dirichlet data.
///
/// `dirichlet` maps a node to its prescribed values. A single value is
/// applied to every component of a vector-valued field; otherwise one value
/// per component is expected.
#[derive(Debug, Clone)]
pub struct MeshModel {
    pub dimension: usize,
    pub kind: ElementKind,
    pub nodes: Vec<Point>,
    pub elements: Vec<Vec<usize>>,
    pub materials: Vec<Material>,
    pub dirichlet: BTreeMap<usize, Vec<f64>>,
    pub grid: Option<StructuredGrid>,
}

impl MeshModel {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn centroid(&self, element: usize) -> Point {
        let conn = &self.elements[element];
        let mut c = [0.0; 3];
        for &n in conn {
            for d in 0..3 {
                c[d] += self.nodes[n][d];
            }
        }
        let inv = 1.0 / conn.len() as f64;
        c.map(|x| x * inv)
    }

    /// Assigns `material` to every element whose centroid satisfies `pred`.
    pub fn set_material_where(&mut self, material: Material, pred: impl Fn(&Point) -> bool) {
        for e in 0..self.elements.len() {
            if pred(&self.centroid(e)) {
                self.materials[e] = material;
            }
        }
    }

    pub fn set_uniform_material(&mut self, material: Material) {
        self.materials.iter_mut().for_each(|m| *m = material);
    }

    /// Homogeneous Dirichlet condition on every node satisfying `pred`.
    pub fn fix_nodes_where(&mut self, pred: impl Fn(&Point) -> bool) {
        for (i, p) in self.nodes.iter().enumerate() {
            if pred(p) {
                self.dirichlet.insert(i, vec![0.0]);
            }
        }
    }

    pub fn has_homogeneous_dirichlet(&self) -> bool {
        self.dirichlet.values().all(|v| v.iter().all(|&x| x == 0.0))
    }

    /// Checks connectivity and material invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let npe = self.kind.nodes_per_element();
        if self.materials.len() != self.elements.len() {
            return Err(CouplingError::invalid(format!(
                "{} materials for {} elements",
                self.materials.len(),
                self.elements.len()
            )));
        }
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.len() != npe {
                return Err(CouplingError::invalid(format!("element {e} has {} nodes, expected {npe}", conn.len())));
            }
            for (a, &i) in conn.iter().enumerate() {
                if i >= n {
                    return Err(CouplingError::invalid(format!("element {e} references node {i} >= {n}")));
                }
                if conn[..a].contains(&i) {
                    return Err(CouplingError::invalid(format!("element {e} repeats node {i}")));
                }
            }
        }
        for (e, m) in self.materials.iter().enumerate() {
            if !(m.diffusivity > 0.0) || !(m.young > 0.0) {
                return Err(CouplingError::invalid(format!("element {e} has non-positive coefficient")));
            }
            if !(0.0..0.5).contains(&m.poisson) {
                return Err(CouplingError::invalid(format!(
                    "element {e} has Poisson ratio {} outside [0, 0.5)",
                    m.poisson
                )));
            }
        }
        for &i in self.dirichlet.keys() {
            if i >= n {
                return Err(CouplingError::invalid(format!("Dirichlet node {i} >= {n}")));
            }
        }
        Ok(())
    }

    /// Sub-mesh made of the given elements. Nodes keep their relative order;
    /// the returned vector maps sub-mesh node index to parent node index.
    pub fn restrict(&self, elements: &[usize]) -> (MeshModel, Vec<usize>) {
        let mut used = vec![false; self.nodes.len()];
        for &e in elements {
            for &n in &self.elements[e] {
                used[n] = true;
            }
        }
        let mut to_local = vec![usize::MAX; self.nodes.len()];
        let mut to_parent = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                to_local[i] = to_parent.len();
                to_parent.push(i);
            }
        }
        let sub = MeshModel {
            dimension: self.dimension,
            kind: self.kind,
            nodes: to_parent.iter().map(|&i| self.nodes[i]).collect(),
            elements: elements
                .iter()
                .map(|&e| self.elements[e].iter().map(|&n| to_local[n]).collect())
                .collect(),
            materials: elements.iter().map(|&e| self.materials[e]).collect(),
            dirichlet: self
                .dirichlet
                .iter()
                .filter(|(n, _)| used[**n])
                .map(|(n, v)| (to_local[*n], v.clone()))
                .collect(),
            grid: None,
        };
        (sub, to_parent)
    }
}

/// Tensor-product mesh with origin at zero.
pub fn build_structured_mesh(dimension: usize, divisions: &[usize], extent: &[f64]) -> Result<MeshModel> {
    let grid = StructuredGrid::new(dimension, [0.0; 3], extent, divisions)?;
    Ok(build_grid_mesh(&grid))
}

/// Tensor-product mesh over an arbitrary grid.
pub fn build_grid_mesh(grid: &StructuredGrid) -> MeshModel {
    let dim = grid.dimension;
    let [nx, ny, nz] = [0, 1, 2].map(|d| grid.nodes_along(d));
    let mut nodes = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut p = [0.0; 3];
                for (d, idx) in [i, j, k].into_iter().enumerate().take(dim) {
                    p[d] = grid.origin[d] + idx as f64 * grid.spacing(d);
                }
                nodes.push(p);
            }
        }
    }
    let at = |i, j, k| grid.node_index(i, j, k);
    let mut elements = Vec::new();
    let kind = match dim {
        1 => {
            for i in 0..grid.divisions[0] {
                elements.push(vec![at(i, 0, 0), at(i + 1, 0, 0)]);
            }
            ElementKind::Interval
        }
        2 => {
            for j in 0..grid.divisions[1] {
                for i in 0..grid.divisions[0] {
                    let (n00, n10, n01, n11) = (at(i, j, 0), at(i + 1, j, 0), at(i, j + 1, 0), at(i + 1, j + 1, 0));
                    elements.push(vec![n00, n10, n11]);
                    elements.push(vec![n00, n11, n01]);
                }
            }
            ElementKind::Triangle
        }
        _ => {
            for k in 0..grid.divisions[2] {
                for j in 0..grid.divisions[1] {
                    for i in 0..grid.divisions[0] {
                        elements.push(vec![
                            at(i, j, k),
                            at(i + 1, j, k),
                            at(i + 1, j + 1, k),
                            at(i, j + 1, k),
                            at(i, j, k + 1),
                            at(i + 1, j, k + 1),
                            at(i + 1, j + 1, k + 1),
                            at(i, j + 1, k + 1),
                        ]);
                    }
                }
            }
            ElementKind::Hexahedron
        }
    };
    let materials = vec![Material::default(); elements.len()];
    MeshModel {
        dimension: dim,
        kind,
        nodes,
        elements,
        materials,
        dirichlet: BTreeMap::new(),
        grid: Some(grid.clone()),
    }
}
