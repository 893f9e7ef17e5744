//! Ready-made coupling scenarios.
//!
//! - [`two_patch_2d`]: rectangle clamped on its left side, two square
//!   patches refined four times with a soft circular inclusion each.
//! - [`cube_grid_3d`]: `n³` unit-cube patches tiling `[0,n]³`, each refined
//!   twice with a soft spherical inclusion; the `x = 0` face is clamped.
//! - [`imbalanced_grid`]: eight cube patches with random refinement and
//!   stiff inclusions.
//! - [`chain_1d`]: three-element bar with one refined patch.
//!
//! Inclusions are resolved per element: elements whose centroid lies inside
//! the ball get the contrasted material.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{Loading, Physics};
use crate::coupling_topology::{CouplingScenario, PatchDefinition};
use crate::error::{CouplingError, Result};
use crate::mesh::{build_grid_mesh, Material, MeshModel, Point, Region, StructuredGrid};

/// Default inclusion contrast: thermal inclusions are 10 times less
/// conductive, elastic ones 100 times softer.
pub fn default_contrast(physics: Physics) -> f64 {
    match physics {
        Physics::Thermal => 10.0,
        Physics::Elasticity => 100.0,
    }
}

/// Unit source, or unit body force along `−y` (`−x` in 1D).
pub fn default_loading(physics: Physics, dimension: usize) -> Loading {
    match physics {
        Physics::Thermal => Loading::source(1.0),
        Physics::Elasticity => {
            let mut f = [0.0; 3];
            f[dimension.min(2) - 1] = -1.0;
            Loading::body_force(f)
        }
    }
}

/// Ball-shaped material change inside a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub center: Point,
    pub radius: f64,
    /// Coefficient multiplier inside the ball.
    pub factor: f64,
}

fn clamp_predicate(dim: usize, tol: f64) -> impl Fn(&Point) -> bool {
    move |p: &Point| dim > 0 && p[0].abs() <= tol
}

fn clamped_global(grid: &StructuredGrid, material: Material) -> MeshModel {
    let mut m = build_grid_mesh(grid);
    m.set_uniform_material(material);
    m.fix_nodes_where(clamp_predicate(grid.dimension, 1e-9 * grid.min_spacing()));
    m
}

/// Fine model of `region`: the global cells it covers, each split
/// `refinement` times per direction.
pub fn fine_patch(
    global: &StructuredGrid,
    region: &Region,
    refinement: usize,
    material: Material,
    inclusion: Option<Inclusion>,
) -> Result<MeshModel> {
    if refinement == 0 {
        return Err(CouplingError::invalid("refinement must be at least 1"));
    }
    let dim = global.dimension;
    let size = region.size();
    let mut divisions = Vec::with_capacity(dim);
    for d in 0..dim {
        let cells = size[d] / global.spacing(d);
        let rounded = cells.round();
        if rounded < 1.0 || (cells - rounded).abs() > 1e-9 {
            return Err(CouplingError::Geometry(format!("patch region not aligned with global cells along axis {d}")));
        }
        divisions.push(rounded as usize * refinement);
    }
    let grid = StructuredGrid::new(dim, region.min, &size[..dim], &divisions)?;
    let mut m = build_grid_mesh(&grid);
    m.set_uniform_material(material);
    if let Some(inc) = inclusion {
        let soft = material.scaled(inc.factor);
        m.set_material_where(soft, |c| {
            (0..dim).map(|d| (c[d] - inc.center[d]).powi(2)).sum::<f64>() <= inc.radius * inc.radius
        });
    }
    m.fix_nodes_where(clamp_predicate(dim, 1e-9 * grid.min_spacing()));
    Ok(m)
}

fn center(region: &Region) -> Point {
    [0, 1, 2].map(|d| 0.5 * (region.min[d] + region.max[d]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPatchOptions {
    pub refinement: usize,
    /// Inclusion coefficient divisor; `None` uses [`default_contrast`].
    pub contrast: Option<f64>,
    pub inclusion_radius: f64,
    /// Fine models identical to the global restriction.
    pub fine_equals_global: bool,
}

impl Default for TwoPatchOptions {
    fn default() -> Self {
        TwoPatchOptions {
            refinement: 4,
            contrast: None,
            inclusion_radius: 0.3,
            fine_equals_global: false,
        }
    }
}

/// `[0,4]×[0,2]` on a 16×8 grid, patches `[1,2]×[0.5,1.5]` and
/// `[2.5,3.5]×[0.5,1.5]`.
pub fn two_patch_2d(physics: Physics) -> Result<CouplingScenario> {
    two_patch_2d_with(physics, TwoPatchOptions::default())
}

pub fn two_patch_2d_with(physics: Physics, opts: TwoPatchOptions) -> Result<CouplingScenario> {
    let grid = StructuredGrid::new(2, [0.0; 3], &[4.0, 2.0], &[16, 8])?;
    let material = Material::default();
    let global = clamped_global(&grid, material);
    let regions = [
        Region::new([1.0, 0.5, 0.0], [2.0, 1.5, 0.0]),
        Region::new([2.5, 0.5, 0.0], [3.5, 1.5, 0.0]),
    ];
    let contrast = opts.contrast.unwrap_or_else(|| default_contrast(physics));
    let mut patches = Vec::new();
    for (k, region) in regions.iter().enumerate() {
        let fine = if opts.fine_equals_global {
            fine_patch(&grid, region, 1, material, None)?
        } else {
            let inc = Inclusion {
                center: center(region),
                radius: opts.inclusion_radius,
                factor: 1.0 / contrast,
            };
            fine_patch(&grid, region, opts.refinement, material, Some(inc))?
        };
        patches.push(PatchDefinition {
            id: k + 1,
            region: *region,
            fine,
        });
    }
    CouplingScenario::build(physics, default_loading(physics, 2), global, patches)
}

/// Fine models equal to the global restriction: the coupling is exact from
/// the first iteration.
pub fn fine_equals_global(physics: Physics) -> Result<CouplingScenario> {
    two_patch_2d_with(
        physics,
        TwoPatchOptions {
            fine_equals_global: true,
            ..TwoPatchOptions::default()
        },
    )
}

/// `n³` unit-cube patches over `[0,n]³`, two global cells per unit length,
/// fine refinement 2, inclusion of radius 0.3 at each cube center.
pub fn cube_grid_3d(physics: Physics, n: usize, contrast: Option<f64>) -> Result<CouplingScenario> {
    if n == 0 {
        return Err(CouplingError::invalid("cube grid needs n >= 1"));
    }
    let contrast = contrast.unwrap_or_else(|| default_contrast(physics));
    cube_patches(physics, n, |_| 2, 1.0 / contrast)
}

/// Eight cube patches (`n = 2`) with a refinement drawn in `1..=4` per patch
/// and inclusions 1000 times stiffer.
pub fn imbalanced_grid(physics: Physics, seed: u64) -> Result<CouplingScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<usize> = (0..8).map(|_| rng.random_range(1..=4)).collect();
    cube_patches(physics, 2, |k| levels[k], 1000.0)
}

fn cube_patches(
    physics: Physics,
    n: usize,
    refinement: impl Fn(usize) -> usize,
    factor: f64,
) -> Result<CouplingScenario> {
    let ext = n as f64;
    let grid = StructuredGrid::new(3, [0.0; 3], &[ext, ext, ext], &[2 * n, 2 * n, 2 * n])?;
    let material = Material::default();
    let global = clamped_global(&grid, material);
    let mut patches = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let min = [i as f64, j as f64, k as f64];
                let region = Region::new(min, min.map(|x| x + 1.0));
                let index = patches.len();
                let inc = Inclusion {
                    center: center(&region),
                    radius: 0.3,
                    factor,
                };
                let fine = fine_patch(&grid, &region, refinement(index), material, Some(inc))?;
                patches.push(PatchDefinition {
                    id: index + 1,
                    region,
                    fine,
                });
            }
        }
    }
    CouplingScenario::build(physics, default_loading(physics, 3), global, patches)
}

/// Bar `[0,3]` with three unit elements clamped at `x = 0`; the middle
/// element is replaced by a patch refined twice with diffusivity `patch_factor`.
pub fn chain_1d(patch_factor: f64) -> Result<CouplingScenario> {
    let grid = StructuredGrid::new(1, [0.0; 3], &[3.0], &[3])?;
    let global = clamped_global(&grid, Material::default());
    let region = Region::new([1.0, 0.0, 0.0], [2.0, 0.0, 0.0]);
    let fine = fine_patch(&grid, &region, 2, Material::default().scaled(patch_factor), None)?;
    CouplingScenario::build(
        Physics::Thermal,
        Loading::source(1.0),
        global,
        vec![PatchDefinition { id: 1, region, fine }],
    )
}

/// Virtual solve costs proportional to system sizes: global free dofs and
/// fine free dofs of each patch.
pub fn dof_costs(scenario: &CouplingScenario) -> (f64, Vec<f64>) {
    let global = scenario.global_system.size() as f64;
    let patches = scenario
        .subdomains
        .iter()
        .filter(|s| s.kind == crate::coupling_topology::SubdomainKind::Patch)
        .map(|s| s.fine_dof_count() as f64)
        .collect();
    (global, patches)
}
