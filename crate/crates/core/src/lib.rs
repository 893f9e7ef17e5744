//! Non-intrusive Global/Local coupling for linear elliptic problems.
//!
//! A coarse global model is corrected on zones of interest by fine patch
//! models. The interface load `p_Γ` applied to the global model is driven to
//! the value balancing the nodal reactions of all subdomains, using
//!
//! - synchronous Richardson iterations with fixed or Aitken relaxation
//!   ([`solvers`]),
//! - asynchronous bounded-delay iterations, either simulated on a virtual
//!   clock or executed by concurrent ranks exchanging data through one-sided
//!   windows ([`async_engine`]),
//!
//! and certifies admissible relaxation parameters from the spectrum of the
//! history-space companion matrix ([`spectral`]).

pub mod assembly;
pub mod async_engine;
pub mod condensation;
pub mod coupling_topology;
pub mod error;
pub mod mesh;
pub mod model_problems;
pub mod solvers;
pub mod spectral;

pub use assembly::{assemble, assemble_elasticity, assemble_poisson, AssembledSystem, DofMap, Loading, Physics};
pub use async_engine::{
    partition_by_delay, run_async_concurrent, run_async_simulated, run_sync_concurrent, AsyncTrace, ConcurrentOptions,
    DelaySchedule, DelayTable, ScheduleKind, WindowCell,
};
pub use condensation::{condense, CondensedOperator};
pub use coupling_topology::{
    assemble_global_schur, build_assembly_operators, build_transfer, hat_fine_operator, hat_rhs, AssemblyOperator,
    CouplingScenario, PatchDefinition, PatchPair, Subdomain, SubdomainKind, TransferOperator,
};
pub use error::{CouplingError, Result};
pub use mesh::{build_grid_mesh, build_structured_mesh, ElementKind, Material, MeshModel, Point, Region, StructuredGrid};
pub use solvers::{
    aitken_update, compute_residual, global_solve, monolithic_reference, richardson_sync, IterationRecord,
    ReferenceSolution, Relaxation, SolveReport, StoppingCriteria,
};
pub use spectral::{
    build_companion, certify_paracontraction, generalized_alphas, relaxation_bounds, spectral_radius,
    CertificateReport, CompanionSystem, SpectralBounds,
};
