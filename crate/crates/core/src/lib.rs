//! Plane-strain finite-element simulation of coupled stress and diffusion in
//! elastoplastic solids.
//!
//! The displacement and concentration fields are discretised with linear
//! triangles and advanced with backward Euler. Concentration changes cause a
//! dilatational chemical strain; in two-way mode the hydrostatic-stress
//! gradient also drives species flux.

pub mod assembly;
pub mod constitutive;
pub mod mesh;
pub mod oracles;
pub mod output;
pub mod scenario;
pub mod solver;
pub mod sparse;

pub use assembly::{
    Assembler, AssemblyError, BoundaryConditions, Coupling, DirichletBc, DofMap, Field, FieldState, FluxBc, Schedule,
    Target, TractionBc,
};
pub use constitutive::{ConstitutiveError, Hardening, MaterialParams, MaterialState, SymTensor2D};
pub use mesh::{BoundaryTag, Geometry, Mesh, MeshError};
pub use oracles::{AnalyticParams, NondimScales, OracleError};
pub use scenario::{load_config, ConfigError, GeometryConfig, ScenarioConfig, ScenarioKind};
pub use solver::{Probe, ProbeSample, Scenario, Simulation, SolverConfig, SolverError, TimeHistory};
pub use sparse::{LinalgError, Ordering, SparseMatrix};

use thiserror::Error;

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
