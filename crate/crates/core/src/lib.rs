//! P1 finite elements for Neumann boundary control of a mixed elliptic
//! problem on the unit square, with a Dirichlet family and a Robin-penalty
//! family of discrete problems.

pub mod assembly;
pub mod error;
pub mod field;
pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod optctl;
pub mod pde;
pub mod space;

pub use error::{Error, Result};
pub use field::{NodalField, TraceField};
pub use linsolve::{estimate_constants, DiscreteConstants};
pub use mesh::{BoundaryTag, Mesh, MeshConfig, Side};
pub use optctl::{
    cost, fixed_point_map, gradient, solve_optimal_fixed_point, solve_optimal_reduced,
    FixedPointOptions, OptimalSolution, ReducedSystem,
};
pub use pde::{solve_adjoint, solve_state, ProblemSpec};
pub use space::{FeSpace, NormKind};
