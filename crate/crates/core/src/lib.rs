//! Reconstruction of a scalar conductivity from interior measurements of the
//! potential.
//!
//! With `gamma = sqrt(sigma)`, the conductivity equation `div(sigma grad u) = 0`
//! becomes the steady transport equation
//! `2 grad(gamma) . grad(u) + gamma lap(u) = 0`. Given measured `U ~ u`, the
//! crate solves the regularized problem
//! `beta . grad(gamma) + (lap(U)/2 + eps) gamma = 0` with `beta = grad U` by an
//! upwind discontinuous Galerkin method, imposing `gamma` weakly on the inflow
//! boundary, and reports `sigma_h = gamma_h^2`.

pub mod basis;
pub mod data;
pub mod error;
pub mod field;
pub mod forward;
pub mod harness;
pub mod mesh;
pub mod quadrature;
pub mod sparse;
pub mod transport;

pub use data::{add_noise, derive_fields, project_to_dg, VelocityField};
pub use error::{Error, Result, Stage};
pub use field::DGField;
pub use forward::{manufactured_case, solve_elliptic, ManufacturedCase};
pub use harness::{reconstruct, ReconstructionReport, RunConfig};
pub use mesh::{build_structured_mesh, classify_boundary, BoundaryClassification, EdgeFlow, Mesh};
pub use sparse::{CsrMatrix, SolverKind, SolverOptions};
pub use transport::{apply_bilinear, assemble, SparseSystem, TransportProblem};
