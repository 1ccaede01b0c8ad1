//! Fast Poisson solver for Neumann problems on unstructured triangular
//! meshes.
//!
//! The displacement field `D` is first found from `∇·D = ρ` by a direct
//! solve over a spanning tree of the patch-adjacency graph. The tree
//! solution carries a spurious divergence-free part, which is removed by
//! projecting onto the loop basis with CG or GMRES. The potential then
//! follows from `∇φ = -D/ε` through the transposed tree system. Both tree
//! solves are linear in the number of triangles.
//!
//! ```
//! use treepoisson::{mesh, oracle, pipeline, krylov::IterSettings};
//!
//! let square = mesh::generate_structured_square(8).unwrap();
//! let case = oracle::analytic_case();
//! let sol = pipeline::solve_poisson(&square, &case.spec, &IterSettings::default(),
//!                                   pipeline::SolverChoice::Cg).unwrap();
//! assert_eq!(sol.potential.len(), 128);
//! ```

pub mod assembly;
pub mod decomposition;
pub mod error;
pub mod krylov;
pub mod mesh;
pub mod oracle;
pub mod pipeline;
pub mod problem;
pub mod quadrature;
pub mod sparse;
pub mod treesolve;

pub use error::{Error, Result};
pub use mesh::{Point, TriMesh};
pub use pipeline::{solve_poisson, PipelineOptions, Solution, SolveReport, SolverChoice};
pub use problem::{Neumann, ProblemSpec, Reference, Source};
