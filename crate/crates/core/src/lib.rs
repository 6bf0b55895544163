//! Numerical laboratory for the sharp Sobolev inequality on submanifolds of
//! Euclidean space.
//!
//! Surfaces are triangle meshes immersed in R³ or R⁴. The crate evaluates both
//! sides of
//!
//! ```text
//! ∫ √(|∇f|² + f²|H|²) + ∫_∂ f  ≥  n ((n+m)|B^{n+m}| / (m|B^m|))^{1/n} (∫ f^{n/(n-1)})^{(n-1)/n}
//! ```
//!
//! and discretizes the Alexandrov–Bakelman–Pucci style argument behind it:
//! a weighted Neumann problem ([`pde`]), the normal-bundle map
//! `Φ(x, y) = ∇u(x) + y` with its Jacobian and ball coverage ([`transport`]),
//! and the rigidity diagnostics of the equality case ([`harness`]).
//!
//! Data-parallel loops (per-vertex fits, Monte Carlo sampling, stiffness
//! assembly) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iterators otherwise. Results are independent of the thread
//! count.

pub mod convergence;
pub mod exec;
pub mod fields;
pub mod fit;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod pde;
pub mod pipeline;
pub mod quadrature;
pub mod shape;
pub mod sparse;
pub mod transport;

pub use geometry::{AnalyticReference, AnalyticSurface};
pub use harness::{EqualityDiagnostics, InequalityReport, Tolerances};
pub use mesh::{BoundaryLoop, Mesh, MeshError};
pub use pde::{NeumannSolution, PdeError, SolverConfig};
pub use pipeline::AbpRun;
pub use shape::ShapeData;
pub use transport::{CoverageReport, TransportState};

/// Points and vectors of the ambient space. Meshes in R³ leave the last
/// coordinate at zero.
pub type Point = nalgebra::Vector4<f64>;

/// Intrinsic dimension of every discretized surface.
pub const SURFACE_DIM: usize = 2;
