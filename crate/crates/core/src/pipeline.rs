//! Shape operators, normalization, the Neumann solve and the transport state
//! chained together for one mesh and density.

use thiserror::Error;

use crate::harness::Tolerances;
use crate::mesh::Mesh;
use crate::pde::{normalize_and_solve, NeumannSolution, PdeError, SolverConfig};
use crate::shape::ShapeData;
use crate::transport::{build_transport_state, TransportError, TransportState, TRANSPORT_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone)]
pub struct AbpRun {
    /// The input mesh embedded in R⁴.
    pub mesh: Mesh,
    pub shape: ShapeData,
    pub solution: NeumannSolution,
    pub state: TransportState,
}

impl AbpRun {
    pub fn new(mesh: &Mesh, f: &[f64], solver: &SolverConfig, tolerances: &Tolerances) -> Result<Self, PipelineError> {
        let mesh = if mesh.ambient_dim() == TRANSPORT_DIM {
            mesh.clone()
        } else {
            mesh.promoted()
        };
        let shape = ShapeData::compute(&mesh);
        let solution = normalize_and_solve(&mesh, f, &shape, solver)?;
        let state = build_transport_state(&mesh, &solution.density, &solution, &shape, tolerances)?;
        Ok(Self {
            mesh,
            shape,
            solution,
            state,
        })
    }
}
