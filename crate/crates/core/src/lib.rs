//! Divergence-free reconstruction finite element schemes for the
//! incompressible Navier-Stokes equations in two dimensions.

pub mod basis;
pub mod benchmarks;
pub mod error;
pub mod forms;
pub mod mesh;
pub mod problems;
pub mod diagnostics;
pub mod dofspace;
pub mod quadrature;
pub mod reconstruct;
pub mod solver;
pub mod sparse;
pub mod timeloop;

pub use basis::{RtOrder, VelocityElementKind};
pub use benchmarks::{BenchmarkConfig, ProblemKind};
pub use diagnostics::{ConservedQuantities, DiagnosticsRecord, ErrorNorms};
pub use dofspace::{BoundaryMode, Spaces};
pub use error::{Error, Result};
pub use forms::{ConvectionForm, FormAssembler};
pub use mesh::{CellGeometry, Mesh, Point, Rect};
pub use problems::ExactSolution;
pub use reconstruct::ReconstructionOperators;
pub use solver::{NonlinearMethod, NonlinearSettings, SaddleSolver};
pub use sparse::SparseMatrix;
pub use timeloop::{InitialCondition, Simulation, SimulationState, TimeConfig, TimeScheme};
