//! Quasi-Lagrangian moving Voronoi solver for single- and two-phase flows.
//!
//! Seeds of a bounded Voronoi tessellation act as material points. Each step
//! rebuilds the mesh from scratch, applies a viscous substep and a
//! semi-implicit pressure substep, and repairs degraded meshes with a
//! color-weighted Lloyd iteration followed by a conservative remap.

// NaN-rejecting `!(x > 0.0)` checks and index loops over parallel arrays
// are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bench;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod remap;
pub mod sim;
pub mod state;
pub mod stepper;
pub mod voronoi;

pub use error::{Error, Result};
pub use geometry::{BoundaryKind, DomainPolygon, EdgeCondition, Mat2, Vec2};
pub use voronoi::{build_mesh, cell_quality, weighted_centroid, Mesh, QualityReport};
pub use operators::GhostPolicy;
pub use remap::{needs_remap, RemapReport};
pub use state::{Eos, Fluid, FlowState, Material};
pub use sim::{Simulation, StepRecord};
pub use bench::{build_scenario, Scenario};
pub use stepper::{DtPolicy, StepControls, StepStats, ViscousMode};
