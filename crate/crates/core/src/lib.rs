//! Finite-difference simulator for incompressible two-phase flow with a
//! diffuse interface, temperature-dependent surface tension and
//! Boussinesq buoyancy, together with the tooling that checks its energy
//! structure, bounds and long-time behaviour.

pub mod driver;
pub mod energy;
pub mod equilibrium;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod monitors;
pub mod scalar;
pub mod state;

pub use grid::{Boundary, CellField, FaceField, Grid, MacVelocity};
pub use model::PhysicalParams;
pub use state::State;
