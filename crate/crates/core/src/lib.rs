//! Kinetic, mesoscopic and diffusion models for gas molecules moving in the potential
//! layer near a solid surface, with a harness that checks the asymptotic links between them.

pub mod cli_io;
pub mod diffusion_solvers;
pub mod equilibrium_collision;
pub mod hierarchy_harness;
pub mod error;
pub mod kinetic_solvers;
pub mod potential_geometry;
pub mod quadrature;
pub mod spline;

pub use error::{Error, Result};
