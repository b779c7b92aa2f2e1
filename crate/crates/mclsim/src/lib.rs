//! Desk-scale simulator for the two-dimensional moving-contact-line
//! Navier–Stokes free-boundary problem.
//!
//! The pipeline runs equilibrium meniscus, flattening map, divergence-free
//! Galerkin basis, ε-regularized linear stepping with pressure recovery,
//! nonlinear fixed-point iteration, and energy–dissipation diagnostics.
//! Numerical kernels are generic over [`Real`]; the `f64` aliases below are
//! what the CLI uses.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod linear_solver;
pub mod nonlinear_driver;
pub mod poly;
pub mod scalar;
pub mod surface;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh = discretization::Mesh<f64>;
pub type Basis = discretization::Basis<f64>;
pub type GeometryCache = geometry::GeometryCache<f64>;
pub type SurfaceFunction = surface::SurfaceFunction<f64>;
pub type EquilibriumSurface = equilibrium::EquilibriumSurface<f64>;
pub type PhysicalParams = config::PhysicalParams<f64>;
pub type Trajectory = linear_solver::Trajectory<f64>;
pub type SimState = linear_solver::SimState<f64>;
pub type Workspace = nonlinear_driver::Workspace<f64>;
