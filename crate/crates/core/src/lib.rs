//! Simulation core for the simplified Ericksen-Leslie system in two space
//! dimensions: incompressible Navier-Stokes coupled to a director field
//! relaxing under a Ginzburg-Landau potential.
//!
//! Layout: [`grid`] holds the staggered grid functions and stencils,
//! [`material`] the potential and elastic coupling, [`flow`] and [`director`]
//! the two substeps, [`simulator`] the coupled loop with its diagnostics and
//! [`equilibrium`] the steady-state solver and decay-rate analysis.

pub mod director;
pub mod equilibrium;
pub mod flow;
pub mod grid;
pub mod linsolve;
pub mod material;
pub mod simulator;
