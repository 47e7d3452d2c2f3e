//! Linear bulk-surface finite elements and linearly implicit BDF time stepping
//! for the Cahn-Hilliard equation with Cahn-Hilliard-type dynamic boundary
//! conditions.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: quasi-uniform triangulations of the unit disk and unit square.
//! - [`sparse`] and [`linsolve`]: CSR storage, the per-step block system and its solvers.
//! - [`fem`]: bulk and surface P1 mass/stiffness matrices, norms, energy, Ritz projection.
//! - [`model`]: potentials, problem parameters, manufactured solution, initial data.
//! - [`bdf`]: BDF coefficients, extrapolation, starting values and the time loop.
//! - [`harness`]: convergence studies, simulations and their CSV/VTK output.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bdf;
pub mod error;
pub mod fem;
pub mod harness;
pub mod linsolve;
pub mod mesh;
pub mod model;
pub mod sparse;

pub use error::{Error, Result};
