//! Simulation of the shear-thinning thin-film equation
//!
//! ```text
//! u_t + a (u^3 [1 + |b u u_xxx|^(alpha-1)] u_xxx)_x = 0,   x in (-l, l)
//! u_x = u_xxx = 0                                           at x = +-l
//! ```
//!
//! for films of an Ellis fluid. The crate provides the rheology, a
//! conservative semi-implicit finite difference solver, energy and
//! blow-up diagnostics, a manufactured-solution convergence harness and the
//! configuration and output layer behind the `thinfilm` binary.

pub mod banded;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod mms;
pub mod operators;
pub mod rheology;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{FilmState, Grid1D};
pub use rheology::FluidParams;
pub use stepper::{run, RunReport, SolverConfig, Termination};
