//! Free-boundary ideal MHD in axisymmetric Lagrangian coordinates.

pub mod diagnostics;
pub mod dynamics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod initial_data;
pub mod io;
pub mod kinematics;
pub mod mollifier;
pub mod runner;
pub mod vacuum;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{BoundaryFunction, Grid, Parity, ScalarField, SplitField};
