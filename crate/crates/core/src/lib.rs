//! Hamilton-Jacobi reachability on Cartesian grids, and a sequential
//! trajectory planner for Dubins vehicles that stays safe against a single
//! intruder.

pub mod dynamics;
pub mod cli;
pub mod error;
pub mod export;
pub mod field;
pub mod grid;
pub mod hjvf;
pub mod persist;
pub mod reachops;
pub mod scenario;
pub mod schedule;
pub mod stp;
pub mod sdf;
pub mod sim;
pub mod solver;
pub mod timefield;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use grid::{make_grid, Grid};
