pub mod classifier;
pub mod cli;
pub mod error;
pub mod fbp_solver;
pub mod kinetics;
pub mod phase_plane;
pub mod threshold;
pub mod verify;
pub mod wave_catalog;

pub use error::{Error, Result};
