//! Fourier-basis ergodic trajectory optimization and a linear
//! information-decay collection model.
//!
//! The crate is organized bottom-up:
//!
//! - [`spectral`]: cosine basis on a box, decomposition of gridded densities
//!   and point sets into coefficients, band-limited reconstruction.
//! - [`ergodicity`]: the weighted ergodic metric, combination of partial
//!   trajectory coefficients, the residual density left after a partial
//!   trajectory and detection of oversampled cells.
//! - [`trajectory`]: single-integrator trajectories and control effort.
//! - [`infosim`]: Gaussian-mixture information densities, grid
//!   discretization and the linear collection simulator.
//! - [`planner`]: descent-based ergodic trajectory optimization, the greedy
//!   information-optimal baseline and composite planning.
//! - [`scenarios`]: closed-form two-state and two-post examples.
//! - [`io`]: plain-text grid files and CSV formats.

pub mod ergodicity;
pub mod error;
pub mod infosim;
pub mod io;
pub mod planner;
pub mod scenarios;
pub mod spectral;
pub mod trajectory;

mod tensor;

pub use error::{Error, Result};
