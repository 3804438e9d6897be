//! Pseudo-spectral simulation and asymptotic analysis of target patterns in
//! the nonlocal eikonal equation
//!
//! ```text
//! phi_t = L * phi - |J * grad phi|^2 + eps g
//! ```
//!
//! on a periodic square, together with the radial oracles that predict the
//! pattern frequency and the diagnostics that measure it.

pub mod error;
pub mod analysis;
pub mod asymptotics;
pub mod config;
pub mod diagnostics;
pub mod forcing;
pub mod hierarchy;
pub mod integrator;
pub mod io;
pub mod kernels;
pub mod ode;
pub mod quadrature;
pub mod spectral;
pub mod special;

pub use error::{Error, Result};
pub use spectral::{gradient, ComplexField, Complex, Grid2D, ScalarField, SpectralField};
pub use config::{AnalysisConfig, Config, SimConfig};
pub use integrator::{run_simulation, RunOutput, SimState};
