//! Numerical laboratory for Cucker-Smale alignment dynamics with singular
//! communication weights: particle systems, atomic kinetic measures and 1D
//! hydrodynamic solvers.

pub mod diagnostics;
pub mod hydro_line;
pub mod hydro_torus;
pub mod error;
pub mod kernels;
pub mod meanfield;
pub mod ode;
pub mod particles;

pub use error::{DiagnosticsError, KernelError, LineError, MeanFieldError, ParticleError, TorusError};
