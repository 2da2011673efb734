//! A spectral laboratory for the three-parameter Boussinesq/Full-dispersion
//! (B/FD) systems describing internal waves at the interface of two fluid
//! layers.
//!
//! The crate covers the full numerical pipeline:
//!
//! - [`model`]: the (α₁, α₂, β) parameterization of the dispersion
//!   coefficients (a, b, c, d), the reduced one-parameter experimental
//!   family, and the sixteen-row sign classification.
//! - [`spectral`]: periodic collocation grids, FFT plans, the nonlocal
//!   coth-type symbols, diagonal operator application, reflection, and
//!   spectral translation.
//! - [`theory`]: speed limits for solitary waves (the classical window and
//!   the sharp threshold c_γ = √(inf R_γ)), the density-ratio cubic, symbol
//!   matrix eigenvalues, and the linearized dispersion relation.
//! - [`solitary`]: profile computation by the Petviashvili iteration with
//!   minimal-polynomial-extrapolation acceleration.
//! - [`integrator`]: fourth-order symplectic composition time stepping of
//!   the semidiscrete system plus the discrete energy and momentum.
//! - [`harness`]: perturbation, collision, resolution, and convergence
//!   experiments with peak tracking and structured outputs.
//! - [`output`]: deterministic CSV/JSON writers (floats at 17 significant
//!   digits).

pub mod error;
pub mod harness;
pub mod integrator;
pub mod model;
pub mod output;
pub mod solitary;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use model::{classify_signs, AbcdSystem, ModelingParameters, SystemClass};
pub use solitary::{solve_profile, ProfileSolveConfig, SolitaryWave};
pub use spectral::{Collocation, PeriodicGrid, WaveState};
pub use theory::SpeedLimitReport;
