//! Pseudo-spectral simulator and estimate-verification suite for a 2D
//! magnetoviscoelastic fluid on the periodic torus [0, 2pi)^2.
//!
//! The state couples an incompressible velocity `u`, a deformation-gradient
//! field `F` with row-wise divergence-free columns, and a unit-length
//! magnetization `M` driven by Landau-Lifshitz-Gilbert dynamics. Alongside
//! the time stepper, the crate ships verifiers for the energy balance,
//! local-energy/singularity criteria, dyadic (Littlewood-Paley) estimates,
//! and an Osgood-type two-run stability bound.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lp;
pub mod model;
pub mod presets;
pub mod spectral;
pub mod twin;

pub use error::{MvError, Result};
