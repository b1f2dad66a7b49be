//! Numerical laboratory for the Timoshenko beam whose shear and bending
//! stiffness vanish at `x = 0`.
//!
//! The crate covers the whole chain: admissible degenerate coefficients,
//! the closed-form Poincaré/observability/decay constants, a graded-mesh
//! finite-element discretization, an energy-exact implicit-midpoint
//! integrator, numerical checks of the multiplier identities and
//! observability inequalities, and HUM synthesis of null controls.

pub mod analysis;
pub mod banded;
pub mod coefficients;
pub mod constants;
pub mod discretization;
pub mod dynamics;
mod error;
pub mod hum;
pub mod initial;
pub mod model;
pub mod quadrature;

pub use coefficients::{Coefficient, DegeneracyKind, DegeneracyProfile, ProfileFamily};
pub use constants::ConstantsReport;
pub use discretization::{Discretization, Mesh};
pub use dynamics::{ControlSignal, State, Trajectory};
pub use error::{Error, Result};
pub use model::{BeamModel, BoundaryCondition, Feedback};
