//! Linearized stability of the three-dimensional catenoid under the
//! hyperbolic vanishing-mean-curvature flow, reduced to spherical-harmonic
//! sectors on a symmetric radial grid.
//!
//! Conventions used throughout:
//! * a field in sector (ℓ, m) is the coefficient of an orthonormal real
//!   spherical harmonic;
//! * the radial measure is w(ρ) dρ with w = ⟨ρ⟩³/√(1+⟨ρ⟩²);
//! * grids with equal spacing share their nodes exactly.

pub mod darboux;
pub mod dd;
pub mod evolution;
pub mod field;
pub mod flat_oracle;
pub mod geometry;
pub mod modulation;
pub mod operators;
pub mod quadrature;
pub mod shooting;
pub mod tridiag;

pub use field::{ModeField, Sector};
pub use geometry::RadialGrid;
