//! Axisymmetric Boussinesq flow with horizontal-only dissipation.
//!
//! The crate has two halves that check each other:
//!
//! * a meridian-plane (r, z) solver for the coupled vorticity/density system
//!   in Stokes streamfunction form ([`fields`], [`poisson`], [`solver`],
//!   [`diagnostics`]), and
//! * a periodic-box spectral toolkit ([`harmonic`], [`lp`]) that evaluates the
//!   singular-integral identities, Littlewood–Paley machinery, and anisotropic
//!   functional inequalities the solver's a-priori estimates rest on.
//!
//! [`oracle`] holds independent brute-force references (dense elimination,
//! high-resolution quadrature, direct convolution, manufactured solutions)
//! used to validate both halves.

pub mod diagnostics;
pub mod fft;
pub mod fields;
pub mod harmonic;
pub mod lp;
pub mod oracle;
pub mod poisson;
pub mod presets;
pub mod solver;
mod tridiag;

pub use fields::{MeridianGrid, Parity, ScalarField2D, VelocityField2D};
pub use solver::{SimState, StepConfig};
