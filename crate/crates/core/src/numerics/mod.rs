//! Shared numerical building blocks: trigonometric interpolation, quadrature,
//! an adaptive Runge–Kutta integrator, bracketing root finders and banded
//! Hermitian factorizations.

pub mod banded;
pub mod fourier;
pub mod ode;
pub mod quadrature;
pub mod roots;

pub use fourier::TrigSeries;
