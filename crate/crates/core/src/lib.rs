//! Numerical spectral toolkit for the two-dimensional magnetic Schrödinger
//! operator `(-i∇ - A)² - β δ(· - Γ)` with an Aharonov–Bohm flux line at the
//! origin, a homogeneous field `B`, and a strong attractive δ-interaction
//! supported on a smooth closed loop `Γ`.
//!
//! The crate is organised around the constructive steps that lead to the
//! strong-coupling expansion `λ_n(β) = -β²/4 + μ_n + O(β⁻¹ ln β)`:
//!
//! * [`geometry`]: arc-length loops, signed curvature, tubular coordinates.
//! * [`coefficients`]: the curvilinear coefficient fields and their sup-norms.
//! * [`spectral1d`]: the periodic comparison operator on the loop and its
//!   bracketing variants.
//! * [`transverse`]: the δ-well across the strip with Dirichlet or Robin ends.
//! * [`bracketing`]: tensor-sum assembly and two-sided eigenvalue enclosures.
//! * [`oracle2d`]: independent 2D eigenvalue solvers (radial shooting for
//!   concentric circles, magnetic finite elements for star-shaped loops).
//! * [`experiments`]: named, configuration-driven experiment runs.

pub mod bracketing;
pub mod coefficients;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod numerics;
pub mod oracle2d;
pub mod spectral1d;
pub mod transverse;

pub use error::{Error, Result};
