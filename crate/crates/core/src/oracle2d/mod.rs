//! Independent eigenvalue oracles for the full two-dimensional operator.
pub mod current;
pub mod fem;
pub mod radial;
pub use current::{persistent_current, CurrentReport, CurrentRow};
pub use fem::{gauge_shifted_solve, general_solve, GeneralSolution, Mesh, MeshControl};
pub use radial::{radial_solve, RadialProblem, RadialSolution};
