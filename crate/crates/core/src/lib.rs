//! Multi-phase heat conduction in balls and shells.
//!
//! The crate solves the heat equation `u_t = div(sigma grad u)` with a
//! piecewise constant conductivity (core, shell, surrounding medium) for two
//! problems: heating of a domain through its boundary (`u = 1` on the
//! boundary, `u = 0` initially) and whole-space diffusion from the indicator
//! of the exterior. On top of the solvers it provides the functionals used to
//! detect stationary isothermic surfaces: heat content of balls and its
//! small-time limit, the Varadhan distance limit, balance laws, barrier
//! sandwiches, the auxiliary elliptic functions obtained by time integration,
//! and a discriminator that decides whether a scene behaves like a pair of
//! concentric balls.

pub mod analysis;
pub mod barriers;
pub mod elliptic;
mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod numerics;
pub mod radial;

pub use error::{Error, Result};
pub use geometry::{Ball, Conductivities, DomainSpec, OuterKind, SceneConfig};
pub use radial::{ProblemKind, RadialGrid, RadialSolution, SolverParams};
