//! Numerical laboratory for right-invariant Tonelli Lagrangian dynamics on
//! Lie groups and a Fourier-truncated diffeomorphism group of the circle.
//!
//! The library integrates reduced Euler–Poincaré and electromagnetic
//! EPDiff flows, finds two-point connecting trajectories by direct
//! minimization of the free-period action, and estimates the Mañé critical
//! values with their ordering chain, on three concrete instances:
//!
//! * `U1` — the circle group, angles under addition;
//! * `So3` — rotations as unit quaternions;
//! * `DiffS1` — orientation-preserving circle maps truncated to a finite
//!   Fourier band, stored as periodic displacement fields.
//!
//! See the crate `examples/` directory for one runnable program per major
//! capability, and the `tonelli-flows` binary for the scenario-driven
//! frontend.

pub mod cli;
pub mod flow;
pub mod group;
pub mod lagrangian;
pub mod mane;
pub mod metric;
pub mod spectral;
pub mod variational;

pub use group::{AlgebraVector, GroupElement, Quat, Variant};
pub use lagrangian::LagrangianSpec;
pub use metric::{InertiaOperator, MomentumVector};
