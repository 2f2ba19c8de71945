//! Optimal transport with optimal-control costs.
//!
//! The crate evaluates sub-Riemannian (and Riemannian) squared distances by
//! Hamiltonian geodesic shooting, solves discrete Kantorovich problems exactly,
//! and synthesizes Monge maps as the time-one projection of the Hamiltonian
//! flow started at the covector `-df` of a Kantorovich potential.
//!
//! Conventions used throughout:
//!
//! * built-in systems are control-affine `x' = sum_i u_i X_i(x)` with
//!   Lagrangian `L = 1/2 |u|^2`, so `H(x, p) = 1/2 sum_i (p . X_i(x))^2`;
//! * the transport cost is the squared distance `c = d^2 = 2 * (minimal energy)`;
//! * potentials fed to the Hamiltonian flow are expressed in the energy
//!   convention, i.e. half of the `d^2` Kantorovich potential.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod io;
pub mod monge;
pub mod ot;
pub mod shooting;

pub use error::{Error, Result};
pub use geometry::{make_system, BuiltinSystem, ControlSystem, SystemKind};
pub use hamiltonian::{ham_flow, PhasePoint, Trajectory};
pub use ot::{DiscreteMeasure, DualPotentials, TransportPlan};
pub use shooting::{connect, GeodesicSolution, ShootingOptions};
