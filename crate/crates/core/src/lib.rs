//! Two-qubit blockade gate between circular Rydberg states.
//!
//! The crate is layered bottom-up:
//!
//! * [`numerics`]: dense complex linear algebra, log-space products,
//!   Clebsch-Gordan coefficients, matrix exponential and RK4.
//! * [`atomic`]: hydrogenic circular-state matrix elements, frequencies,
//!   defects, lifetimes and localization.
//! * [`blockade`]: dipole-dipole couplings and the blockade shift.
//! * [`error_model`]: closed-form gate-error estimates.
//! * [`dynamics`]: two-atom master-equation evolution through the
//!   pi / 2pi / pi pulse sequence.
//! * [`tomography`]: simulated state and process tomography and the
//!   trace-overlap process error.

// Domain checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic;
pub mod blockade;
pub mod constants;
pub mod dynamics;
pub mod error_model;
pub mod error;
pub mod numerics;
mod optim;
pub mod tomography;

pub use error::{Error, Result};
