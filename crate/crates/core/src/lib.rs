//! Simulation and inference toolkit for dispersive readout of transmon qudits.
//!
//! The crate is organised along the readout chain:
//!
//! * [`spectrum`]: charge-basis transmon levels, transition frequencies and
//!   charge dispersion.
//! * [`dispersive`]: second-order dispersive shifts, dressed frequencies and
//!   the two-photon drive factor used for state preparation.
//! * [`readout`]: steady-state resonator amplitudes in the drive frame and in a
//!   fixed modulation frame, pair distances, and a mean-field ODE integrator.
//! * [`assignment`]: Gaussian phase-space clouds, classifiers and assignment
//!   matrices (Monte Carlo and closed form via Owen's T).
//! * [`inference`]: Dirichlet-type posteriors over qudit populations,
//!   mitigation and posterior standard deviations.
//! * [`strategies`]: single- versus multi-frequency readout comparison.
//!
//! All frequencies are angular frequencies in rad/s unless a name says
//! otherwise. Phase-space amplitudes are dimensionless.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assignment;
pub mod dispersive;
mod error;
pub mod inference;
pub mod presets;
pub mod readout;
pub mod special;
pub mod spectrum;
pub mod strategies;
pub mod units;

pub use error::{Error, Result};
