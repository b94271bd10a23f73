//! Quantum-trajectory simulation of a heterodyne quantum non-demolition (QND)
//! measurement of a collective atomic spin.
//!
//! Single photons are sent through a frequency-space interferometer whose
//! probe arm acquires a phase proportional to the population difference `J_z`.
//! Each detected photon yields a beatnote phase and conditionally reweights the
//! Dicke amplitudes of the atomic state, so that a coherent spin state is
//! progressively squeezed and finally collapses onto a Dicke state.
//!
//! Modules:
//! - [`spin_state`]: collective state in the `J_z` eigenbasis and its moments.
//! - [`measurement`]: phase distribution, sampling, and the per-photon update.
//! - [`analytics`]: weak-coupling theory used to validate the simulator.
//! - [`decoherence`]: spontaneous-emission squeezing budget for real atoms.
//! - [`ensemble`]: parallel, reproducible Monte-Carlo over many trajectories.
//! - [`verify`]: cross-module consistency checks with pass/fail reporting.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod decoherence;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod measurement;
pub mod spin_state;
pub mod stats;
pub mod verify;

pub use diagnostics::{Checked, Warning};
pub use error::{Error, Result};
pub use measurement::{DetectionEvent, InterferometerParams};
pub use spin_state::{CollectiveState, SpinMoments};
