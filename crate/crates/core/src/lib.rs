//! Estimation of an unknown pure qubit state from long sequences of unsharp
//! (Gaussian) polarization measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`qubit`]: Bloch-vector states, general 2x2 operators in the Pauli basis,
//!   and uniform sampling of pure states and measurement axes.
//! - [`povm`]: the Gaussian unsharp-measurement effects, outcome sampling,
//!   the conditional (posterior) state update and single-shot estimates.
//! - [`sequential`]: n-step measurement sequences, the Kraus chain that carries
//!   the sequence POVM element, and the fidelity estimators built on it.
//! - [`continuous`]: the continuum limit, i.e. the conditional master equation
//!   in Itô form, the measurement record and the drift-only closed forms.
//! - [`ensemble`]: deterministic, parallel Monte Carlo fan-out and summaries.
//!
//! Every random operation takes an explicit random stream. Ensemble results are a
//! pure function of the master seed and trial index, see [`ensemble::derive_stream`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod continuous;
pub mod ensemble;
mod error;
pub mod povm;
pub mod qubit;
pub mod sequential;

pub use error::{Error, Result};
