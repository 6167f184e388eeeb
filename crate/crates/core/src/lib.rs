//! Hermitian dilation of non-Hermitian (PT-symmetric) Hamiltonians.
//!
//! A non-Hermitian generator `H_s(t)` is embedded into a Hermitian
//! `H_sa(t)` acting on system ⊗ ancilla; post-selecting the ancilla on
//! `|−⟩` reproduces the non-unitary system evolution. Around that engine the
//! crate provides the two-level PT-symmetric model with its closed-form
//! solution, two-qubit Pauli bookkeeping, an NV-center pulse synthesizer,
//! a photoluminescence readout model and a one-parameter curve fitter.

pub mod dilation;
pub mod error;
pub mod fitkit;
pub mod io;
pub mod numkit;
pub mod pauli;
pub mod ptmodel;
pub mod pulse;
pub mod readout;
pub mod simulator;

pub use error::{Error, Result};

/// Library version, recorded in output metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use numkit::{ComplexMatrix, OperatorSeries, TimeGrid, C64};
