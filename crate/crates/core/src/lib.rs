//! Hybrid quantum tensor-network learning for aeroelastic flutter data.
//!
//! The crate is organised bottom-up:
//!
//! - [`aero`]: typical-section aeroelastic model, stability labels, time
//!   responses and parameter-sweep datasets.
//! - [`tensor`]: named-index dense tensors with a reverse-mode tape.
//! - [`encoding`]: time series → 6-site MPS → trainable MPO → normalised
//!   8-qubit MPS.
//! - [`mpd`]: matrix product disentangler compilation of an MPS into layers
//!   of two-qubit gates.
//! - [`qsim`]: statevector simulation of the tensor-network inspired
//!   variational circuit and its readouts.
//! - [`train`]: losses, metrics, Adam, cross validation, the training loop
//!   and random hyperparameter search.

pub mod aero;
pub mod encoding;
pub mod error;
pub mod exec;
pub mod mpd;
pub mod qsim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
