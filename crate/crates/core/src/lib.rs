//! Unbalanced optimal power flow for four-wire distribution networks.
//!
//! The crate builds quadratically-constrained programs in current-voltage
//! (IVR) or power-voltage (ACR) rectangular form from an explicit
//! multi-conductor network model, and solves them with a Newton power-flow
//! or a primal-dual interior-point method.

pub mod netmodel;
pub mod qcqp;
pub mod reduce;
pub mod form;
pub mod solve;
pub mod fixtures;
pub mod bench;
pub mod config;
