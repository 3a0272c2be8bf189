//! Lie-Schwinger block diagonalization of quantum chains with a gapped on-site
//! Hamiltonian and nearest-neighbor interactions, together with the analytic
//! bound ledger and a certifier that checks the flow against exact
//! diagonalization.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod config;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod ledger;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod report;

pub use error::{Error, Result};
