//! Rating prediction with implicit social trust.
//!
//! The crate parses rating/trust files ([`dataset`]), extracts an implicit
//! trust graph from rating behavior ([`trust`]), trains baseline and
//! trust-regularized latent-factor predictors ([`models`]) and evaluates
//! them under k-fold cross-validation ([`eval`]).

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod models;
pub mod trust;

pub use error::{Error, Result};
