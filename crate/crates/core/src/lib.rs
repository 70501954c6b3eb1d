//! FLAG: an accelerated Lagrangian-based method for linearly constrained convex problems.
//!
//! The crate is organized around a problem model ([`problem`]), proximal building blocks
//! ([`prox`]), nice primal maps with their certificates ([`maps`]), the outer loop
//! ([`flag`]), reference solutions and rate checks ([`rates`]) and seeded problem
//! generators ([`generate`]). [`io`] reads and writes the JSON and CSV artifacts.

pub mod cli;
pub mod error;
pub mod flag;
pub mod generate;
pub mod io;
pub mod lagrangian;
pub mod linalg;
pub mod maps;
pub mod problem;
pub mod prox;
pub mod random;
pub mod rates;

pub use error::{FlagError, Result};
