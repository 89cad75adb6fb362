//! Bootstrapped sampling of products of random matrices.
//!
//! Draw a finite pool of random matrices, form many products by sampling
//! sequences from the pool, and average. Reusing matrices correlates the
//! products; this crate quantifies those correlations exactly through the
//! cycle structure of a derived permutation and checks them by simulation.

pub mod bootstrap;
pub mod delta;
pub mod ensembles;
pub mod enumeration;
pub mod error;
pub mod estimator;
pub mod io;
pub mod permutations;
pub mod verify;

pub use error::{Error, Result};
