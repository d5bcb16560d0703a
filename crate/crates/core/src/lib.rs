//! Numerics for g-measures on finite-alphabet one-sided shift spaces.
//!
//! A g-function is the transition kernel of a chain with complete
//! connections: given the whole past, `g` gives the law of the next symbol,
//! which is prepended to the sequence. This crate provides
//!
//! - [`symbolic`]: alphabets, words, g-function families and their variations,
//! - [`measures`]: cylinder measures, block marginals and the adjoint transfer
//!   operator,
//! - [`metrics`]: total variation, Hellinger integrals, maximal couplings and an
//!   exact ultrametric Wasserstein distance,
//! - [`blockvar`]: block structures, the `delta_bar` ceiling, Hellinger and
//!   coupling block variations and the uniqueness-condition checkers,
//! - [`renewal`]: the dominating integer chain and its renewal equation,
//! - [`coupling`]: block-coupled simulation of two g-chains,
//! - [`cli`]: the configuration schema and command dispatch behind the
//!   `gmeasure` binary.
//!
//! Word convention: index 0 of a [`Word`] is the most recent coordinate.

pub mod blockvar;
pub mod cli;
pub mod coupling;
mod error;
pub mod measures;
pub mod metrics;
pub mod renewal;
pub mod symbolic;

pub use error::{Error, Result};
pub use symbolic::{Alphabet, GFunction, Word};
