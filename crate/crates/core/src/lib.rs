//! Quantum key recycling over a simulated qubit channel.
//!
//! The crate runs the prepare-and-measure recycling protocol end to end
//! (encryption, decryption, authenticated feedback, key update) and
//! evaluates the accompanying security bound, asymptotic rate and
//! key-expenditure arithmetic.
//!
//! Module map:
//!
//! * [`primitives`]: bit/basis strings, parameters, seeded randomness.
//! * [`hashing`]: pairwise-independent Toeplitz families and the polynomial MAC.
//! * [`ecc`]: the pluggable linear codes, including the bounded-distance oracle.
//! * [`qsim`]: symbolic qubit channels and a small density-matrix engine.
//! * [`protocol`]: Alice/Bob round logic, reservoir accounting and sessions.
//! * [`analysis`]: entropies, correction probability, rate and bound evaluation.

pub mod analysis;
pub mod ecc;
mod error;
pub mod hashing;
pub mod primitives;
pub mod protocol;
pub mod qsim;

pub use error::{Error, Result};
