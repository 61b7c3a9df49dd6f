//! Reset-if-leaked exchange sequences for a three-dot qubit with two ancilla dots.
//!
//! The crate builds the five-spin representation basis, composes brickwork
//! exchange sequences in the J = 1/2 and J = 3/2 sectors, scores them against
//! the reset-if-leaked target, searches for solutions by basin hopping, and
//! propagates quasi-static or Markovian exchange noise into leakage and
//! fidelity metrics.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod exchange;
pub mod link;
pub mod linalg;
pub mod noise;
pub mod objective;
pub mod search;
pub mod sequence;
pub mod spin_basis;

pub use error::{Error, Result};
pub use exchange::{block_exchange, compose, isometry, BlockUnitary, ExchangeSequence, RilIsometry};
pub use link::{slot_link, Link, PLACEHOLDER_SLOT, SLOT_COUNT};
pub use objective::{f0_ril, f_total, GateConstraint, QaReversal, ResetState, RilSpec};
