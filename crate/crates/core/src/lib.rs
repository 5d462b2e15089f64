//! Multistate insurance valuation by the matrix method.
//!
//! A contract is described by a multiple state model whose lump sums have been
//! moved onto reflex plus-states, a sequence of transition matrices built from
//! increment-decrement life tables, a cash-flow matrix and a discount vector.
//! Expected present values, annuities and period premiums are then plain
//! contractions of the distribution matrix, and [`oracle`] recomputes them by
//! path enumeration and seeded simulation.

pub mod cashflow;
pub mod demo;
pub mod error;
pub mod fixtures;
pub mod lifetable;
pub mod model;
pub mod oracle;
pub mod valuation;

pub use error::{Error, Result};
pub use model::StateId;
