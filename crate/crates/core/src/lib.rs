//! Structure of finite abelian groups given as black boxes.
//!
//! A group is accessed only through an oracle ([`oracle::GroupOracle`]) that
//! multiplies labels and hands out uniformly random elements. From those
//! queries the crate builds a generator chain with triangular relations,
//! turns it into a presentation, diagonalizes the relation matrix and reads
//! off the invariant factors together with an explicit basis.

pub mod arith;
pub mod deterministic;
pub mod error;
pub mod experiments;
pub mod isomorphism;
pub mod monomial;
pub mod oracle;
pub mod randomized;
pub mod snf;

pub use error::{Error, Result};
pub use oracle::{CayleyOracle, Counters, Element, GroupOracle, GroupSpec, Model};
