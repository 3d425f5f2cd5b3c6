//! Secrecy views over relational databases with SQL nulls.
//!
//! The crate decides which cells of an instance must be nulled so that no
//! protected view reveals anything, computes the minimal ways of doing so
//! (secrecy instances), answers queries over all of them, and compiles the
//! whole problem to a disjunctive answer-set program.

pub mod answers;
pub mod asp;
pub mod error;
pub mod eval;
pub mod instances;
pub mod model;
pub mod qlang;
pub mod secrecy;

pub use error::{AspError, EnumError, Error, EvalError, ModelError, ParseError};
pub use model::{apply_changes, diff_changes, Cell, ChangeSet, Column, Instance, RelationSchema, Schema, Sort, Tid, Tuple, Value};
