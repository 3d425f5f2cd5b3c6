//! Text syntax for schemas, facts, secrecy views and conjunctive queries.
//!
//! Variables start with an upper-case letter or `_`; lower-case identifiers,
//! integers and double-quoted strings are constants, and `null` is the null
//! constant. Numbers in `sym`/`str` columns keep their spelling (`001`).
//! `%` starts a line comment.

mod ast;
pub(crate) mod lexer;
mod parser;

pub use ast::{classify_query, Atom, Builtin, CmpOp, Query, QueryClass, Term, ViewDef};
pub use parser::{parse_facts, parse_query, parse_schema, parse_view, parse_views};
