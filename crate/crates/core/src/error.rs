use thiserror::Error;

use crate::model::{Cell, Sort, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate relation `{0}`")]
    DuplicateRelation(String),
    #[error("relation `{0}` must have at least one column")]
    ZeroArity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has arity {expected}, got {found} values")]
    Arity {
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("value {value} does not fit column {relation}[{pos}] of sort {}", sort.name())]
    Sort {
        relation: String,
        pos: usize,
        sort: Sort,
        value: Value,
    },
    #[error("duplicate tuple id {tid} in relation `{relation}`")]
    DuplicateTid { relation: String, tid: u32 },
    #[error("tuple ids start at 1 (relation `{0}`)")]
    ZeroTid(String),
    #[error("cell {0} does not address an existing value")]
    Address(Cell),
    #[error("cell {0} is already null")]
    AlreadyNull(Cell),
    #[error("instances are not correlated (relations, tids or arities differ)")]
    NotCorrelated,
    #[error("cell {0} differs but is not a null-degradation of the base value")]
    NonNullDifference(Cell),
    #[error("tuples of different lengths ({0} and {1}) are not comparable")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("atom `{predicate}` has {found} arguments, relation has arity {expected}")]
    AtomArity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("unsafe variable `{0}`: it does not occur in any database atom of the body")]
    UnsafeVariable(String),
    #[error("order comparison `{0}` on a non-integer term")]
    OrderOnNonInt(String),
    #[error("variable `{var}` used with incompatible sorts {} and {}", first.name(), second.name())]
    SortConflict {
        var: String,
        first: Sort,
        second: Sort,
    },
    #[error("constant {value} does not fit column {predicate}[{pos}] of sort {}", sort.name())]
    ConstantSort {
        predicate: String,
        pos: usize,
        sort: Sort,
        value: Value,
    },
    #[error("view `{0}` mentions null outside isnull/isnotnull")]
    NullComparisonInView(String),
    #[error("duplicate view `{0}`")]
    DuplicateView(String),
    #[error("view `{0}` has a constant in its head; only variables are supported")]
    HeadConstant(String),
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    /// Lexical or grammatical error, as opposed to a well-formedness error
    /// against the schema.
    pub fn is_syntax(&self) -> bool {
        matches!(self, ParseError::Syntax { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("atom `{predicate}` has {found} arguments, relation has arity {expected}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnumError {
    #[error("{cells} candidate cells exceed the bound of {bound}")]
    BoundExceeded { cells: usize, bound: usize },
    #[error("search visited more than {bound} partial change sets")]
    SearchExceeded { bound: usize },
    #[error("no admissible instance is reachable by nulling candidate cells")]
    NoAdmissibleInstance,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AspError {
    #[error("unsafe rule, variable `{var}` is not bound by a positive body atom: {rule}")]
    UnsafeRule { var: String, rule: String },
    #[error("stable model search exceeded {bound} candidate interpretations")]
    BoundExceeded { bound: u64 },
    #[error("ground program has {atoms} atoms, exceeding the bound of {bound}")]
    GroundBoundExceeded { atoms: usize, bound: usize },
    #[error("s-annotated atom {0} cannot be traced to a base tuple id")]
    Untraceable(String),
    #[error("unsupported dialect `{0}` (expected dlv or clingo)")]
    UnsupportedDialect(String),
    #[error("unsupported view `{view}`: {reason}")]
    UnsupportedView { view: String, reason: String },
    #[error("`{0}` and `{1}` give the program clashing predicate names")]
    NameCollision(String, String),
    #[error("program text {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("the program has no stable model")]
    NoStableModel,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Umbrella error for callers that chain several stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Enum(#[from] EnumError),
    #[error(transparent)]
    Asp(#[from] AspError),
}
