use std::collections::BTreeSet;
use std::fmt;

use crate::model::Value;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Term::Const(Value::Null))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

/// A database (or program) atom `pred(t1, ..., tn)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::as_var)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Neq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Neq => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Neq)
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Neq,
            CmpOp::Neq => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Le => CmpOp::Gt,
        }
    }
}

/// Built-in atoms: binary comparisons plus the unary null tests.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Builtin {
    Cmp { op: CmpOp, left: Term, right: Term },
    IsNull(Term),
    IsNotNull(Term),
}

impl Builtin {
    pub fn cmp(left: Term, op: CmpOp, right: Term) -> Self {
        Builtin::Cmp { op, left, right }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Builtin::Cmp { left, right, .. } => vec![left, right],
            Builtin::IsNull(t) | Builtin::IsNotNull(t) => vec![t],
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.terms().into_iter().filter_map(Term::as_var)
    }

    /// `t = null`, `null != t` and the like.
    pub fn is_null_equality(&self) -> bool {
        matches!(self, Builtin::Cmp { op: CmpOp::Eq | CmpOp::Neq, left, right }
            if left.is_null() || right.is_null())
    }

    /// Whether occurrences of variables inside this built-in count towards
    /// relevance: null tests and comparisons against the null constant do not.
    pub fn counts_for_relevance(&self) -> bool {
        match self {
            Builtin::IsNull(_) | Builtin::IsNotNull(_) => false,
            Builtin::Cmp { left, right, .. } => !(left.is_null() || right.is_null()),
        }
    }

    /// Syntactic complement, used to build the negation of a built-in
    /// conjunction.
    pub fn negate(&self) -> Builtin {
        match self {
            Builtin::Cmp { op, left, right } => Builtin::Cmp {
                op: op.negate(),
                left: left.clone(),
                right: right.clone(),
            },
            Builtin::IsNull(t) => Builtin::IsNotNull(t.clone()),
            Builtin::IsNotNull(t) => Builtin::IsNull(t.clone()),
        }
    }

    pub fn mentions_null(&self) -> bool {
        self.terms().iter().any(|t| t.is_null())
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Cmp { op, left, right } => write!(f, "{left} {} {right}", op.symbol()),
            Builtin::IsNull(t) => write!(f, "isnull({t})"),
            Builtin::IsNotNull(t) => write!(f, "isnotnull({t})"),
        }
    }
}

/// A conjunctive query `?(free) :- atoms, builtins.`; every body variable
/// that is not free is implicitly existential.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Query {
    pub free: Vec<String>,
    pub atoms: Vec<Atom>,
    pub builtins: Vec<Builtin>,
}

impl Query {
    pub fn new(free: Vec<String>, atoms: Vec<Atom>, builtins: Vec<Builtin>) -> Self {
        Query {
            free,
            atoms,
            builtins,
        }
    }

    /// The open atomic query `R(X1, ..., Xn)`.
    pub fn atomic(relation: &str, arity: usize) -> Self {
        let vars: Vec<String> = (1..=arity).map(|i| format!("X{i}")).collect();
        Query {
            free: vars.clone(),
            atoms: vec![Atom::new(relation, vars.into_iter().map(Term::Var).collect())],
            builtins: Vec::new(),
        }
    }

    pub fn body_vars(&self) -> BTreeSet<&str> {
        self.atoms
            .iter()
            .flat_map(Atom::vars)
            .chain(self.builtins.iter().flat_map(Builtin::vars))
            .collect()
    }

    pub fn existential_vars(&self) -> BTreeSet<&str> {
        let mut vars = self.body_vars();
        for v in &self.free {
            vars.remove(v.as_str());
        }
        vars
    }

    pub fn is_boolean(&self) -> bool {
        self.free.is_empty()
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, atoms: &[Atom], builtins: &[Builtin]) -> fmt::Result {
    let mut first = true;
    for a in atoms {
        if !first {
            f.write_str(", ")?;
        }
        first = false;
        write!(f, "{a}")?;
    }
    for b in builtins {
        if !first {
            f.write_str(", ")?;
        }
        first = false;
        write!(f, "{b}")?;
    }
    Ok(())
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?({}) :- ", self.free.join(","))?;
        write_body(f, &self.atoms, &self.builtins)?;
        f.write_str(".")
    }
}

/// A secrecy view `name(head) :- atoms, phi.`
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewDef {
    pub name: String,
    pub head: Vec<String>,
    pub atoms: Vec<Atom>,
    pub phi: Vec<Builtin>,
}

impl ViewDef {
    /// The conjunctive query whose answers form the view extension.
    pub fn as_query(&self) -> Query {
        Query {
            free: self.head.clone(),
            atoms: self.atoms.clone(),
            builtins: self.phi.clone(),
        }
    }

    /// Head variables without repetitions, in first-occurrence order.
    pub fn distinct_head(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.head
            .iter()
            .map(String::as_str)
            .filter(|v| seen.insert(*v))
            .collect()
    }

    pub fn body_vars(&self) -> BTreeSet<&str> {
        self.atoms.iter().flat_map(Atom::vars).collect()
    }
}

impl fmt::Display for ViewDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) :- ", self.name, self.head.join(","))?;
        write_body(f, &self.atoms, &self.phi)?;
        f.write_str(".")
    }
}

/// Syntactic classes of conjunctive queries with nulls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryClass {
    /// No null constant and no null test anywhere.
    ConjSigma,
    /// SQL-like: null only through `isnull`/`isnotnull` or inside atoms,
    /// never in `=`/`!=`.
    ConjNullSql,
    /// Anything else, e.g. `Y = null`.
    ConjNullGeneral,
}

pub fn classify_query(q: &Query) -> QueryClass {
    let null_in_atoms = q.atoms.iter().any(|a| a.args.iter().any(Term::is_null));
    let null_tests = q
        .builtins
        .iter()
        .any(|b| matches!(b, Builtin::IsNull(_) | Builtin::IsNotNull(_)));
    let null_in_builtins = q.builtins.iter().any(Builtin::mentions_null);
    if !null_in_atoms && !null_tests && !null_in_builtins {
        QueryClass::ConjSigma
    } else if q.builtins.iter().any(Builtin::is_null_equality) {
        QueryClass::ConjNullGeneral
    } else {
        QueryClass::ConjNullSql
    }
}
