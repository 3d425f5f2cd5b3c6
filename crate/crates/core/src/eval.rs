//! Conjunctive query evaluation under two semantics.
//!
//! [`eval_classical`] treats null as an ordinary constant. [`eval_n`] is the
//! SQL-like semantics in which relevant variables (those occurring at least
//! twice in the body) never take the null value and comparisons are never
//! satisfied by null. [`rewrite_query`] turns the second into the first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::EvalError;
use crate::model::{Instance, Tid, Value};
use crate::qlang::{Atom, Builtin, CmpOp, Query, Term};

/// Variable assignment built up during a join.
pub type Assignment = BTreeMap<String, Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Semantics {
    Classical,
    Null,
}

/// Answers of a query. Boolean queries have arity 0 and answer "yes" iff
/// the empty row is present.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnswerSet {
    pub arity: usize,
    pub rows: BTreeSet<Vec<Value>>,
}

impl AnswerSet {
    pub fn new(arity: usize) -> Self {
        AnswerSet {
            arity,
            rows: BTreeSet::new(),
        }
    }

    pub fn from_rows(arity: usize, rows: impl IntoIterator<Item = Vec<Value>>) -> Self {
        let rows: BTreeSet<_> = rows.into_iter().collect();
        debug_assert!(rows.iter().all(|r| r.len() == arity));
        AnswerSet { arity, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, row: &[Value]) -> bool {
        self.rows.contains(row)
    }

    /// Boolean reading: true iff some row is present.
    pub fn holds(&self) -> bool {
        !self.rows.is_empty()
    }

    pub fn is_subset(&self, other: &AnswerSet) -> bool {
        self.rows.is_subset(&other.rows)
    }

    pub fn intersection(&self, other: &AnswerSet) -> AnswerSet {
        AnswerSet {
            arity: self.arity,
            rows: self.rows.intersection(&other.rows).cloned().collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<Value>> {
        self.rows.iter()
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.arity == 0 {
            return f.write_str(if self.holds() { "yes" } else { "no" });
        }
        f.write_str("{")?;
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str("(")?;
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str(")")?;
        }
        f.write_str("}")
    }
}

/// Variables occurring at least twice in the body, ignoring occurrences in
/// null tests and in comparisons with the null constant.
pub fn relevant_vars(atoms: &[Atom], builtins: &[Builtin]) -> BTreeSet<String> {
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    let occurrences = atoms.iter().flat_map(Atom::vars).chain(
        builtins
            .iter()
            .filter(|b| b.counts_for_relevance())
            .flat_map(Builtin::vars),
    );
    for v in occurrences {
        *count.entry(v).or_default() += 1;
    }
    count
        .into_iter()
        .filter(|(_, n)| *n >= 2)
        .map(|(v, _)| v.to_owned())
        .collect()
}

pub fn query_relevant_vars(q: &Query) -> BTreeSet<String> {
    relevant_vars(&q.atoms, &q.builtins)
}

fn term_value<'a>(t: &'a Term, s: &'a Assignment) -> Option<&'a Value> {
    match t {
        Term::Const(c) => Some(c),
        Term::Var(v) => s.get(v),
    }
}

/// Truth value of a fully bound built-in.
pub fn eval_builtin(b: &Builtin, s: &Assignment, sem: Semantics) -> bool {
    match b {
        Builtin::IsNull(t) => term_value(t, s).is_some_and(Value::is_null),
        Builtin::IsNotNull(t) => term_value(t, s).is_some_and(|v| !v.is_null()),
        Builtin::Cmp { op, left, right } => {
            let (Some(l), Some(r)) = (term_value(left, s), term_value(right, s)) else {
                return false;
            };
            compare(*op, l, r, sem)
        }
    }
}

pub fn compare(op: CmpOp, l: &Value, r: &Value, sem: Semantics) -> bool {
    if op.is_order() {
        let (Some(a), Some(b)) = (l.as_int(), r.as_int()) else {
            return false;
        };
        return match op {
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq | CmpOp::Neq => unreachable!(),
        };
    }
    if sem == Semantics::Null && (l.is_null() || r.is_null()) {
        return false;
    }
    match op {
        CmpOp::Eq => l == r,
        _ => l != r,
    }
}

/// One satisfying assignment of a body, with the tuple id used for each
/// body atom (in body order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BodyMatch {
    pub assignment: Assignment,
    pub tids: Vec<Tid>,
}

struct Matcher<'a> {
    d: &'a Instance,
    atoms: &'a [Atom],
    /// Built-ins grouped by the index of the atom after which they are
    /// fully bound.
    checks: Vec<Vec<&'a Builtin>>,
    sem: Semantics,
    relevant: BTreeSet<String>,
}

impl<'a> Matcher<'a> {
    fn new(
        d: &'a Instance,
        atoms: &'a [Atom],
        builtins: &'a [Builtin],
        sem: Semantics,
    ) -> Result<Self, EvalError> {
        for a in atoms {
            let rel = d
                .schema()
                .get(&a.predicate)
                .ok_or_else(|| EvalError::UnknownPredicate(a.predicate.clone()))?;
            if rel.arity() != a.args.len() {
                return Err(EvalError::Arity {
                    predicate: a.predicate.clone(),
                    expected: rel.arity(),
                    found: a.args.len(),
                });
            }
        }
        let mut bound_after: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, a) in atoms.iter().enumerate() {
            for v in a.vars() {
                bound_after.entry(v).or_insert(i);
            }
        }
        let mut checks = vec![Vec::new(); atoms.len().max(1)];
        for b in builtins {
            // Unbound variables make the built-in false; check it last.
            let idx = b
                .vars()
                .map(|v| bound_after.get(v).copied().unwrap_or(usize::MAX))
                .max()
                .unwrap_or(0)
                .min(checks.len() - 1);
            checks[idx].push(b);
        }
        let relevant = match sem {
            Semantics::Null => relevant_vars(atoms, builtins),
            Semantics::Classical => BTreeSet::new(),
        };
        Ok(Matcher {
            d,
            atoms,
            checks,
            sem,
            relevant,
        })
    }

    fn run(&self, f: &mut dyn FnMut(&Assignment, &[Tid])) {
        let mut s = Assignment::new();
        let mut tids = Vec::with_capacity(self.atoms.len());
        if self.atoms.is_empty() {
            if self.checks[0].iter().all(|b| eval_builtin(b, &s, self.sem)) {
                f(&s, &tids);
            }
            return;
        }
        self.step(0, &mut s, &mut tids, f);
    }

    fn step(
        &self,
        i: usize,
        s: &mut Assignment,
        tids: &mut Vec<Tid>,
        f: &mut dyn FnMut(&Assignment, &[Tid]),
    ) {
        if i == self.atoms.len() {
            f(s, tids);
            return;
        }
        let atom = &self.atoms[i];
        'tuples: for (tid, vals) in self.d.tuples(&atom.predicate) {
            let mut newly: Vec<&str> = Vec::new();
            for (t, v) in atom.args.iter().zip(vals) {
                let ok = match t {
                    Term::Const(c) => c == v,
                    Term::Var(x) => match s.get(x) {
                        Some(prev) => prev == v,
                        None => {
                            if v.is_null() && self.relevant.contains(x) {
                                false
                            } else {
                                s.insert(x.clone(), v.clone());
                                newly.push(x);
                                true
                            }
                        }
                    },
                };
                if !ok {
                    for x in newly {
                        s.remove(x);
                    }
                    continue 'tuples;
                }
            }
            if self.checks[i].iter().all(|b| eval_builtin(b, s, self.sem)) {
                tids.push(tid);
                self.step(i + 1, s, tids, f);
                tids.pop();
            }
            for x in newly {
                s.remove(x);
            }
        }
    }
}

/// Enumerates all matches of a conjunctive body.
pub fn body_matches(
    d: &Instance,
    atoms: &[Atom],
    builtins: &[Builtin],
    sem: Semantics,
) -> Result<Vec<BodyMatch>, EvalError> {
    let m = Matcher::new(d, atoms, builtins, sem)?;
    let mut out = Vec::new();
    m.run(&mut |s, tids| {
        out.push(BodyMatch {
            assignment: s.clone(),
            tids: tids.to_vec(),
        })
    });
    Ok(out)
}

fn eval(d: &Instance, q: &Query, sem: Semantics) -> Result<AnswerSet, EvalError> {
    let m = Matcher::new(d, &q.atoms, &q.builtins, sem)?;
    let mut rows = BTreeSet::new();
    m.run(&mut |s, _| {
        rows.insert(q.free.iter().map(|v| s[v].clone()).collect::<Vec<_>>());
    });
    Ok(AnswerSet {
        arity: q.free.len(),
        rows,
    })
}

/// Classical answers: null is an ordinary constant, `null = null` holds and
/// order comparisons involving null are false.
pub fn eval_classical(d: &Instance, q: &Query) -> Result<AnswerSet, EvalError> {
    eval(d, q, Semantics::Classical)
}

/// Answers under the null semantics.
pub fn eval_n(d: &Instance, q: &Query) -> Result<AnswerSet, EvalError> {
    eval(d, q, Semantics::Null)
}

/// Classical query with the same answers as `q` under the null semantics:
/// null tests become (in)equalities with null, and every relevant variable
/// gets a `!= null` guard.
pub fn rewrite_query(q: &Query) -> Query {
    let mut builtins: Vec<Builtin> = q
        .builtins
        .iter()
        .map(|b| match b {
            Builtin::IsNull(t) => Builtin::cmp(t.clone(), CmpOp::Eq, Term::Const(Value::Null)),
            Builtin::IsNotNull(t) => {
                Builtin::cmp(t.clone(), CmpOp::Neq, Term::Const(Value::Null))
            }
            other => other.clone(),
        })
        .collect();
    for v in query_relevant_vars(q) {
        builtins.push(Builtin::cmp(Term::Var(v), CmpOp::Neq, Term::Const(Value::Null)));
    }
    Query::new(q.free.clone(), q.atoms.clone(), builtins)
}
