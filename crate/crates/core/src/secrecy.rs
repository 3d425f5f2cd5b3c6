//! Static analysis of secrecy views and the admissibility test.
//!
//! A view is null on an instance when its answers under the null semantics
//! contain nothing but the all-null row. An instance is admissible when
//! every view is null on it. Admissibility is checked directly and,
//! independently, through a universally quantified sentence evaluated
//! classically ([`NullSentence`]).

use std::collections::BTreeSet;
use std::fmt;

use crate::error::EvalError;
use crate::eval::{self, body_matches, eval_builtin, BodyMatch, Semantics};
use crate::model::{Instance, Value};
use crate::qlang::{Atom, Builtin, Term, ViewDef};

/// A column of a relation, 1-based.
pub type Position = (String, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttrSets {
    pub combination: BTreeSet<Position>,
    pub secrecy: BTreeSet<Position>,
    pub srelevant: BTreeSet<Position>,
}

fn positions_of(v: &ViewDef, vars: &BTreeSet<&str>) -> BTreeSet<Position> {
    let mut out = BTreeSet::new();
    for a in &v.atoms {
        for (i, t) in a.args.iter().enumerate() {
            if t.as_var().is_some_and(|x| vars.contains(x)) {
                out.insert((a.predicate.clone(), i + 1));
            }
        }
    }
    out
}

pub fn view_relevant_vars(v: &ViewDef) -> BTreeSet<String> {
    eval::relevant_vars(&v.atoms, &v.phi)
}

/// Combination positions hold relevant variables, secrecy positions hold
/// head variables; a variable can contribute to both.
pub fn attr_sets(v: &ViewDef) -> AttrSets {
    let relevant = view_relevant_vars(v);
    let rel: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
    let head: BTreeSet<&str> = v.head.iter().map(String::as_str).collect();
    let combination = positions_of(v, &rel);
    let secrecy = positions_of(v, &head);
    let srelevant = combination.union(&secrecy).cloned().collect();
    AttrSets {
        combination,
        secrecy,
        srelevant,
    }
}

/// `atom` with every occurrence of a variable in `vars` replaced by null,
/// or `None` when no such occurrence exists.
pub fn nulled_atom(atom: &Atom, vars: &BTreeSet<&str>) -> Option<Atom> {
    let mut hit = false;
    let args = atom
        .args
        .iter()
        .map(|t| match t.as_var() {
            Some(x) if vars.contains(x) => {
                hit = true;
                Term::Const(Value::Null)
            }
            _ => t.clone(),
        })
        .collect();
    hit.then(|| Atom::new(atom.predicate.clone(), args))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadAtomSets {
    /// Body atoms with their relevant-variable occurrences nulled.
    pub cp: Vec<Atom>,
    /// Body atoms with their head-variable occurrences nulled.
    pub sp: Vec<Atom>,
}

pub fn head_atom_sets(v: &ViewDef) -> HeadAtomSets {
    let relevant = view_relevant_vars(v);
    let rel: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
    let head: BTreeSet<&str> = v.head.iter().map(String::as_str).collect();
    HeadAtomSets {
        cp: v.atoms.iter().filter_map(|a| nulled_atom(a, &rel)).collect(),
        sp: v.atoms.iter().filter_map(|a| nulled_atom(a, &head)).collect(),
    }
}

/// N-semantics body matches whose head is not entirely null. The view is
/// null on `d` iff this is empty.
pub fn violations(d: &Instance, v: &ViewDef) -> Result<Vec<BodyMatch>, EvalError> {
    let mut out = body_matches(d, &v.atoms, &v.phi, Semantics::Null)?;
    out.retain(|m| v.head.iter().any(|x| !m.assignment[x].is_null()));
    Ok(out)
}

pub fn is_null_view(d: &Instance, v: &ViewDef) -> Result<bool, EvalError> {
    let answers = eval::eval_n(d, &v.as_query())?;
    Ok(answers.rows.iter().all(|r| r.iter().all(Value::is_null)))
}

/// Direct check of every view. In debug builds the sentence-based check is
/// run as well and the two are required to agree.
pub fn is_admissible(d: &Instance, views: &[ViewDef]) -> Result<bool, EvalError> {
    let mut direct = true;
    for v in views {
        if !is_null_view(d, v)? {
            direct = false;
            break;
        }
    }
    debug_assert_eq!(
        Ok(direct),
        is_admissible_by_sentence(d, views),
        "direct and sentence-based admissibility disagree"
    );
    Ok(direct)
}

/// Admissibility via classical evaluation of each view's [`NullSentence`].
pub fn is_admissible_by_sentence(d: &Instance, views: &[ViewDef]) -> Result<bool, EvalError> {
    for v in views {
        if !NullSentence::of(v).holds(d)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `forall (body -> OR_{relevant v} v = null  OR  AND_{head x} x = null  OR  not phi)`,
/// with `not phi` spelled as the disjunction of the negated built-ins.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NullSentence {
    pub atoms: Vec<Atom>,
    pub relevant: Vec<String>,
    pub head: Vec<String>,
    pub negated_phi: Vec<Builtin>,
}

impl NullSentence {
    pub fn of(v: &ViewDef) -> Self {
        NullSentence {
            atoms: v.atoms.clone(),
            relevant: view_relevant_vars(v).into_iter().collect(),
            head: v.distinct_head().into_iter().map(str::to_owned).collect(),
            negated_phi: v.phi.iter().map(Builtin::negate).collect(),
        }
    }

    /// Classical evaluation; null is an ordinary constant and order
    /// comparisons with null are false in either polarity.
    pub fn holds(&self, d: &Instance) -> Result<bool, EvalError> {
        for m in body_matches(d, &self.atoms, &[], Semantics::Classical)? {
            let s = &m.assignment;
            let ok = self.relevant.iter().any(|x| s[x].is_null())
                || self.head.iter().all(|x| s[x].is_null())
                || self
                    .negated_phi
                    .iter()
                    .any(|b| eval_builtin(b, s, Semantics::Classical));
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl fmt::Display for NullSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars: BTreeSet<&str> = self.atoms.iter().flat_map(Atom::vars).collect();
        let vars: Vec<&str> = vars.into_iter().collect();
        write!(f, "∀{} (", vars.join(","))?;
        let body: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        write!(f, "{} → ", body.join(" ∧ "))?;
        let mut disj: Vec<String> = self.relevant.iter().map(|x| format!("{x} = null")).collect();
        let conj: Vec<String> = self.head.iter().map(|x| format!("{x} = null")).collect();
        disj.push(match conj.len() {
            0 => "true".to_owned(),
            1 => conj[0].clone(),
            _ => format!("({})", conj.join(" ∧ ")),
        });
        disj.extend(self.negated_phi.iter().map(|b| b.to_string()));
        write!(f, "{})", disj.join(" ∨ "))
    }
}
