use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use super::export::render_value;
use super::export::Dialect;
use super::program::{AnnotatedProgram, Rule};
use crate::error::AspError;
use crate::eval::{eval_builtin, Assignment, Semantics};
use crate::model::Value;
use crate::qlang::{Atom, Builtin, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: Vec<Value>) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args,
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, v) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(&render_value(v, Dialect::Clingo))?;
        }
        f.write_str(")")
    }
}

/// A ground rule over interned atom ids.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundRule {
    pub head: Vec<u32>,
    pub pos: Vec<u32>,
    pub neg: Vec<u32>,
}

#[derive(Clone, Debug, Default)]
pub struct GroundProgram {
    pub atoms: Vec<GroundAtom>,
    pub index: HashMap<GroundAtom, u32>,
    pub rules: Vec<GroundRule>,
}

impl GroundProgram {
    fn intern(&mut self, a: GroundAtom) -> u32 {
        if let Some(&id) = self.index.get(&a) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.atoms.push(a.clone());
        self.index.insert(a, id);
        id
    }

    pub fn atom(&self, id: u32) -> &GroundAtom {
        &self.atoms[id as usize]
    }

    pub fn id(&self, a: &GroundAtom) -> Option<u32> {
        self.index.get(a).copied()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl fmt::Display for GroundProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            let heads: Vec<String> = r.head.iter().map(|&h| self.atom(h).to_string()).collect();
            let mut body: Vec<String> = r.pos.iter().map(|&p| self.atom(p).to_string()).collect();
            body.extend(r.neg.iter().map(|&n| format!("not {}", self.atom(n))));
            f.write_str(&heads.join(" | "))?;
            if !body.is_empty() {
                if !heads.is_empty() {
                    f.write_str(" ")?;
                }
                write!(f, ":- {}", body.join(", "))?;
            }
            writeln!(f, ".")?;
        }
        Ok(())
    }
}

/// Possible atoms per predicate, kept in insertion order for joins.
#[derive(Default)]
struct Store {
    by_pred: HashMap<String, Vec<Vec<Value>>>,
    set: HashSet<GroundAtom>,
}

impl Store {
    fn insert(&mut self, a: GroundAtom) -> bool {
        if self.set.contains(&a) {
            return false;
        }
        self.by_pred
            .entry(a.predicate.clone())
            .or_default()
            .push(a.args.clone());
        self.set.insert(a);
        true
    }

    fn contains(&self, a: &GroundAtom) -> bool {
        self.set.contains(a)
    }
}

fn instantiate(a: &Atom, s: &Assignment) -> GroundAtom {
    GroundAtom::new(
        a.predicate.clone(),
        a.args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(v) => s[v].clone(),
            })
            .collect(),
    )
}

/// Built-ins keyed by the positive atom after which they are fully bound.
fn schedule(rule: &Rule) -> Vec<Vec<&Builtin>> {
    let mut bound_after: HashMap<&str, usize> = HashMap::new();
    for (i, a) in rule.pos.iter().enumerate() {
        for v in a.vars() {
            bound_after.entry(v).or_insert(i);
        }
    }
    let mut out = vec![Vec::new(); rule.pos.len().max(1)];
    for b in &rule.builtins {
        let idx = b
            .vars()
            .map(|v| bound_after.get(v).copied().unwrap_or(0))
            .max()
            .unwrap_or(0);
        out[idx].push(b);
    }
    out
}

fn join(
    rule: &Rule,
    checks: &[Vec<&Builtin>],
    store: &Store,
    i: usize,
    s: &mut Assignment,
    f: &mut dyn FnMut(&Assignment),
) {
    if i == rule.pos.len() {
        if rule.pos.is_empty() && !checks[0].iter().all(|b| eval_builtin(b, s, Semantics::Classical)) {
            return;
        }
        f(s);
        return;
    }
    let atom = &rule.pos[i];
    let Some(rows) = store.by_pred.get(&atom.predicate) else {
        return;
    };
    'rows: for vals in rows {
        if vals.len() != atom.args.len() {
            continue;
        }
        let mut newly: Vec<&str> = Vec::new();
        for (t, v) in atom.args.iter().zip(vals) {
            let ok = match t {
                Term::Const(c) => c == v,
                Term::Var(x) => match s.get(x) {
                    Some(prev) => prev == v,
                    None => {
                        s.insert(x.clone(), v.clone());
                        newly.push(x);
                        true
                    }
                },
            };
            if !ok {
                for x in newly {
                    s.remove(x);
                }
                continue 'rows;
            }
        }
        if checks[i].iter().all(|b| eval_builtin(b, s, Semantics::Classical)) {
            join(rule, checks, store, i + 1, s, f);
        }
        for x in newly {
            s.remove(x);
        }
    }
}

/// Grounds safe rules over the atoms they can possibly derive. Built-ins are
/// evaluated classically (null is a constant, order comparisons with null
/// are false); negative literals on underivable atoms are dropped.
pub fn ground_rules(rules: &[Rule], max_atoms: usize) -> Result<GroundProgram, AspError> {
    for r in rules {
        r.check_safety()?;
    }
    let schedules: Vec<Vec<Vec<&Builtin>>> = rules.iter().map(schedule).collect();
    let mut store = Store::default();
    loop {
        let mut fresh = Vec::new();
        for (r, checks) in rules.iter().zip(&schedules) {
            join(r, checks, &store, 0, &mut Assignment::new(), &mut |s| {
                for h in &r.head {
                    let g = instantiate(h, s);
                    if !store.contains(&g) {
                        fresh.push(g);
                    }
                }
            });
        }
        let mut changed = false;
        for g in fresh {
            changed |= store.insert(g);
        }
        if store.set.len() > max_atoms {
            return Err(AspError::GroundBoundExceeded {
                atoms: store.set.len(),
                bound: max_atoms,
            });
        }
        if !changed {
            break;
        }
    }
    let mut gp = GroundProgram::default();
    // Intern in a canonical order so that ids do not depend on hashing.
    let mut all: Vec<&GroundAtom> = store.set.iter().collect();
    all.sort();
    for a in all {
        gp.intern(a.clone());
    }
    let mut seen: BTreeSet<GroundRule> = BTreeSet::new();
    for (r, checks) in rules.iter().zip(&schedules) {
        let mut out = Vec::new();
        join(r, checks, &store, 0, &mut Assignment::new(), &mut |s| {
            let head: Vec<u32> = r.head.iter().map(|h| gp.index[&instantiate(h, s)]).collect();
            let pos: Vec<u32> = r.pos.iter().map(|p| gp.index[&instantiate(p, s)]).collect();
            let neg: Vec<u32> = r
                .neg
                .iter()
                .filter_map(|n| gp.index.get(&instantiate(n, s)).copied())
                .collect();
            out.push(GroundRule { head, pos, neg });
        });
        for mut g in out {
            g.head.sort_unstable();
            g.head.dedup();
            g.pos.sort_unstable();
            g.pos.dedup();
            g.neg.sort_unstable();
            g.neg.dedup();
            if seen.insert(g.clone()) {
                gp.rules.push(g);
            }
        }
    }
    Ok(gp)
}

pub const DEFAULT_MAX_ATOMS: usize = 200_000;

pub fn ground(p: &AnnotatedProgram) -> Result<GroundProgram, AspError> {
    ground_rules(&p.rules, DEFAULT_MAX_ATOMS)
}
