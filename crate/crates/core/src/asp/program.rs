use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::AspError;
use crate::eval::{query_relevant_vars, rewrite_query};
use crate::model::{Instance, Schema, Value};
use crate::qlang::{Atom, Builtin, CmpOp, Query, Term, ViewDef};
use crate::secrecy::{nulled_atom, view_relevant_vars};

/// Lifecycle marker of an annotated atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Annotation {
    /// The atom is being updated: a new, more-null version.
    A,
    /// The atom has been updated and no longer belongs to the result.
    U,
    /// The atom is original or new.
    T,
    /// The atom stays in the secrecy instance.
    S,
}

impl Annotation {
    pub fn suffix(self) -> &'static str {
        match self {
            Annotation::A => "_a",
            Annotation::U => "_u",
            Annotation::T => "_t",
            Annotation::S => "_s",
        }
    }

    pub fn all() -> [Annotation; 4] {
        [Annotation::A, Annotation::U, Annotation::T, Annotation::S]
    }
}

/// Whether annotated atoms carry the base tuple id as their first argument.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TidMode {
    /// `p_t(K, X, Y)`: every version of a tuple is tied to its base id.
    #[default]
    Explicit,
    /// `p_t(X, Y)`: tuples are identified by their values only. Models
    /// can be read back only when base tuples are distinct and no version
    /// of one tuple also matches another.
    Omitted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProgramOptions {
    pub tids: TidMode,
}

/// `head_1 | ... | head_n :- pos, not neg, builtins.` An empty head is a
/// constraint, an empty body a fact.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub head: Vec<Atom>,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
    pub builtins: Vec<Builtin>,
}

impl Rule {
    pub fn fact(atom: Atom) -> Self {
        Rule {
            head: vec![atom],
            pos: Vec::new(),
            neg: Vec::new(),
            builtins: Vec::new(),
        }
    }

    pub fn is_fact(&self) -> bool {
        self.head.len() == 1 && self.pos.is_empty() && self.neg.is_empty() && self.builtins.is_empty()
    }

    /// Every variable of the head, the negative body and the built-ins must
    /// occur in a positive body atom.
    pub fn check_safety(&self) -> Result<(), AspError> {
        let bound: BTreeSet<&str> = self.pos.iter().flat_map(Atom::vars).collect();
        let others = self
            .head
            .iter()
            .chain(&self.neg)
            .flat_map(Atom::vars)
            .chain(self.builtins.iter().flat_map(Builtin::vars));
        for v in others {
            if !bound.contains(v) {
                return Err(AspError::UnsafeRule {
                    var: v.to_owned(),
                    rule: self.to_string(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::export::render_rule(self, super::export::Dialect::Clingo))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatedProgram {
    pub rules: Vec<Rule>,
    pub schema: Arc<Schema>,
    pub views: Vec<ViewDef>,
    pub options: ProgramOptions,
}

impl fmt::Display for AnnotatedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

pub fn annotated_name(relation: &str, ann: Annotation) -> String {
    format!("{}{}", relation.to_lowercase(), ann.suffix())
}

pub fn aux_name(view: &str) -> String {
    format!("aux_{}", view.to_lowercase())
}

pub const ANSWER_PREDICATE: &str = "ans";

/// The predicates generated for different relations and views must not
/// coincide.
fn check_names(schema: &Schema, views: &[ViewDef]) -> Result<(), AspError> {
    let mut seen: BTreeMap<String, String> = BTreeMap::new();
    seen.insert(ANSWER_PREDICATE.to_owned(), "the answer predicate".to_owned());
    let mut owned: Vec<(String, Vec<String>)> = Vec::new();
    for r in schema.relations() {
        let mut names = vec![r.name.to_lowercase(), kept_name(&r.name)];
        names.extend(Annotation::all().map(|a| annotated_name(&r.name, a)));
        for i in 1..=r.arity() {
            names.push(null_flag_name(&r.name, i));
            names.push(value_name(&r.name, i));
        }
        owned.push((r.name.clone(), names));
    }
    for v in views {
        owned.push((v.name.clone(), vec![aux_name(&v.name)]));
    }
    for (owner, names) in owned {
        for n in names {
            if let Some(prev) = seen.insert(n, owner.clone()) {
                if prev != owner {
                    return Err(AspError::NameCollision(prev, owner));
                }
            }
        }
    }
    Ok(())
}

fn null() -> Term {
    Term::Const(Value::Null)
}

fn not_null(v: &str) -> Builtin {
    Builtin::cmp(Term::var(v), CmpOp::Neq, null())
}

/// Built-ins of program rules are evaluated classically, so null tests
/// become comparisons with the null constant.
fn classical_builtin(b: &Builtin) -> Builtin {
    match b {
        Builtin::IsNull(t) => Builtin::cmp(t.clone(), CmpOp::Eq, null()),
        Builtin::IsNotNull(t) => Builtin::cmp(t.clone(), CmpOp::Neq, null()),
        other => other.clone(),
    }
}

/// Fresh variable names `K1, K2, ...` avoiding the ones already in use.
fn fresh_vars(used: &BTreeSet<&str>, n: usize, prefix: &str) -> Vec<String> {
    let mut tag = prefix.to_owned();
    loop {
        let names: Vec<String> = (1..=n).map(|i| format!("{tag}{i}")).collect();
        if names.iter().all(|x| !used.contains(x.as_str())) {
            return names;
        }
        tag.push('_');
    }
}

struct Annotator {
    tids: TidMode,
}

impl Annotator {
    fn atom(&self, a: &Atom, ann: Annotation, tid: &Term) -> Atom {
        let mut args = Vec::with_capacity(a.args.len() + 1);
        if self.tids == TidMode::Explicit {
            args.push(tid.clone());
        }
        args.extend(a.args.iter().cloned());
        Atom::new(annotated_name(&a.predicate, ann), args)
    }

    fn fact(&self, relation: &str, tid: u32, vals: &[Value], ann: Annotation) -> Atom {
        let plain = Atom::new(relation, vals.iter().cloned().map(Term::Const).collect());
        self.atom(&plain, ann, &Term::Const(Value::Int(tid as i64)))
    }
}

fn view_rules(v: &ViewDef, ann: &Annotator) -> Result<Vec<Rule>, AspError> {
    if v.phi.iter().any(|b| matches!(b, Builtin::IsNull(_))) {
        return Err(AspError::UnsupportedView {
            view: v.name.clone(),
            reason: "isnull in the body makes nulling non-monotone".into(),
        });
    }
    let head: Vec<&str> = v.distinct_head();
    if head.is_empty() {
        // A view without head variables is null on every instance.
        return Ok(Vec::new());
    }
    let relevant = view_relevant_vars(v);
    let rel: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
    let hs: BTreeSet<&str> = head.iter().copied().collect();
    let used: BTreeSet<&str> = v.body_vars();
    let kvars: Vec<Term> = fresh_vars(&used, v.atoms.len(), "K")
        .into_iter()
        .map(Term::Var)
        .collect();

    let body_t: Vec<Atom> = v
        .atoms
        .iter()
        .zip(&kvars)
        .map(|(a, k)| ann.atom(a, Annotation::T, k))
        .collect();
    let phi: Vec<Builtin> = v.phi.iter().map(classical_builtin).collect();
    let guards: Vec<Builtin> = relevant.iter().map(|x| not_null(x)).collect();
    let aux = Atom::new(aux_name(&v.name), head.iter().map(|x| Term::var(*x)).collect());

    // Solvers order null among the symbols, so order comparisons get an
    // explicit non-null guard to keep them false on null.
    let order_vars: BTreeSet<&str> = v
        .phi
        .iter()
        .filter(|b| matches!(b, Builtin::Cmp { op, .. } if op.is_order()))
        .flat_map(Builtin::vars)
        .collect();
    let mut rules = Vec::new();
    for x in &head {
        let mut builtins = phi.clone();
        builtins.extend(order_vars.iter().filter(|o| *o != x).map(|o| not_null(o)));
        builtins.push(not_null(x));
        rules.push(Rule {
            head: vec![aux.clone()],
            pos: body_t.clone(),
            neg: Vec::new(),
            builtins,
        });
    }

    let mut body_guarded = phi.clone();
    body_guarded.extend(guards.iter().cloned());
    let mut pos_aux = body_t.clone();
    pos_aux.push(aux.clone());

    // A relevant cell is nulled on its own, while the secrecy cells of an
    // atom are nulled together: (index of body atom, nulled atom).
    let cp = single_nulls(v, &rel);
    let sp: Vec<(usize, Atom)> = v
        .atoms
        .iter()
        .enumerate()
        .filter_map(|(i, a)| nulled_atom(a, &hs).map(|n| (i, n)))
        .collect();
    let to_a = |(i, a): &(usize, Atom)| ann.atom(a, Annotation::A, &kvars[*i]);
    let cp_heads: Vec<Atom> = cp.iter().map(to_a).collect();

    let head_is_relevant = head.iter().any(|x| rel.contains(x));
    let mut disjunctive = Vec::new();
    if head_is_relevant {
        disjunctive.push(cp_heads.clone());
    } else {
        for s in &sp {
            let mut h = vec![to_a(s)];
            for c in &cp_heads {
                if !h.contains(c) {
                    h.push(c.clone());
                }
            }
            disjunctive.push(h);
        }
    }
    for h in disjunctive {
        rules.push(Rule {
            head: h,
            pos: pos_aux.clone(),
            neg: Vec::new(),
            builtins: body_guarded.clone(),
        });
    }

    for s in &sp {
        let (j, _) = s;
        if cp.contains(s) {
            continue;
        }
        // The old tuple is gone once the new version differs from it, i.e.
        // once one of its secrecy positions held a value.
        let mut pos = pos_aux.clone();
        pos.push(to_a(s));
        let mut seen = BTreeSet::new();
        for x in v.atoms[*j].vars() {
            if hs.contains(x) && seen.insert(x) {
                let mut builtins = body_guarded.clone();
                builtins.push(not_null(x));
                rules.push(Rule {
                    head: vec![ann.atom(&v.atoms[*j], Annotation::U, &kvars[*j])],
                    pos: pos.clone(),
                    neg: Vec::new(),
                    builtins,
                });
            }
        }
    }
    for c in &cp {
        let mut pos = pos_aux.clone();
        pos.push(to_a(c));
        rules.push(Rule {
            head: vec![ann.atom(&v.atoms[c.0], Annotation::U, &kvars[c.0])],
            pos,
            neg: Vec::new(),
            builtins: body_guarded.clone(),
        });
    }
    Ok(rules)
}

/// Body atoms with a single occurrence of a variable in `vars` nulled, one
/// entry per occurrence.
fn single_nulls(v: &ViewDef, vars: &BTreeSet<&str>) -> Vec<(usize, Atom)> {
    let mut out = Vec::new();
    for (i, a) in v.atoms.iter().enumerate() {
        for (p, t) in a.args.iter().enumerate() {
            if t.as_var().is_some_and(|x| vars.contains(x)) {
                let mut args = a.args.clone();
                args[p] = null();
                out.push((i, Atom::new(a.predicate.clone(), args)));
            }
        }
    }
    out
}

pub fn kept_name(relation: &str) -> String {
    format!("{}_k", relation.to_lowercase())
}

fn null_flag_name(relation: &str, pos: usize) -> String {
    format!("{}_n{pos}", relation.to_lowercase())
}

fn value_name(relation: &str, pos: usize) -> String {
    format!("{}_v{pos}", relation.to_lowercase())
}

/// Versions that were never updated are kept, and the s-atom of a tuple
/// merges its kept versions: a position is null when it is null in one of
/// them. Without the merge, two rules nulling different cells of one tuple
/// would leave two partial versions for a query to match separately.
fn merge_rules(relation: &str, arity: usize) -> Vec<Rule> {
    let k = Term::var("K");
    let xs: Vec<Term> = (1..=arity).map(|i| Term::Var(format!("X{i}"))).collect();
    let with_k = |name: String, rest: Vec<Term>| {
        let mut args = vec![k.clone()];
        args.extend(rest);
        Atom::new(name, args)
    };
    let kept = with_k(kept_name(relation), xs.clone());
    let mut rules = vec![Rule {
        head: vec![kept.clone()],
        pos: vec![with_k(annotated_name(relation, Annotation::T), xs.clone())],
        neg: vec![with_k(annotated_name(relation, Annotation::U), xs.clone())],
        builtins: Vec::new(),
    }];
    for i in 1..=arity {
        let flag = with_k(null_flag_name(relation, i), Vec::new());
        let mut nulled = xs.clone();
        nulled[i - 1] = null();
        rules.push(Rule {
            head: vec![flag.clone()],
            pos: vec![with_k(kept_name(relation), nulled)],
            neg: Vec::new(),
            builtins: Vec::new(),
        });
        rules.push(Rule {
            head: vec![with_k(value_name(relation, i), vec![xs[i - 1].clone()])],
            pos: vec![kept.clone()],
            neg: vec![flag.clone()],
            builtins: Vec::new(),
        });
        rules.push(Rule {
            head: vec![with_k(value_name(relation, i), vec![null()])],
            pos: vec![flag],
            neg: Vec::new(),
            builtins: Vec::new(),
        });
    }
    let vs: Vec<Term> = (1..=arity).map(|i| Term::Var(format!("V{i}"))).collect();
    rules.push(Rule {
        head: vec![with_k(annotated_name(relation, Annotation::S), vs.clone())],
        pos: (1..=arity)
            .map(|i| with_k(value_name(relation, i), vec![vs[i - 1].clone()]))
            .collect(),
        neg: Vec::new(),
        builtins: Vec::new(),
    });
    rules
}

/// Builds the secrecy program of `d` and `views`: t-annotated facts, the
/// disjunctive nulling rules with their `aux` guards, the old-tuple
/// collecting rules, persistence of new versions, and the `s` collection
/// (merged per tuple id when ids are explicit).
pub fn compile_program(
    d: &Instance,
    views: &[ViewDef],
    opts: ProgramOptions,
) -> Result<AnnotatedProgram, AspError> {
    let schema = d.schema().clone();
    check_names(&schema, views)?;
    let ann = Annotator { tids: opts.tids };
    let mut rules = Vec::new();
    for rel in schema.relations() {
        for (tid, vals) in d.tuples(&rel.name) {
            rules.push(Rule::fact(ann.fact(&rel.name, tid, vals, Annotation::T)));
        }
    }
    let mut seen = BTreeSet::new();
    for v in views {
        for r in view_rules(v, &ann)? {
            if seen.insert(r.clone()) {
                rules.push(r);
            }
        }
    }
    for rel in schema.relations() {
        let vars: Vec<Term> = (1..=rel.arity()).map(|i| Term::Var(format!("X{i}"))).collect();
        let plain = Atom::new(rel.name.clone(), vars);
        let k = Term::var("K");
        rules.push(Rule {
            head: vec![ann.atom(&plain, Annotation::T, &k)],
            pos: vec![ann.atom(&plain, Annotation::A, &k)],
            neg: Vec::new(),
            builtins: Vec::new(),
        });
        if opts.tids == TidMode::Omitted {
            rules.push(Rule {
                head: vec![ann.atom(&plain, Annotation::S, &k)],
                pos: vec![ann.atom(&plain, Annotation::T, &k)],
                neg: vec![ann.atom(&plain, Annotation::U, &k)],
                builtins: Vec::new(),
            });
        } else {
            rules.extend(merge_rules(&rel.name, rel.arity()));
        }
    }
    for r in &rules {
        r.check_safety()?;
    }
    Ok(AnnotatedProgram {
        rules,
        schema,
        views: views.to_vec(),
        options: opts,
    })
}

/// `ans(free) :- s-annotated atoms of the rewritten query, its built-ins.`
pub fn compile_query_program(q: &Query, opts: ProgramOptions) -> Rule {
    let rw = rewrite_query(q);
    debug_assert_eq!(query_relevant_vars(q).len() + q.builtins.len(), rw.builtins.len());
    let used: BTreeSet<&str> = rw.body_vars();
    let ann = Annotator { tids: opts.tids };
    let kvars = fresh_vars(&used, rw.atoms.len(), "K");
    Rule {
        head: vec![Atom::new(
            ANSWER_PREDICATE,
            rw.free.iter().map(|x| Term::var(x.as_str())).collect(),
        )],
        pos: rw
            .atoms
            .iter()
            .zip(kvars)
            .map(|(a, k)| ann.atom(a, Annotation::S, &Term::Var(k)))
            .collect(),
        neg: Vec::new(),
        builtins: rw.builtins,
    }
}

/// One denial constraint per head variable: the view body together with
/// that variable being non-null must never hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenialConstraint {
    pub view: String,
    pub var: String,
    pub atoms: Vec<Atom>,
    pub builtins: Vec<Builtin>,
}

impl DenialConstraint {
    /// The constraint as a headless rule over the base predicates.
    pub fn to_rule(&self) -> Rule {
        Rule {
            head: Vec::new(),
            pos: self
                .atoms
                .iter()
                .map(|a| Atom::new(a.predicate.to_lowercase(), a.args.clone()))
                .collect(),
            neg: Vec::new(),
            builtins: self.builtins.clone(),
        }
    }
}

impl fmt::Display for DenialConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut vars: Vec<&str> = Vec::new();
        for v in self.atoms.iter().flat_map(Atom::vars) {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        write!(f, "¬∃{} (", vars.join(","))?;
        let mut parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        parts.extend(self.builtins.iter().map(|b| match b {
            Builtin::Cmp { op: CmpOp::Neq, left, right } => format!("{left} ≠ {right}"),
            Builtin::Cmp { op: CmpOp::Le, left, right } => format!("{left} ≤ {right}"),
            Builtin::Cmp { op: CmpOp::Ge, left, right } => format!("{left} ≥ {right}"),
            other => other.to_string(),
        }));
        write!(f, "{})", parts.join(" ∧ "))
    }
}

pub fn to_denial_constraints(v: &ViewDef) -> Vec<DenialConstraint> {
    v.distinct_head()
        .into_iter()
        .map(|x| {
            let mut builtins = v.phi.clone();
            builtins.push(not_null(x));
            DenialConstraint {
                view: v.name.clone(),
                var: x.to_owned(),
                atoms: v.atoms.clone(),
                builtins,
            }
        })
        .collect()
}
