//! Seeded generators and brute-force reference evaluators shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use secview::eval::AnswerSet;
use secview::qlang::{parse_facts, parse_query, parse_schema, parse_view, Builtin, CmpOp, Query, Term, ViewDef};
use secview::{Instance, Schema, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn load(schema: &str, facts: &str) -> (Arc<Schema>, Instance) {
    let s = Arc::new(parse_schema(schema).unwrap());
    let d = parse_facts(facts, &s).unwrap();
    (s, d)
}

pub fn view(s: &Schema, text: &str) -> ViewDef {
    parse_view(text, s).unwrap()
}

pub fn query(s: &Schema, text: &str) -> Query {
    parse_query(text, s).unwrap()
}

pub fn rows(items: &[&[&str]]) -> BTreeSet<Vec<Value>> {
    items
        .iter()
        .map(|r| r.iter().map(|v| Value::from(*v)).collect())
        .collect()
}

pub fn int_rows(items: &[&[Option<i64>]]) -> BTreeSet<Vec<Value>> {
    items
        .iter()
        .map(|r| r.iter().map(|v| v.map_or(Value::Null, Value::Int)).collect())
        .collect()
}

const RELS: [&str; 2] = ["P", "R"];
const VARS: [&str; 4] = ["X", "Y", "Z", "W"];

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_relations: usize,
    pub max_arity: usize,
    pub max_tuples: usize,
    pub constants: i64,
    pub null_percent: u32,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_relations: 2,
            max_arity: 3,
            max_tuples: 5,
            constants: 4,
            null_percent: 15,
        }
    }
}

/// Schema text with up to two integer relations.
pub fn random_schema(rng: &mut impl Rng, shape: Shape) -> String {
    let n = rng.gen_range(1..=shape.max_relations);
    RELS[..n]
        .iter()
        .map(|r| {
            let arity = rng.gen_range(1..=shape.max_arity);
            let cols: Vec<String> = (1..=arity).map(|i| format!("c{i}:int")).collect();
            format!("relation {r}({}).\n", cols.join(","))
        })
        .collect()
}

pub fn random_facts(rng: &mut impl Rng, s: &Schema, shape: Shape) -> String {
    let mut out = String::new();
    for rel in s.relations() {
        for _ in 0..rng.gen_range(0..=shape.max_tuples) {
            let vals: Vec<String> = (0..rel.arity())
                .map(|_| {
                    if rng.gen_range(0..100) < shape.null_percent {
                        "null".to_owned()
                    } else {
                        rng.gen_range(1..=shape.constants).to_string()
                    }
                })
                .collect();
            out.push_str(&format!("{}({}).\n", rel.name, vals.join(",")));
        }
    }
    out
}

pub fn random_instance(rng: &mut impl Rng, shape: Shape) -> (Arc<Schema>, Instance) {
    let s = Arc::new(parse_schema(&random_schema(rng, shape)).unwrap());
    let facts = random_facts(rng, &s, shape);
    let d = parse_facts(&facts, &s).unwrap();
    (s, d)
}

#[derive(Clone, Copy, Debug)]
pub struct BodyShape {
    pub max_atoms: usize,
    pub max_builtins: usize,
    /// Percentage of atom arguments that are constants.
    pub constant_percent: u32,
    /// Whether isnull/isnotnull may appear.
    pub null_tests: bool,
    pub constants: i64,
}

impl Default for BodyShape {
    fn default() -> Self {
        BodyShape {
            max_atoms: 3,
            max_builtins: 2,
            constant_percent: 10,
            null_tests: true,
            constants: 4,
        }
    }
}

const OPS: [&str; 6] = ["=", "!=", "<", ">", "<=", ">="];

/// `(atoms, builtins, body variables)` as text fragments.
fn random_body(rng: &mut impl Rng, s: &Schema, b: BodyShape) -> (Vec<String>, Vec<String>, Vec<String>) {
    let rels = s.relations();
    let mut atoms = Vec::new();
    let mut vars: Vec<String> = Vec::new();
    for _ in 0..rng.gen_range(1..=b.max_atoms) {
        let rel = rels.choose(rng).unwrap();
        let args: Vec<String> = (0..rel.arity())
            .map(|_| {
                if rng.gen_range(0..100) < b.constant_percent {
                    rng.gen_range(1..=b.constants).to_string()
                } else {
                    let v = VARS.choose(rng).unwrap().to_string();
                    if !vars.contains(&v) {
                        vars.push(v.clone());
                    }
                    v
                }
            })
            .collect();
        atoms.push(format!("{}({})", rel.name, args.join(",")));
    }
    let mut builtins = Vec::new();
    if !vars.is_empty() {
        for _ in 0..rng.gen_range(0..=b.max_builtins) {
            let x = vars.choose(rng).unwrap();
            let kind = rng.gen_range(0..if b.null_tests { 6 } else { 4 });
            builtins.push(match kind {
                0 | 1 => {
                    let y = vars.choose(rng).unwrap();
                    format!("{x} {} {y}", OPS.choose(rng).unwrap())
                }
                2 | 3 => format!("{x} {} {}", OPS.choose(rng).unwrap(), rng.gen_range(1..=b.constants)),
                4 => format!("isnull({x})"),
                _ => format!("isnotnull({x})"),
            });
        }
    }
    vars.sort();
    (atoms, builtins, vars)
}

fn body_text(atoms: &[String], builtins: &[String]) -> String {
    let mut parts = atoms.to_vec();
    parts.extend(builtins.iter().cloned());
    parts.join(", ")
}

pub fn random_query(rng: &mut impl Rng, s: &Schema, b: BodyShape) -> Query {
    let (atoms, builtins, vars) = random_body(rng, s, b);
    let free: Vec<&String> = vars.iter().filter(|_| rng.gen_bool(0.5)).collect();
    let head: Vec<&str> = free.iter().map(|v| v.as_str()).collect();
    let text = format!("?({}) :- {}.", head.join(","), body_text(&atoms, &builtins));
    parse_query(&text, s).unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// A view with comparison built-ins only; its head has at least one
/// variable whenever the body has one.
pub fn random_view(rng: &mut impl Rng, s: &Schema, name: &str, b: BodyShape) -> ViewDef {
    let b = BodyShape { null_tests: false, ..b };
    let (atoms, builtins, vars) = random_body(rng, s, b);
    let mut head: Vec<&str> = vars.iter().filter(|_| rng.gen_bool(0.5)).map(String::as_str).collect();
    if head.is_empty() {
        if let Some(v) = vars.choose(rng) {
            head.push(v);
        }
    }
    let text = format!("{name}({}) :- {}.", head.join(","), body_text(&atoms, &builtins));
    parse_view(&text, s).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn random_views(rng: &mut impl Rng, s: &Schema, b: BodyShape) -> Vec<ViewDef> {
    (0..rng.gen_range(1..=2))
        .map(|i| random_view(rng, s, &format!("V{i}"), b))
        .collect()
}

/// A case small enough for exhaustive checks: arity at most 2, at most four
/// tuples per relation and three constants.
pub fn small_case(rng: &mut impl Rng, constant_percent: u32) -> (Arc<Schema>, Instance, Vec<ViewDef>) {
    let shape = Shape {
        max_arity: 2,
        max_tuples: 4,
        constants: 3,
        ..Shape::default()
    };
    let body = BodyShape {
        constant_percent,
        constants: 3,
        ..BodyShape::default()
    };
    let (s, d) = random_instance(rng, shape);
    let views = random_views(rng, &s, body);
    (s, d, views)
}

// Reference evaluation by enumerating every assignment over the active
// domain. It shares nothing with the library's matcher.

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Sem {
    Classical,
    Null,
}

fn occurrence_counts(q: &Query) -> std::collections::BTreeMap<&str, usize> {
    let mut counts = std::collections::BTreeMap::new();
    for a in &q.atoms {
        for t in &a.args {
            if let Term::Var(v) = t {
                *counts.entry(v.as_str()).or_insert(0) += 1;
            }
        }
    }
    for b in &q.builtins {
        if let Builtin::Cmp { left, right, .. } = b {
            if matches!(left, Term::Const(Value::Null)) || matches!(right, Term::Const(Value::Null)) {
                continue;
            }
            for t in [left, right] {
                if let Term::Var(v) = t {
                    *counts.entry(v.as_str()).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

fn term_value<'a>(t: &'a Term, vars: &[&str], vals: &'a [Value]) -> &'a Value {
    match t {
        Term::Const(c) => c,
        Term::Var(v) => &vals[vars.iter().position(|x| x == v).unwrap()],
    }
}

fn cmp_holds(op: CmpOp, l: &Value, r: &Value, sem: Sem) -> bool {
    if sem == Sem::Null && (l.is_null() || r.is_null()) {
        return false;
    }
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Neq => l != r,
        _ => match (l, r) {
            (Value::Int(a), Value::Int(b)) => match op {
                CmpOp::Lt => a < b,
                CmpOp::Gt => a > b,
                CmpOp::Le => a <= b,
                _ => a >= b,
            },
            _ => false,
        },
    }
}

pub fn naive_eval(d: &Instance, q: &Query, sem: Sem) -> AnswerSet {
    let mut domain: BTreeSet<Value> = BTreeSet::new();
    domain.insert(Value::Null);
    for rel in d.schema().relations() {
        for (_, vals) in d.tuples(&rel.name) {
            domain.extend(vals.iter().cloned());
        }
    }
    let counts = occurrence_counts(q);
    let vars: Vec<&str> = counts.keys().copied().collect();
    let relevant: Vec<bool> = vars.iter().map(|v| counts[v] >= 2).collect();
    let domain: Vec<Value> = domain.into_iter().collect();
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let vals: Vec<Value> = idx.iter().map(|&i| domain[i].clone()).collect();
        let allowed = sem == Sem::Classical
            || vals.iter().zip(&relevant).all(|(v, r)| !*r || !v.is_null());
        let atoms_hold = allowed
            && q.atoms.iter().all(|a| {
                let row: Vec<Value> = a.args.iter().map(|t| term_value(t, &vars, &vals).clone()).collect();
                d.tuples(&a.predicate).any(|(_, t)| t == row.as_slice())
            });
        let builtins_hold = atoms_hold
            && q.builtins.iter().all(|b| match b {
                Builtin::Cmp { op, left, right } => cmp_holds(
                    *op,
                    term_value(left, &vars, &vals),
                    term_value(right, &vars, &vals),
                    sem,
                ),
                Builtin::IsNull(t) => term_value(t, &vars, &vals).is_null(),
                Builtin::IsNotNull(t) => !term_value(t, &vars, &vals).is_null(),
            });
        if builtins_hold {
            out.insert(
                q.free
                    .iter()
                    .map(|f| vals[vars.iter().position(|x| x == f).unwrap()].clone())
                    .collect::<Vec<_>>(),
            );
        }
        // Odometer step.
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            break;
        }
    }
    AnswerSet::from_rows(q.free.len(), out)
}
