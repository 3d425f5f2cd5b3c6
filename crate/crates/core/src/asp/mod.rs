//! Secrecy instances as the stable models of a disjunctive program.
//!
//! [`compile_program`] turns an instance and its secrecy views into an
//! annotated program, [`ground()`] instantiates it and [`stable_models`]
//! solves it. The program can also be exported for an external solver
//! ([`export_program`]) and its answer sets read back
//! ([`parse_answer_sets`]).

mod export;
mod ground;
mod program;
mod solve;

use std::collections::{BTreeMap, BTreeSet};

pub use export::{
    export_program, export_rules, parse_answer_sets, parse_program_text, render_rule,
    render_value, Dialect,
};
pub use ground::{ground, ground_rules, GroundAtom, GroundProgram, GroundRule, DEFAULT_MAX_ATOMS};
pub use program::{
    annotated_name, aux_name, compile_program, compile_query_program, to_denial_constraints,
    AnnotatedProgram, Annotation, DenialConstraint, ProgramOptions, Rule, TidMode,
    ANSWER_PREDICATE,
};
pub use solve::{is_stable_brute_force, stable_models, SolveOptions, StableModel};

use crate::error::AspError;
use crate::eval::AnswerSet;
use crate::instances::SecrecySolution;
use crate::model::{diff_changes, Instance, Sort, Tid, Value};
use crate::qlang::{Query, Term, ViewDef};

/// Solver output quotes some constants; the column sort decides whether
/// a quoted constant is a symbol or a string.
fn coerce(v: Value, sort: Sort) -> Value {
    match (v, sort) {
        (Value::Sym(s), Sort::Str) => Value::Str(s),
        (Value::Str(s), Sort::Sym) => Value::Sym(s),
        (v, _) => v,
    }
}

fn coerce_row(vals: &[Value], sorts: &[Sort]) -> Vec<Value> {
    vals.iter()
        .zip(sorts)
        .map(|(v, s)| coerce(v.clone(), *s))
        .collect()
}

/// The ground atoms of a stable model.
pub fn model_atoms(gp: &GroundProgram, m: &StableModel) -> BTreeSet<GroundAtom> {
    m.iter().map(|&a| gp.atom(a).clone()).collect()
}

/// Reads the secrecy instance off the s-annotated atoms of an answer set.
pub fn model_to_instance(
    d: &Instance,
    tids: TidMode,
    atoms: &BTreeSet<GroundAtom>,
) -> Result<Instance, AspError> {
    let schema = d.schema().clone();
    let mut out = Instance::empty(schema.clone());
    for rel in schema.relations() {
        let name = annotated_name(&rel.name, Annotation::S);
        let sorts: Vec<Sort> = rel.columns.iter().map(|c| c.sort).collect();
        let kept: Vec<&GroundAtom> = atoms
            .iter()
            .filter(|a| a.predicate == name && a.args.len() == rel.arity() + usize::from(tids == TidMode::Explicit))
            .collect();
        match tids {
            TidMode::Explicit => {
                let mut rows: BTreeMap<Tid, Vec<Value>> = BTreeMap::new();
                for a in kept {
                    let (tid, base) = match &a.args[0] {
                        Value::Int(k) => Tid::try_from(*k).ok(),
                        _ => None,
                    }
                    .and_then(|k| d.tuple(&rel.name, k).map(|b| (k, b)))
                    .ok_or_else(|| AspError::Untraceable(a.to_string()))?;
                    let row = coerce_row(&a.args[1..], &sorts);
                    if row.iter().zip(base).any(|(v, b)| !v.is_null() && v != b) {
                        return Err(AspError::Untraceable(a.to_string()));
                    }
                    // Versions of one tuple nulled by different rules merge.
                    match rows.get_mut(&tid) {
                        Some(prev) => {
                            for (p, r) in prev.iter_mut().zip(row) {
                                if r.is_null() {
                                    *p = Value::Null;
                                }
                            }
                        }
                        None => {
                            rows.insert(tid, row);
                        }
                    }
                }
                for (tid, row) in rows {
                    out.insert(&rel.name, tid, row)?;
                }
            }
            TidMode::Omitted => {
                let rows: Vec<Vec<Value>> = kept.iter().map(|a| coerce_row(&a.args, &sorts)).collect();
                for (tid, base) in d.tuples(&rel.name) {
                    let mut matches = rows.iter().filter(|r| {
                        r.iter().zip(base).all(|(v, b)| v.is_null() || v == b)
                    });
                    let row = match (matches.next(), matches.next()) {
                        (Some(r), None) => r,
                        _ => {
                            let shown: Vec<String> = base.iter().map(|v| v.to_string()).collect();
                            return Err(AspError::Untraceable(format!(
                                "{}({})",
                                name,
                                shown.join(",")
                            )));
                        }
                    };
                    out.insert(&rel.name, tid, row.clone())?;
                }
            }
        }
    }
    Ok(out)
}

/// Each model's instance, flagged by whether its change set is
/// inclusion-minimal among all of them. A tuple that plays several roles in
/// a view body can make a model null more cells than a secrecy instance
/// needs, even though the model is minimal as a set of atoms.
fn project_models(
    d: &Instance,
    tids: TidMode,
    models: &[BTreeSet<GroundAtom>],
) -> Result<Vec<(SecrecySolution, bool)>, AspError> {
    let mut sols = Vec::with_capacity(models.len());
    for m in models {
        let instance = model_to_instance(d, tids, m)?;
        let changes = diff_changes(d, &instance)?;
        sols.push(SecrecySolution { changes, instance });
    }
    let minimal: Vec<bool> = sols
        .iter()
        .map(|s| !sols.iter().any(|o| o.changes != s.changes && o.changes.is_subset(&s.changes)))
        .collect();
    Ok(sols.into_iter().zip(minimal).collect())
}

/// Secrecy instances read off answer sets: the inclusion-minimal change
/// sets among the models' projections, sorted and without repeats.
pub fn models_to_instances(
    d: &Instance,
    tids: TidMode,
    models: &[BTreeSet<GroundAtom>],
) -> Result<Vec<SecrecySolution>, AspError> {
    let mut out: Vec<SecrecySolution> = project_models(d, tids, models)?
        .into_iter()
        .filter_map(|(s, keep)| keep.then_some(s))
        .collect();
    out.sort_by(|a, b| a.changes.cmp(&b.changes));
    out.dedup_by(|a, b| a.changes == b.changes);
    Ok(out)
}

/// Secrecy instances computed through the program and the built-in solver,
/// sorted by change set.
pub fn asp_secrecy_instances(
    d: &Instance,
    views: &[ViewDef],
    popts: ProgramOptions,
    sopts: SolveOptions,
) -> Result<Vec<SecrecySolution>, AspError> {
    let p = compile_program(d, views, popts)?;
    let gp = ground(&p)?;
    let models: Vec<BTreeSet<GroundAtom>> = stable_models(&gp, sopts)?
        .iter()
        .map(|m| model_atoms(&gp, m))
        .collect();
    models_to_instances(d, popts.tids, &models)
}

/// Sorts of the free variables of `q`, taken from the first atom position
/// each occurs in.
fn free_sorts(d: &Instance, q: &Query) -> Vec<Sort> {
    q.free
        .iter()
        .map(|x| {
            q.atoms
                .iter()
                .find_map(|a| {
                    let pos = a.args.iter().position(|t| matches!(t, Term::Var(v) if v == x))?;
                    d.schema().get(&a.predicate)?.sort_at(pos)
                })
                .unwrap_or(Sort::Any)
        })
        .collect()
}

/// Answers of `q` (the `ans` atoms) in every answer set whose instance is
/// a secrecy instance.
pub fn cautious_from_models(
    d: &Instance,
    tids: TidMode,
    q: &Query,
    models: &[BTreeSet<GroundAtom>],
) -> Result<AnswerSet, AspError> {
    let sorts = free_sorts(d, q);
    let mut acc: Option<AnswerSet> = None;
    let projected = project_models(d, tids, models)?;
    for (m, _) in models.iter().zip(projected).filter(|(_, (_, keep))| *keep) {
        let rows = m
            .iter()
            .filter(|a| a.predicate == ANSWER_PREDICATE && a.args.len() == q.free.len())
            .map(|a| coerce_row(&a.args, &sorts));
        let here = AnswerSet::from_rows(q.free.len(), rows);
        acc = Some(match acc {
            None => here,
            Some(prev) => prev.intersection(&here),
        });
    }
    acc.ok_or(AspError::NoStableModel)
}

/// The secrecy program extended with the query rule.
pub fn compile_with_query(
    d: &Instance,
    views: &[ViewDef],
    q: &Query,
    popts: ProgramOptions,
) -> Result<AnnotatedProgram, AspError> {
    let mut p = compile_program(d, views, popts)?;
    let rule = compile_query_program(q, popts);
    rule.check_safety()?;
    p.rules.push(rule);
    Ok(p)
}

/// Cautious answers of `q` under the secrecy program, with the built-in
/// solver.
pub fn cautious_answers(
    d: &Instance,
    views: &[ViewDef],
    q: &Query,
    popts: ProgramOptions,
    sopts: SolveOptions,
) -> Result<AnswerSet, AspError> {
    let p = compile_with_query(d, views, q, popts)?;
    let gp = ground(&p)?;
    let models: Vec<BTreeSet<GroundAtom>> = stable_models(&gp, sopts)?
        .iter()
        .map(|m| model_atoms(&gp, m))
        .collect();
    cautious_from_models(d, popts.tids, q, &models)
}
