//! Secret answers: answers that hold in every secrecy instance.

use std::sync::Arc;

use crate::error::EnumError;
use crate::eval::{eval_n, AnswerSet};
use crate::instances::{enumerate_secrecy_instances, EnumOptions, SecrecySolution};
use crate::model::{ChangeSet, Instance};
use crate::qlang::{Query, ViewDef};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretAnswerReport {
    pub query: Query,
    pub answers: AnswerSet,
    pub per_instance: Vec<(ChangeSet, AnswerSet)>,
}

/// Intersection of the null-semantics answers over the given solutions.
pub fn secret_answers_over(
    sols: &[SecrecySolution],
    q: &Query,
) -> Result<SecretAnswerReport, EnumError> {
    let mut per_instance = Vec::with_capacity(sols.len());
    let mut answers: Option<AnswerSet> = None;
    for s in sols {
        let a = eval_n(&s.instance, q)?;
        answers = Some(match answers {
            None => a.clone(),
            Some(acc) => acc.intersection(&a),
        });
        per_instance.push((s.changes.clone(), a));
    }
    let answers = answers.ok_or(EnumError::NoAdmissibleInstance)?;
    debug_assert!(per_instance.iter().all(|(_, a)| answers.is_subset(a)));
    Ok(SecretAnswerReport {
        query: q.clone(),
        answers,
        per_instance,
    })
}

pub fn secret_answers(
    d: &Instance,
    views: &[ViewDef],
    q: &Query,
    opts: EnumOptions,
) -> Result<SecretAnswerReport, EnumError> {
    let sols = enumerate_secrecy_instances(d, views, opts)?;
    secret_answers_over(&sols, q)
}

/// The instance holding, for every relation, the secret answers to its open
/// atomic query. Tuple ids are fresh and follow the row order.
pub fn secrecy_answer_instance(
    d: &Instance,
    views: &[ViewDef],
    opts: EnumOptions,
) -> Result<Instance, EnumError> {
    let sols = enumerate_secrecy_instances(d, views, opts)?;
    secrecy_answer_instance_over(d.schema().clone(), &sols)
}

pub fn secrecy_answer_instance_over(
    schema: Arc<crate::model::Schema>,
    sols: &[SecrecySolution],
) -> Result<Instance, EnumError> {
    let mut out = Instance::empty(schema.clone());
    for rel in schema.relations() {
        let q = Query::atomic(&rel.name, rel.arity());
        let report = secret_answers_over(sols, &q)?;
        for row in report.answers.rows {
            out.push(&rel.name, row)?;
        }
    }
    Ok(out)
}

/// A view whose two sides of the leakage equation differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeakageWitness {
    pub view: String,
    /// Secret answers to the view's own query.
    pub secret: AnswerSet,
    /// The view evaluated on the secrecy answer instance.
    pub on_answer_instance: AnswerSet,
}

/// For every view, compares its secret answers with its extension on the
/// secrecy answer instance. Returns the first mismatch, if any.
pub fn check_no_leakage(
    d: &Instance,
    views: &[ViewDef],
    opts: EnumOptions,
) -> Result<Option<LeakageWitness>, EnumError> {
    let sols = enumerate_secrecy_instances(d, views, opts)?;
    let dv = secrecy_answer_instance_over(d.schema().clone(), &sols)?;
    for v in views {
        let q = v.as_query();
        let secret = secret_answers_over(&sols, &q)?.answers;
        let on_answer_instance = eval_n(&dv, &q)?;
        if secret != on_answer_instance {
            return Ok(Some(LeakageWitness {
                view: v.name.clone(),
                secret,
                on_answer_instance,
            }));
        }
    }
    Ok(None)
}
