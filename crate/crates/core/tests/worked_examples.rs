mod common;

use std::collections::BTreeSet;

use common::{int_rows, load, query, rows, view};
use secview::answers::{check_no_leakage, secrecy_answer_instance, secret_answers};
use secview::asp::{
    compile_program, compile_query_program, export_program, ground, stable_models,
    to_denial_constraints, Dialect, ProgramOptions, SolveOptions, TidMode,
};
use secview::eval::{eval_classical, eval_n, query_relevant_vars, rewrite_query};
use secview::instances::{
    change_sets, enumerate_secrecy_instances, instance_leq_d, EnumOptions, EnumerationMode,
};
use secview::qlang::parse_facts;
use secview::secrecy::{attr_sets, is_admissible, is_admissible_by_sentence, NullSentence};
use secview::{Cell, ChangeSet, Instance, Value};

const RS_SYM: &str = "relation R(a:sym,b:sym). relation S(b:sym,c:sym).";

fn sym_join() -> (std::sync::Arc<secview::Schema>, Instance) {
    load(RS_SYM, "R(a,b). R(c,d). R(e,null). S(b,f). S(d,g). S(null,j).")
}

fn int_with_nulls() -> (std::sync::Arc<secview::Schema>, Instance) {
    load(
        "relation R(a:int,b:int,c:int). relation S(b:int).",
        "R(1,1,1). R(2,null,null). R(null,3,3). S(null). S(1). S(3).",
    )
}

fn sql_cases() -> (std::sync::Arc<secview::Schema>, Instance) {
    load(
        RS_SYM,
        "R(a,b). R(a,c). R(d,null). R(d,e). R(u,u). R(v,null). R(v,r). R(null,null).
         S(b,h). S(null,s). S(l,m).",
    )
}

const PR: &str = "relation P(a:int,b:int). relation R(b:int,c:int).";

fn join_pair() -> (std::sync::Arc<secview::Schema>, Instance) {
    load(PR, "P(1,2). R(2,1).")
}

fn two_pairs() -> (std::sync::Arc<secview::Schema>, Instance) {
    load(PR, "P(1,2). P(3,4). R(2,1). R(3,3).")
}

fn cs(cells: &[(&str, u32, usize)]) -> ChangeSet {
    cells.iter().map(|(r, t, p)| Cell::new(*r, *t, *p)).collect()
}

#[test]
fn join_query_classical_and_null_semantics() {
    let (s, d) = sym_join();
    let q = query(&s, "?(X,Z) :- R(X,Y), S(Y,Z).");
    assert_eq!(eval_classical(&d, &q).unwrap().rows, rows(&[&["a", "f"], &["c", "g"], &["e", "j"]]));
    assert_eq!(eval_n(&d, &q).unwrap().rows, rows(&[&["a", "f"], &["c", "g"]]));
}

#[test]
fn non_relevant_free_variable_may_be_null() {
    let (s, d) = int_with_nulls();
    let q = query(&s, "?(X) :- R(X,Y,Z), S(Y), Y > 2.");
    let rel: Vec<String> = query_relevant_vars(&q).into_iter().collect();
    assert_eq!(rel, vec!["Y".to_string()]);
    assert_eq!(eval_n(&d, &q).unwrap().rows, int_rows(&[&[None]]));
    assert_eq!(eval_classical(&d, &rewrite_query(&q)).unwrap().rows, int_rows(&[&[None]]));
}

#[test]
fn sql_null_behaviour() {
    let (s, d) = sql_cases();
    let n = |text: &str| eval_n(&d, &query(&s, text)).unwrap().rows;
    // (b)
    assert_eq!(
        n("?(X,Y) :- R(X,Y), isnull(Y)."),
        rows(&[&["d", "null"], &["v", "null"], &["null", "null"]])
    );
    // (d)
    assert_eq!(
        n("?(X,Y) :- R(X,Y), isnotnull(Y)."),
        rows(&[&["a", "b"], &["a", "c"], &["d", "e"], &["u", "u"], &["v", "r"]])
    );
    // (e)
    assert_eq!(n("?(X,Y) :- R(X,Y), X = Y."), rows(&[&["u", "u"]]));
    // (f)
    assert_eq!(
        n("?(X,Y) :- R(X,Y), X != Y."),
        rows(&[&["a", "b"], &["a", "c"], &["d", "e"], &["v", "r"]])
    );
    // (g)
    assert_eq!(
        n("?(X,Y,X,Z) :- R(X,Y), R(X,Z), Y != Z."),
        rows(&[&["a", "b", "a", "c"], &["a", "c", "a", "b"]])
    );
    // (h)
    assert_eq!(n("?(X,Y,Z,T) :- R(X,Y), S(Z,T), Y = Z."), rows(&[&["a", "b", "b", "h"]]));
    // (j)
    assert_eq!(
        n("?(X,Y,Z,T) :- R(X,Y), S(Z,T), Y != Z."),
        rows(&[
            &["a", "c", "b", "h"],
            &["d", "e", "b", "h"],
            &["u", "u", "b", "h"],
            &["v", "r", "b", "h"],
            &["a", "b", "l", "m"],
            &["a", "c", "l", "m"],
            &["d", "e", "l", "m"],
            &["u", "u", "l", "m"],
            &["v", "r", "l", "m"],
        ])
    );
}

#[test]
fn view_attribute_sets() {
    let (s, _) = int_with_nulls();
    let v = view(&s, "Vs(X) :- R(X,Y,Z), S(Y), Y > 2.");
    let a = attr_sets(&v);
    let pos = |xs: &[(&str, usize)]| -> BTreeSet<(String, usize)> {
        xs.iter().map(|(r, p)| (r.to_string(), *p)).collect()
    };
    assert_eq!(a.combination, pos(&[("R", 2), ("S", 1)]));
    assert_eq!(a.secrecy, pos(&[("R", 1)]));
    assert_eq!(a.srelevant, pos(&[("R", 1), ("R", 2), ("S", 1)]));
}

#[test]
fn admissibility_of_the_example_instances() {
    let (s, d2) = int_with_nulls();
    let v = vec![view(&s, "Vs(X) :- R(X,Y,Z), S(Y), Y > 2.")];
    assert!(is_admissible(&d2, &v).unwrap());

    let (s, d) = join_pair();
    let v = vec![view(&s, "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.")];
    assert!(!is_admissible(&d, &v).unwrap());
    assert_eq!(
        NullSentence::of(&v[0]).to_string(),
        "∀X,Y,Z (P(X,Y) ∧ R(Y,Z) → Y = null ∨ (X = null ∧ Z = null) ∨ Y >= 3)"
    );
    for facts in [
        "P(null,2). R(2,null).",
        "P(1,null). R(2,1).",
        "P(1,2). R(null,1).",
        "P(1,null). R(null,1).",
    ] {
        let di = parse_facts(facts, &s).unwrap();
        assert!(is_admissible(&di, &v).unwrap(), "{facts}");
        assert!(is_admissible_by_sentence(&di, &v).unwrap(), "{facts}");
    }
}

#[test]
fn three_secrecy_instances_and_the_non_minimal_one() {
    let (s, d) = join_pair();
    let v = vec![view(&s, "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.")];
    let sols = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
    let expected: BTreeSet<ChangeSet> = [
        cs(&[("P", 1, 1), ("R", 1, 2)]),
        cs(&[("P", 1, 2)]),
        cs(&[("R", 1, 1)]),
    ]
    .into();
    assert_eq!(change_sets(&sols), expected);
    let exhaustive = enumerate_secrecy_instances(&d, &v, EnumOptions::mode(EnumerationMode::Exhaustive)).unwrap();
    assert_eq!(change_sets(&exhaustive), expected);

    let d3 = parse_facts("P(1,2). R(null,1).", &s).unwrap();
    let d4 = parse_facts("P(1,null). R(null,1).", &s).unwrap();
    assert!(!sols.iter().any(|x| x.instance == d4));
    assert!(instance_leq_d(&d, &d3, &d4).unwrap());
    assert!(!instance_leq_d(&d, &d4, &d3).unwrap());
    let d1 = parse_facts("P(null,2). R(2,null).", &s).unwrap();
    let d2 = parse_facts("P(1,null). R(2,1).", &s).unwrap();
    assert!(!instance_leq_d(&d, &d1, &d2).unwrap());
    assert!(!instance_leq_d(&d, &d2, &d1).unwrap());
}

#[test]
fn view_query_has_no_secret_answers() {
    let (s, d) = join_pair();
    let v = vec![view(&s, "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.")];
    let q = query(&s, "?(X,Z) :- P(X,Y), R(Y,Z), Y < 3.");
    let report = secret_answers(&d, &v, &q, EnumOptions::default()).unwrap();
    assert!(report.answers.is_empty());
    let per: BTreeSet<usize> = report.per_instance.iter().map(|(_, a)| a.len()).collect();
    assert_eq!(per, [0, 1].into());
    let rw = rewrite_query(&q);
    assert_eq!(rw.to_string(), "?(X,Z) :- P(X,Y), R(Y,Z), Y < 3, Y != null.");
}

#[test]
fn secret_answers_to_atomic_queries() {
    let (s, d) = two_pairs();
    let v = vec![view(&s, "Vs(X,Z) :- P(X,Y), R(Y,Z).")];
    let sols = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
    let listed: BTreeSet<Instance> = [
        "P(null,2). P(3,4). R(2,null). R(3,3).",
        "P(1,null). P(3,4). R(2,1). R(3,3).",
        "P(1,2). P(3,4). R(null,1). R(3,3).",
    ]
    .iter()
    .map(|f| parse_facts(f, &s).unwrap())
    .collect();
    let got: BTreeSet<Instance> = sols.iter().map(|x| x.instance.clone()).collect();
    assert_eq!(got, listed);

    let q1 = query(&s, "?(X,Y) :- P(X,Y).");
    let q2 = query(&s, "?(X,Y) :- R(X,Y).");
    let opts = EnumOptions::default();
    assert_eq!(secret_answers(&d, &v, &q1, opts).unwrap().answers.rows, int_rows(&[&[Some(3), Some(4)]]));
    assert_eq!(secret_answers(&d, &v, &q2, opts).unwrap().answers.rows, int_rows(&[&[Some(3), Some(3)]]));

    let dv = secrecy_answer_instance(&d, &v, opts).unwrap();
    assert_eq!(dv.to_string(), "@1 P(3,4).\n@1 R(3,3).\n");
    assert!(eval_n(&dv, &v[0].as_query()).unwrap().is_empty());
    assert_eq!(check_no_leakage(&d, &v, opts).unwrap(), None);
}

#[test]
fn secret_answers_shrink_when_data_is_added() {
    let (s, d) = load("relation P(a:sym). relation R(a:sym).", "P(a).");
    let v = vec![view(&s, "V(X) :- P(X), R(X).")];
    let q = query(&s, "?(X) :- P(X).");
    let opts = EnumOptions::default();
    let sols = enumerate_secrecy_instances(&d, &v, opts).unwrap();
    assert_eq!(sols.len(), 1);
    assert!(sols[0].changes.is_empty());
    assert_eq!(secret_answers(&d, &v, &q, opts).unwrap().answers.rows, rows(&[&["a"]]));
    let d2 = parse_facts("P(a). R(a).", &s).unwrap();
    assert!(secret_answers(&d2, &v, &q, opts).unwrap().answers.is_empty());
}

#[test]
fn nulls_introduced_for_privacy_look_like_original_ones() {
    let (s, d) = load(PR, "P(1,1).");
    let v = vec![view(&s, "Vs(X) :- P(X,Y), X = 1.")];
    let sols = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
    assert_eq!(sols.len(), 1);
    assert_eq!(sols[0].instance.to_string(), "@1 P(null,1).\n");
    let opts = EnumOptions::default();
    let q = query(&s, "?(X) :- P(X,Y), X = 1.");
    assert!(secret_answers(&d, &v, &q, opts).unwrap().answers.is_empty());
    let q2 = query(&s, "?(X) :- P(X,Y).");
    assert_eq!(secret_answers(&d, &v, &q2, opts).unwrap().answers.rows, int_rows(&[&[None]]));
}

#[test]
fn secrecy_program_and_its_stable_models() {
    let (s, d) = join_pair();
    let v = vec![view(&s, "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.")];
    let p = compile_program(&d, &v, ProgramOptions { tids: TidMode::Omitted }).unwrap();
    let text = export_program(&p, Dialect::Dlv);
    assert!(text.contains("p_s(X1,X2) :- p_t(X1,X2), not p_u(X1,X2)."), "{text}");
    assert!(text.contains("p_a(null,Y) v p_a(X,null) v r_a(null,Z) :- "), "{text}");

    let p = compile_program(&d, &v, ProgramOptions::default()).unwrap();
    let gp = ground(&p).unwrap();
    let constants: BTreeSet<Value> = gp.atoms.iter().flat_map(|a| a.args.iter().skip(1).cloned()).collect();
    assert_eq!(constants, [Value::Null, Value::Int(1), Value::Int(2)].into());
    let models = stable_models(&gp, SolveOptions::default()).unwrap();
    assert_eq!(models.len(), 3);
    let instances: BTreeSet<Instance> = models
        .iter()
        .map(|m| {
            secview::asp::model_to_instance(&d, TidMode::Explicit, &secview::asp::model_atoms(&gp, m)).unwrap()
        })
        .collect();
    let listed: BTreeSet<Instance> = ["P(1,2). R(null,1).", "P(1,null). R(2,1).", "P(null,2). R(2,null)."]
        .iter()
        .map(|f| parse_facts(f, &s).unwrap())
        .collect();
    assert_eq!(instances, listed);
}

#[test]
fn query_rule_uses_s_atoms_and_rewriting() {
    let (s, _) = join_pair();
    let q = query(&s, "?(X,Z) :- P(X,Y), R(Y,Z), Y < 3.");
    let r = compile_query_program(&q, ProgramOptions { tids: TidMode::Omitted });
    assert_eq!(r.to_string(), "ans(X,Z) :- p_s(X,Y), r_s(Y,Z), Y < 3, Y != null.");
}

#[test]
fn two_denial_constraints_for_two_head_variables() {
    let (s, _) = join_pair();
    let v = view(&s, "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.");
    let dcs: Vec<String> = to_denial_constraints(&v).iter().map(|d| d.to_string()).collect();
    assert_eq!(
        dcs,
        vec![
            "¬∃X,Y,Z (P(X,Y) ∧ R(Y,Z) ∧ Y < 3 ∧ X ≠ null)",
            "¬∃X,Y,Z (P(X,Y) ∧ R(Y,Z) ∧ Y < 3 ∧ Z ≠ null)",
        ]
    );
}
