//! Information orders and secrecy instances.
//!
//! A secrecy instance is obtained from the base instance by nulling an
//! inclusion-minimal set of cells such that every view becomes null. Change
//! sets are compared by inclusion, which on correlated instances is the
//! same as comparing the instances themselves.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{EnumError, ModelError};
use crate::eval::{body_matches, Semantics};
use crate::model::{apply_changes, diff_changes, Cell, ChangeSet, Instance, Value};
use crate::qlang::{Builtin, Term, ViewDef};
use crate::secrecy::{is_admissible, view_relevant_vars, violations};

/// `t1` is at most as informative as `t2`: each position is equal or null
/// on the left.
pub fn tuple_leq(t1: &[Value], t2: &[Value]) -> Result<bool, ModelError> {
    if t1.len() != t2.len() {
        return Err(ModelError::LengthMismatch(t1.len(), t2.len()));
    }
    Ok(t1.iter().zip(t2).all(|(a, b)| a == b || a.is_null()))
}

/// `d1` is at least as close to `base` as `d2`, i.e. the cells nulled in
/// `d1` are a subset of those nulled in `d2`.
pub fn instance_leq_d(base: &Instance, d1: &Instance, d2: &Instance) -> Result<bool, ModelError> {
    let c1 = diff_changes(base, d1)?;
    let c2 = diff_changes(base, d2)?;
    Ok(c1.is_subset(&c2))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EnumerationMode {
    /// Every violating match of the base instance is broken at one of its
    /// combination cells or, when no head variable is relevant, by nulling
    /// its head cells. Cells under constants are never chosen.
    #[default]
    PaperMode,
    /// Any non-null cell may be nulled.
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumOptions {
    pub mode: EnumerationMode,
    /// Largest candidate set for the subset scan used with `isnull` views.
    pub max_cells: usize,
    /// Largest number of partial change sets the branching search visits.
    pub max_nodes: usize,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions {
            mode: EnumerationMode::PaperMode,
            max_cells: 16,
            max_nodes: 1 << 20,
        }
    }
}

impl EnumOptions {
    pub fn mode(mode: EnumerationMode) -> Self {
        EnumOptions {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecrecySolution {
    pub changes: ChangeSet,
    pub instance: Instance,
}

/// Cells that may be nulled under `mode`.
pub fn candidate_cells(
    d: &Instance,
    views: &[ViewDef],
    mode: EnumerationMode,
) -> Result<BTreeSet<Cell>, EnumError> {
    if mode == EnumerationMode::Exhaustive {
        return Ok(d.non_null_cells().into_iter().collect());
    }
    let mut out = BTreeSet::new();
    for v in views {
        let relevant = view_relevant_vars(v);
        for m in body_matches(d, &v.atoms, &v.phi, Semantics::Null)? {
            for (atom, &tid) in v.atoms.iter().zip(&m.tids) {
                for (i, t) in atom.args.iter().enumerate() {
                    let Some(x) = t.as_var() else { continue };
                    if relevant.contains(x) || v.head.iter().any(|h| h == x) {
                        let cell = Cell::new(atom.predicate.clone(), tid, i + 1);
                        if d.value(&cell).is_some_and(|val| !val.is_null()) {
                            out.insert(cell);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Views with `isnull` can gain matches when cells are nulled, which rules
/// out the violation-driven search.
fn is_monotone(views: &[ViewDef]) -> bool {
    views
        .iter()
        .all(|v| !v.phi.iter().any(|b| matches!(b, Builtin::IsNull(_))))
}

/// The cells one violating match offers for nulling, as sets of which a
/// solution must hit each: its relevant cells, joined in turn by each
/// non-null head cell when no head variable is relevant.
fn match_edges(d: &Instance, v: &ViewDef, relevant: &BTreeSet<String>, tids: &[u32]) -> Vec<BTreeSet<Cell>> {
    let mut combination = BTreeSet::new();
    let mut heads = BTreeSet::new();
    for (atom, &tid) in v.atoms.iter().zip(tids) {
        for (i, t) in atom.args.iter().enumerate() {
            let Some(x) = t.as_var() else { continue };
            let cell = Cell::new(atom.predicate.clone(), tid, i + 1);
            if d.value(&cell).is_none_or(Value::is_null) {
                continue;
            }
            if relevant.contains(x) {
                combination.insert(cell);
            } else if v.head.iter().any(|h| h == x) {
                heads.insert(cell);
            }
        }
    }
    if v.head.iter().any(|h| relevant.contains(h)) {
        return vec![combination];
    }
    heads
        .into_iter()
        .map(|h| {
            let mut e = combination.clone();
            e.insert(h);
            e
        })
        .collect()
}

/// Every edge of every violation of the base instance. A paper-mode
/// solution is a minimal set of cells meeting all of them.
fn violation_edges(d: &Instance, views: &[ViewDef]) -> Result<Vec<BTreeSet<Cell>>, EnumError> {
    let mut out = BTreeSet::new();
    for v in views {
        let relevant = view_relevant_vars(v);
        for m in violations(d, v)? {
            out.extend(match_edges(d, v, &relevant, &m.tids));
        }
    }
    Ok(out.into_iter().collect())
}

/// Cells of one violating match of which any admissible superset must
/// contain one: cells whose nulling breaks the match and, when no head
/// variable is relevant, the non-null head cells. Head cells are branched
/// on one at a time, since nulling one of them can also break another
/// match.
fn branch_cells(cur: &Instance, v: &ViewDef, relevant: &BTreeSet<String>, assignment_tids: &[u32]) -> Vec<Cell> {
    let mut singles = BTreeSet::new();
    let mut heads = BTreeSet::new();
    let head_relevant = v.head.iter().any(|h| relevant.contains(h));
    for (atom, &tid) in v.atoms.iter().zip(assignment_tids) {
        for (i, t) in atom.args.iter().enumerate() {
            let cell = Cell::new(atom.predicate.clone(), tid, i + 1);
            if cur.value(&cell).is_none_or(Value::is_null) {
                continue;
            }
            match t {
                Term::Var(x) if relevant.contains(x) => {
                    singles.insert(cell);
                }
                Term::Var(x) if v.head.contains(x) => {
                    heads.insert(cell);
                }
                Term::Const(_) => {
                    singles.insert(cell);
                }
                _ => {}
            }
        }
    }
    if !head_relevant {
        singles.extend(heads);
    }
    singles.into_iter().collect()
}

/// Where a partial change set still falls short.
enum Goal<'a> {
    /// Meet every edge.
    Edges(&'a [BTreeSet<Cell>]),
    /// Make every view null on the changed instance.
    Admissible(&'a [ViewDef], Vec<BTreeSet<String>>),
}

struct Search<'a> {
    base: &'a Instance,
    goal: Goal<'a>,
    seen: HashSet<ChangeSet>,
    found: BTreeSet<ChangeSet>,
    max_nodes: usize,
}

impl Search<'_> {
    /// Cells to branch on, or `None` when `cs` is a solution.
    fn open(&self, cs: &ChangeSet) -> Result<Option<Vec<Cell>>, EnumError> {
        match &self.goal {
            Goal::Edges(edges) => Ok(edges
                .iter()
                .find(|e| !e.iter().any(|c| cs.contains(c)))
                .map(|e| e.iter().cloned().collect())),
            Goal::Admissible(views, relevant) => {
                let cur = apply_changes(self.base, cs)?;
                for (v, rel) in views.iter().zip(relevant) {
                    if let Some(m) = violations(&cur, v)?.into_iter().next() {
                        return Ok(Some(branch_cells(&cur, v, rel, &m.tids)));
                    }
                }
                Ok(None)
            }
        }
    }

    fn run(&mut self, cs: ChangeSet) -> Result<(), EnumError> {
        if !self.seen.insert(cs.clone()) {
            return Ok(());
        }
        if self.seen.len() > self.max_nodes {
            return Err(EnumError::SearchExceeded {
                bound: self.max_nodes,
            });
        }
        // A superset of a found solution cannot be minimal.
        if self.found.iter().any(|f| f.is_subset(&cs)) {
            return Ok(());
        }
        match self.open(&cs)? {
            Some(options) => {
                for cell in options {
                    let mut next = cs.clone();
                    next.insert(cell);
                    self.run(next)?;
                }
            }
            None => {
                self.found.retain(|f| !cs.is_subset(f));
                self.found.insert(cs);
            }
        }
        Ok(())
    }
}

fn subsets_increasing(
    base: &Instance,
    views: &[ViewDef],
    cells: &[Cell],
) -> Result<Vec<ChangeSet>, EnumError> {
    let n = cells.len();
    let mut kept: Vec<ChangeSet> = Vec::new();
    let mut by_size: Vec<Vec<u32>> = vec![Vec::new(); n + 1];
    for mask in 0u32..(1u32 << n) {
        by_size[mask.count_ones() as usize].push(mask);
    }
    let mut kept_masks: Vec<u32> = Vec::new();
    for level in by_size {
        for mask in level {
            if kept_masks.iter().any(|k| k & mask == *k) {
                continue;
            }
            let cs: ChangeSet = (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| cells[i].clone())
                .collect();
            if is_admissible(&apply_changes(base, &cs)?, views)? {
                kept_masks.push(mask);
                kept.push(cs);
            }
        }
    }
    Ok(kept)
}

fn verify_minimal(
    base: &Instance,
    views: &[ViewDef],
    sets: &BTreeSet<ChangeSet>,
    edges: Option<&[BTreeSet<Cell>]>,
    monotone: bool,
) -> Result<(), EnumError> {
    for cs in sets {
        assert!(
            is_admissible(&apply_changes(base, cs)?, views)?,
            "secrecy solution {cs} is not admissible"
        );
        assert!(
            !sets.iter().any(|o| o != cs && o.is_subset(cs)),
            "secrecy solution {cs} is not inclusion-minimal among the results"
        );
        if !monotone {
            continue;
        }
        for c in cs.iter() {
            let smaller: ChangeSet = cs.iter().filter(|x| *x != c).cloned().collect();
            let still = match edges {
                Some(edges) => edges.iter().all(|e| e.iter().any(|x| smaller.contains(x))),
                None => is_admissible(&apply_changes(base, &smaller)?, views)?,
            };
            assert!(!still, "secrecy solution {cs} stays a solution without {c}");
        }
    }
    Ok(())
}

/// All secrecy instances of `d` with respect to `views`, sorted by change
/// set.
///
/// In paper mode a solution is a minimal set of cells meeting every
/// violation of `d` at a cell the secrecy program can null. Exhaustive mode
/// asks for minimal admissibility over all cells, which also admits nulling
/// cells matched by constants. The two agree when view bodies have no
/// constants. Views with `isnull` fall back to a subset scan over the
/// candidate cells.
pub fn enumerate_secrecy_instances(
    d: &Instance,
    views: &[ViewDef],
    opts: EnumOptions,
) -> Result<Vec<SecrecySolution>, EnumError> {
    let monotone = is_monotone(views);
    let mut edges = None;
    let sets: BTreeSet<ChangeSet> = if monotone {
        let goal = match opts.mode {
            EnumerationMode::PaperMode => Goal::Edges(edges.insert(violation_edges(d, views)?)),
            EnumerationMode::Exhaustive => Goal::Admissible(views, views.iter().map(view_relevant_vars).collect()),
        };
        let mut s = Search {
            base: d,
            goal,
            seen: HashSet::new(),
            found: BTreeSet::new(),
            max_nodes: opts.max_nodes,
        };
        s.run(ChangeSet::new())?;
        s.found
    } else {
        let candidates = candidate_cells(d, views, opts.mode)?;
        if candidates.len() > opts.max_cells {
            return Err(EnumError::BoundExceeded {
                cells: candidates.len(),
                bound: opts.max_cells,
            });
        }
        let cells: Vec<Cell> = candidates.into_iter().collect();
        subsets_increasing(d, views, &cells)?.into_iter().collect()
    };
    if sets.is_empty() {
        return Err(EnumError::NoAdmissibleInstance);
    }
    verify_minimal(d, views, &sets, edges.as_deref(), monotone)?;
    sets.into_iter()
        .map(|changes| {
            let instance = apply_changes(d, &changes)?;
            Ok(SecrecySolution { changes, instance })
        })
        .collect()
}

/// Brute force over every subset of the non-null cells, smallest first.
/// Independent of the search above; meant as a test oracle.
pub fn oracle_secrecy_instances(
    d: &Instance,
    views: &[ViewDef],
    max_cells: usize,
) -> Result<Vec<SecrecySolution>, EnumError> {
    let cells = d.non_null_cells();
    if cells.len() > max_cells {
        return Err(EnumError::BoundExceeded {
            cells: cells.len(),
            bound: max_cells,
        });
    }
    let mut sets = subsets_increasing(d, views, &cells)?;
    if sets.is_empty() {
        return Err(EnumError::NoAdmissibleInstance);
    }
    sets.sort();
    sets.into_iter()
        .map(|changes| {
            let instance = apply_changes(d, &changes)?;
            Ok(SecrecySolution { changes, instance })
        })
        .collect()
}

/// Groups solutions by change set for quick comparison in tests and
/// reports.
pub fn change_sets(sols: &[SecrecySolution]) -> BTreeSet<ChangeSet> {
    sols.iter().map(|s| s.changes.clone()).collect()
}

/// Per relation, the cells of a change set; used by reports.
pub fn cells_by_relation(cs: &ChangeSet) -> BTreeMap<&str, Vec<&Cell>> {
    let mut out: BTreeMap<&str, Vec<&Cell>> = BTreeMap::new();
    for c in cs.iter() {
        out.entry(c.relation.as_str()).or_default().push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlang::{parse_facts, parse_schema, parse_view};
    use std::sync::Arc;

    fn setup(schema: &str, facts: &str, view: &str) -> (Instance, Vec<ViewDef>) {
        let s = Arc::new(parse_schema(schema).unwrap());
        let d = parse_facts(facts, &s).unwrap();
        let v = parse_view(view, &s).unwrap();
        (d, vec![v])
    }

    fn cs(cells: &[(&str, u32, usize)]) -> ChangeSet {
        cells.iter().map(|(r, t, p)| Cell::new(*r, *t, *p)).collect()
    }

    const PR: &str = "relation P(a:int,b:int). relation R(a:int,b:int).";

    #[test]
    fn tuple_order() {
        let a = Value::sym("a");
        let b = Value::sym("b");
        assert!(tuple_leq(&[a.clone(), Value::Null], &[a.clone(), b.clone()]).unwrap());
        assert!(tuple_leq(&[a.clone(), b.clone()], &[a.clone(), b.clone()]).unwrap());
        assert!(!tuple_leq(&[a.clone(), b.clone()], &[a.clone(), Value::Null]).unwrap());
        assert!(tuple_leq(&[a.clone()], &[a, b]).is_err());
    }

    #[test]
    fn three_solutions_for_join_view() {
        let (d, v) = setup(PR, "P(1,2). R(2,1).", "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.");
        let cand = candidate_cells(&d, &v, EnumerationMode::PaperMode).unwrap();
        assert_eq!(cand.len(), 4);
        let sols = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
        let expected: BTreeSet<ChangeSet> = [
            cs(&[("P", 1, 1), ("R", 1, 2)]),
            cs(&[("P", 1, 2)]),
            cs(&[("R", 1, 1)]),
        ]
        .into();
        assert_eq!(change_sets(&sols), expected);
        let oracle = oracle_secrecy_instances(&d, &v, 16).unwrap();
        assert_eq!(change_sets(&oracle), expected);
    }

    #[test]
    fn order_on_instances() {
        let (d, _) = setup(PR, "P(1,2). R(2,1).", "Vs(X) :- P(X,Y).");
        let d3 = apply_changes(&d, &cs(&[("R", 1, 1)])).unwrap();
        let d4 = apply_changes(&d, &cs(&[("R", 1, 1), ("P", 1, 1)])).unwrap();
        assert!(instance_leq_d(&d, &d3, &d4).unwrap());
        assert!(!instance_leq_d(&d, &d4, &d3).unwrap());
        assert!(instance_leq_d(&d, &d3, &d3).unwrap());
        let d1 = apply_changes(&d, &cs(&[("P", 1, 1), ("R", 1, 2)])).unwrap();
        let d2 = apply_changes(&d, &cs(&[("P", 1, 2)])).unwrap();
        assert!(!instance_leq_d(&d, &d1, &d2).unwrap());
        assert!(!instance_leq_d(&d, &d2, &d1).unwrap());
    }

    #[test]
    fn admissible_instance_is_its_own_solution() {
        let (d, v) = setup(
            "relation P(a:sym). relation R(a:sym).",
            "P(a).",
            "V(X) :- P(X), R(X).",
        );
        let sols = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
        assert_eq!(sols.len(), 1);
        assert!(sols[0].changes.is_empty());
        assert_eq!(sols[0].instance, d);
    }

    #[test]
    fn constant_in_view_body_separates_modes() {
        let (d, v) = setup(PR, "P(1,2).", "Vs(X) :- P(X,2).");
        let paper = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
        assert_eq!(change_sets(&paper), [cs(&[("P", 1, 1)])].into());
        let exh =
            enumerate_secrecy_instances(&d, &v, EnumOptions::mode(EnumerationMode::Exhaustive))
                .unwrap();
        let both: BTreeSet<ChangeSet> = [cs(&[("P", 1, 1)]), cs(&[("P", 1, 2)])].into();
        assert_eq!(change_sets(&exh), both);
        assert_eq!(change_sets(&oracle_secrecy_instances(&d, &v, 16).unwrap()), both);
    }

    #[test]
    fn isnull_views_use_the_subset_scan() {
        // Nulling P[2] of the first tuple creates a new match.
        let (d, v) = setup(
            "relation P(a:int,b:int).",
            "P(1,null). P(2,3).",
            "V(X) :- P(X,Y), isnull(Y).",
        );
        let sols = enumerate_secrecy_instances(&d, &v, EnumOptions::default()).unwrap();
        assert_eq!(change_sets(&sols), [cs(&[("P", 1, 1)])].into());
        assert_eq!(
            change_sets(&oracle_secrecy_instances(&d, &v, 16).unwrap()),
            [cs(&[("P", 1, 1)])].into()
        );
    }

    #[test]
    fn oracle_bound() {
        let (d, v) = setup(PR, "P(1,2). P(3,4). R(5,6).", "Vs(X) :- P(X,Y).");
        assert!(matches!(
            oracle_secrecy_instances(&d, &v, 4),
            Err(EnumError::BoundExceeded { cells: 6, bound: 4 })
        ));
    }
}
