//! Stable models of ground disjunctive programs.
//!
//! Candidates are enumerated by a DPLL search (two watched literals,
//! chronological backtracking) over a clausal encoding: every rule must be
//! satisfied and every true atom needs a rule with a true body whose other
//! head atoms are false. Each complete candidate is then checked for supportedness
//! and for minimality with respect to its reduct by a second search for a
//! strictly smaller model.

use std::collections::BTreeSet;

use super::ground::{GroundProgram, GroundRule};
use crate::error::AspError;

type Lit = u32;

fn pos_lit(v: usize) -> Lit {
    (v as u32) << 1
}

fn neg_lit(v: usize) -> Lit {
    ((v as u32) << 1) | 1
}

fn var_of(l: Lit) -> usize {
    (l >> 1) as usize
}

fn negate(l: Lit) -> Lit {
    l ^ 1
}

const UNSET: i8 = -1;

struct Sat {
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<usize>>,
    value: Vec<i8>,
    trail: Vec<Lit>,
    limits: Vec<usize>,
    qhead: usize,
    inconsistent: bool,
}

enum Flow {
    Continue,
    Stop,
}

impl Sat {
    fn new(nvars: usize) -> Self {
        Sat {
            clauses: Vec::new(),
            watches: vec![Vec::new(); nvars * 2],
            value: vec![UNSET; nvars],
            trail: Vec::new(),
            limits: Vec::new(),
            qhead: 0,
            inconsistent: false,
        }
    }

    fn lit_value(&self, l: Lit) -> i8 {
        match self.value[var_of(l)] {
            UNSET => UNSET,
            v => (v as u32 ^ (l & 1)) as i8,
        }
    }

    fn enqueue(&mut self, l: Lit) -> bool {
        match self.lit_value(l) {
            1 => true,
            0 => false,
            _ => {
                self.value[var_of(l)] = if l & 1 == 0 { 1 } else { 0 };
                self.trail.push(l);
                true
            }
        }
    }

    /// Adds a clause at decision level 0.
    fn add_clause(&mut self, mut c: Vec<Lit>) {
        c.sort_unstable();
        c.dedup();
        if c.windows(2).any(|w| w[0] == negate(w[1])) {
            return;
        }
        match c.len() {
            0 => self.inconsistent = true,
            1 => {
                if !self.enqueue(c[0]) {
                    self.inconsistent = true;
                }
            }
            _ => {
                let idx = self.clauses.len();
                self.watches[negate(c[0]) as usize].push(idx);
                self.watches[negate(c[1]) as usize].push(idx);
                self.clauses.push(c);
            }
        }
    }

    /// Unit propagation; false on conflict.
    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            // Clauses watching the literal that just became false.
            let falsified = negate(p);
            let mut ws = std::mem::take(&mut self.watches[p as usize]);
            let mut i = 0;
            let mut conflict = false;
            while i < ws.len() {
                let ci = ws[i];
                let clause = &mut self.clauses[ci];
                if clause[0] == falsified {
                    clause.swap(0, 1);
                }
                let first = clause[0];
                let first_val = match self.value[var_of(first)] {
                    UNSET => UNSET,
                    v => (v as u32 ^ (first & 1)) as i8,
                };
                if first_val == 1 {
                    i += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..clause.len() {
                    let l = clause[k];
                    let lv = match self.value[var_of(l)] {
                        UNSET => UNSET,
                        v => (v as u32 ^ (l & 1)) as i8,
                    };
                    if lv != 0 {
                        clause.swap(1, k);
                        let nw = negate(clause[1]) as usize;
                        self.watches[nw].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    ws.swap_remove(i);
                    continue;
                }
                if first_val == 0 {
                    conflict = true;
                    break;
                }
                let first = self.clauses[ci][0];
                self.enqueue(first);
                i += 1;
            }
            // Watches added for `p` while iterating went to other lists.
            let added = std::mem::take(&mut self.watches[p as usize]);
            ws.extend(added);
            self.watches[p as usize] = ws;
            if conflict {
                return false;
            }
        }
        true
    }

    fn new_level(&mut self) {
        self.limits.push(self.trail.len());
    }

    fn backtrack(&mut self) {
        let lim = self.limits.pop().expect("backtrack below level 0");
        while self.trail.len() > lim {
            let l = self.trail.pop().unwrap();
            self.value[var_of(l)] = UNSET;
        }
        self.qhead = lim;
    }

    /// Enumerates all assignments of `decisions` (false first) that
    /// propagate without conflict. `budget` counts decisions.
    fn search(
        &mut self,
        decisions: &[usize],
        from: usize,
        budget: &mut u64,
        leaf: &mut dyn FnMut(&Sat) -> Flow,
    ) -> Result<Flow, AspError> {
        let mut next = from;
        while next < decisions.len() && self.value[decisions[next]] != UNSET {
            next += 1;
        }
        if next == decisions.len() {
            return Ok(leaf(self));
        }
        let v = decisions[next];
        for lit in [neg_lit(v), pos_lit(v)] {
            if *budget == 0 {
                return Err(AspError::BoundExceeded { bound: 0 });
            }
            *budget -= 1;
            self.new_level();
            self.enqueue(lit);
            let flow = if self.propagate() {
                self.search(decisions, next + 1, budget, leaf)?
            } else {
                Flow::Continue
            };
            self.backtrack();
            if let Flow::Stop = flow {
                return Ok(Flow::Stop);
            }
        }
        Ok(Flow::Continue)
    }

    fn is_true(&self, v: usize) -> bool {
        self.value[v] == 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Upper bound on search decisions across candidate enumeration.
    pub max_decisions: u64,
    /// Stop after this many stable models.
    pub max_models: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_decisions: 1 << 20,
            max_models: None,
        }
    }
}

/// A stable model as a set of atom ids of the ground program.
pub type StableModel = BTreeSet<u32>;

fn is_supported(gp: &GroundProgram, m: &[bool]) -> bool {
    let mut supported = vec![false; gp.atoms.len()];
    for r in &gp.rules {
        let body = r.pos.iter().all(|&p| m[p as usize]) && r.neg.iter().all(|&n| !m[n as usize]);
        if !body {
            continue;
        }
        let true_heads: Vec<u32> = r.head.iter().copied().filter(|&h| m[h as usize]).collect();
        if true_heads.len() == 1 {
            supported[true_heads[0] as usize] = true;
        }
    }
    (0..gp.atoms.len()).all(|a| !m[a] || supported[a])
}

/// Whether some model of the reduct of `gp` wrt `m` is a strict subset of
/// `m`.
fn has_smaller_model(gp: &GroundProgram, m: &[bool], budget: &mut u64) -> Result<bool, AspError> {
    let members: Vec<usize> = (0..gp.atoms.len()).filter(|&a| m[a]).collect();
    if members.is_empty() {
        return Ok(false);
    }
    let mut local = vec![usize::MAX; gp.atoms.len()];
    for (i, &a) in members.iter().enumerate() {
        local[a] = i;
    }
    let mut sat = Sat::new(members.len());
    for r in &gp.rules {
        if r.neg.iter().any(|&n| m[n as usize]) || !r.pos.iter().all(|&p| m[p as usize]) {
            continue;
        }
        let mut c: Vec<Lit> = r.pos.iter().map(|&p| neg_lit(local[p as usize])).collect();
        c.extend(
            r.head
                .iter()
                .filter(|&&h| m[h as usize])
                .map(|&h| pos_lit(local[h as usize])),
        );
        sat.add_clause(c);
    }
    sat.add_clause((0..members.len()).map(neg_lit).collect());
    if sat.inconsistent || !sat.propagate() {
        return Ok(false);
    }
    let decisions: Vec<usize> = (0..members.len()).collect();
    let mut found = false;
    sat.search(&decisions, 0, budget, &mut |_| {
        found = true;
        Flow::Stop
    })?;
    Ok(found)
}

/// All stable models of a ground program, in the order the search finds
/// them (deterministic for a given program).
pub fn stable_models(gp: &GroundProgram, opts: SolveOptions) -> Result<Vec<StableModel>, AspError> {
    let n = gp.atoms.len();
    let nb = gp.rules.len();
    // Variables: atoms 0..n, one body variable per rule, then one support
    // variable per head atom of each disjunctive rule.
    let extra: usize = gp.rules.iter().filter(|r| r.head.len() > 1).map(|r| r.head.len()).sum();
    let mut sat = Sat::new(n + nb + extra);
    let body_var = |r: usize| n + r;
    let mut next_support = n + nb;
    let mut supports_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ri, r) in gp.rules.iter().enumerate() {
        let b = body_var(ri);
        let mut long = vec![pos_lit(b)];
        for &p in &r.pos {
            sat.add_clause(vec![neg_lit(b), pos_lit(p as usize)]);
            long.push(neg_lit(p as usize));
        }
        for &q in &r.neg {
            sat.add_clause(vec![neg_lit(b), neg_lit(q as usize)]);
            long.push(pos_lit(q as usize));
        }
        sat.add_clause(long);
        let mut c = vec![neg_lit(b)];
        c.extend(r.head.iter().map(|&h| pos_lit(h as usize)));
        sat.add_clause(c);
        if r.head.len() == 1 {
            supports_of[r.head[0] as usize].push(b);
            continue;
        }
        // A disjunctive rule supports `h` only when its other head atoms
        // are false.
        for &h in &r.head {
            let s = next_support;
            next_support += 1;
            sat.add_clause(vec![neg_lit(s), pos_lit(b)]);
            let mut back = vec![pos_lit(s), neg_lit(b)];
            for &o in r.head.iter().filter(|&&o| o != h) {
                sat.add_clause(vec![neg_lit(s), neg_lit(o as usize)]);
                back.push(pos_lit(o as usize));
            }
            sat.add_clause(back);
            supports_of[h as usize].push(s);
        }
    }
    for (a, supports) in supports_of.iter().enumerate() {
        let mut c = vec![neg_lit(a)];
        c.extend(supports.iter().map(|&s| pos_lit(s)));
        sat.add_clause(c);
    }
    if sat.inconsistent || !sat.propagate() {
        return Ok(Vec::new());
    }
    // Atoms in disjunctive heads or under negation are decided first; most
    // of the rest then follow by propagation.
    let mut choice = vec![false; n];
    for r in &gp.rules {
        if r.head.len() > 1 {
            r.head.iter().for_each(|&h| choice[h as usize] = true);
        }
        r.neg.iter().for_each(|&q| choice[q as usize] = true);
    }
    let mut decisions: Vec<usize> = (0..n).filter(|&a| choice[a]).collect();
    decisions.extend((0..n).filter(|&a| !choice[a]));
    let mut budget = opts.max_decisions;
    let mut models = Vec::new();
    let mut failure: Option<AspError> = None;
    let res = sat.search(&decisions, 0, &mut budget, &mut |s| {
        let m: Vec<bool> = (0..n).map(|a| s.is_true(a)).collect();
        if !is_supported(gp, &m) {
            return Flow::Continue;
        }
        let mut inner = opts.max_decisions;
        match has_smaller_model(gp, &m, &mut inner) {
            Ok(true) => Flow::Continue,
            Ok(false) => {
                models.push((0..n as u32).filter(|&a| m[a as usize]).collect());
                if opts.max_models.is_some_and(|k| models.len() >= k) {
                    Flow::Stop
                } else {
                    Flow::Continue
                }
            }
            Err(e) => {
                failure = Some(e);
                Flow::Stop
            }
        }
    });
    if let Some(e) = failure {
        return Err(bounded(e, opts.max_decisions));
    }
    res.map_err(|e| bounded(e, opts.max_decisions))?;
    Ok(models)
}

fn bounded(e: AspError, bound: u64) -> AspError {
    match e {
        AspError::BoundExceeded { .. } => AspError::BoundExceeded { bound },
        other => other,
    }
}

/// Checks the defining property directly: `m` satisfies every rule and no
/// strict subset satisfies the reduct. Exponential; for tests.
pub fn is_stable_brute_force(gp: &GroundProgram, m: &StableModel) -> bool {
    let holds = |r: &GroundRule, s: &dyn Fn(u32) -> bool| {
        !(r.pos.iter().all(|&p| s(p)) && r.neg.iter().all(|&n| !s(n))) || r.head.iter().any(|&h| s(h))
    };
    if !gp.rules.iter().all(|r| holds(r, &|a| m.contains(&a))) {
        return false;
    }
    let members: Vec<u32> = m.iter().copied().collect();
    assert!(members.len() < 24, "brute-force stability check on a large model");
    let reduct: Vec<&GroundRule> = gp
        .rules
        .iter()
        .filter(|r| r.neg.iter().all(|n| !m.contains(n)))
        .collect();
    for mask in 0u32..(1u32 << members.len()) - 1 {
        let sub: BTreeSet<u32> = members
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| *a)
            .collect();
        let ok = reduct.iter().all(|r| {
            !r.pos.iter().all(|p| sub.contains(p)) || r.head.iter().any(|h| sub.contains(h))
        });
        if ok {
            return false;
        }
    }
    true
}
