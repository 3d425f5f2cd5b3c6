use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::ast::{Atom, Builtin, CmpOp, Query, Term, ViewDef};
use super::lexer::{tokenize, Spanned, Tok};
use crate::error::ParseError;
use crate::model::{Column, Instance, RelationSchema, Schema, Sort, Tid, Value};

#[derive(Clone, Debug)]
enum RawTerm {
    Var(String),
    Num(String),
    Ident(String),
    Str(String),
    Null,
}

#[derive(Clone, Debug)]
enum RawLit {
    Atom { predicate: String, args: Vec<RawTerm> },
    Cmp { op: CmpOp, left: RawTerm, right: RawTerm },
    IsNull(RawTerm),
    IsNotNull(RawTerm),
}

struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

fn is_var_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_uppercase() || c == '_')
}

impl Cursor {
    fn new(src: &str) -> Result<Self, ParseError> {
        let toks = tokenize(src)?;
        let lines = src.split('\n').count().max(1);
        let last_col = src.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Ok(Cursor {
            toks,
            pos: 0,
            end: (lines, last_col),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map_or(self.end, |s| (s.line, s.col));
        ParseError::syntax(line, col, msg)
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        match self.peek() {
            Some(t) => self.err(format!("expected {wanted}, found {}", t.describe())),
            None => self.err(format!("expected {wanted}, found end of input")),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.describe()))
        }
    }

    fn ident(&mut self, wanted: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(wanted)),
        }
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let t = match self.peek() {
            Some(Tok::Ident(s)) if s == "null" => RawTerm::Null,
            Some(Tok::Ident(s)) if is_var_name(s) => RawTerm::Var(s.clone()),
            Some(Tok::Ident(s)) => RawTerm::Ident(s.clone()),
            Some(Tok::Number(n)) => RawTerm::Num(n.clone()),
            Some(Tok::Str(s)) => RawTerm::Str(s.clone()),
            _ => return Err(self.unexpected("a term")),
        };
        self.pos += 1;
        Ok(t)
    }

    fn term_list(&mut self) -> Result<Vec<RawTerm>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat(&Tok::RParen) {
                return Ok(out);
            }
            if !self.eat(&Tok::Comma) {
                return Err(self.unexpected("`,` or `)`"));
            }
        }
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek()? {
            Tok::Eq => CmpOp::Eq,
            Tok::Neq => CmpOp::Neq,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    fn literal(&mut self) -> Result<RawLit, ParseError> {
        if let (Some(Tok::Ident(name)), Some(Tok::LParen)) = (self.peek(), self.peek_at(1)) {
            let name = name.clone();
            let lower = name.to_ascii_lowercase();
            let start = self.pos;
            self.pos += 1;
            let args = self.term_list()?;
            return match lower.as_str() {
                "isnull" | "isnotnull" => {
                    if args.len() != 1 {
                        self.pos = start;
                        return Err(self.err(format!("`{name}` takes exactly one argument")));
                    }
                    let t = args.into_iter().next().unwrap();
                    Ok(if lower == "isnull" {
                        RawLit::IsNull(t)
                    } else {
                        RawLit::IsNotNull(t)
                    })
                }
                _ => Ok(RawLit::Atom {
                    predicate: name,
                    args,
                }),
            };
        }
        let left = self.term()?;
        let op = self
            .cmp_op()
            .ok_or_else(|| self.unexpected("a comparison operator"))?;
        let right = self.term()?;
        Ok(RawLit::Cmp { op, left, right })
    }

    fn body(&mut self) -> Result<Vec<RawLit>, ParseError> {
        let mut lits = vec![self.literal()?];
        while self.eat(&Tok::Comma) {
            lits.push(self.literal()?);
        }
        Ok(lits)
    }
}

fn coerce_column(raw: &RawTerm, sort: Sort, predicate: &str, pos: usize) -> Result<Value, ParseError> {
    let bad = |value: Value| ParseError::ConstantSort {
        predicate: predicate.to_owned(),
        pos,
        sort,
        value,
    };
    Ok(match (raw, sort) {
        (RawTerm::Null, _) => Value::Null,
        (RawTerm::Num(n), Sort::Int | Sort::Any) => Value::Int(
            n.parse()
                .map_err(|_| bad(Value::Sym(n.clone())))?,
        ),
        (RawTerm::Num(n), Sort::Sym) => Value::Sym(n.clone()),
        (RawTerm::Num(n), Sort::Str) => Value::Str(n.clone()),
        (RawTerm::Ident(s), Sort::Sym | Sort::Any) => Value::Sym(s.clone()),
        (RawTerm::Ident(s), Sort::Str) => Value::Str(s.clone()),
        (RawTerm::Ident(s), Sort::Int) => return Err(bad(Value::Sym(s.clone()))),
        (RawTerm::Str(s), Sort::Str | Sort::Any) => Value::Str(s.clone()),
        (RawTerm::Str(s), Sort::Int | Sort::Sym) => return Err(bad(Value::Str(s.clone()))),
        (RawTerm::Var(v), _) => unreachable!("variable {v} coerced as a constant"),
    })
}

/// Constants in built-ins take the sort suggested by the other operand when
/// that is possible; otherwise their lexical form decides.
fn coerce_loose(raw: &RawTerm, hint: Sort) -> Value {
    match (raw, hint) {
        (RawTerm::Null, _) => Value::Null,
        (RawTerm::Num(n), Sort::Sym) => Value::Sym(n.clone()),
        (RawTerm::Num(n), Sort::Str) => Value::Str(n.clone()),
        (RawTerm::Num(n), _) => n.parse().map_or_else(|_| Value::Sym(n.clone()), Value::Int),
        (RawTerm::Ident(s), Sort::Str) => Value::Str(s.clone()),
        (RawTerm::Ident(s), _) => Value::Sym(s.clone()),
        (RawTerm::Str(s), Sort::Sym) => Value::Sym(s.clone()),
        (RawTerm::Str(s), _) => Value::Str(s.clone()),
        (RawTerm::Var(v), _) => unreachable!("variable {v} coerced as a constant"),
    }
}

fn value_sort(v: &Value) -> Sort {
    match v {
        Value::Null => Sort::Any,
        Value::Int(_) => Sort::Int,
        Value::Sym(_) => Sort::Sym,
        Value::Str(_) => Sort::Str,
    }
}

struct Body {
    atoms: Vec<Atom>,
    builtins: Vec<Builtin>,
}

fn resolve_body(lits: Vec<RawLit>, schema: &Schema) -> Result<Body, ParseError> {
    let mut sorts: BTreeMap<String, Sort> = BTreeMap::new();
    let mut atoms = Vec::new();
    let mut raw_builtins = Vec::new();
    for lit in lits {
        match lit {
            RawLit::Atom { predicate, args } => {
                let rel = schema
                    .get(&predicate)
                    .ok_or_else(|| ParseError::UnknownPredicate(predicate.clone()))?;
                if rel.arity() != args.len() {
                    return Err(ParseError::AtomArity {
                        predicate,
                        expected: rel.arity(),
                        found: args.len(),
                    });
                }
                let mut terms = Vec::with_capacity(args.len());
                for (i, raw) in args.iter().enumerate() {
                    let sort = rel.columns[i].sort;
                    terms.push(match raw {
                        RawTerm::Var(v) => {
                            match sorts.get(v) {
                                Some(&prev) if prev != sort && prev != Sort::Any && sort != Sort::Any => {
                                    return Err(ParseError::SortConflict {
                                        var: v.clone(),
                                        first: prev,
                                        second: sort,
                                    })
                                }
                                Some(&prev) if prev != Sort::Any => {}
                                _ => {
                                    sorts.insert(v.clone(), sort);
                                }
                            }
                            Term::Var(v.clone())
                        }
                        c => Term::Const(coerce_column(c, sort, &predicate, i + 1)?),
                    });
                }
                atoms.push(Atom::new(predicate, terms));
            }
            other => raw_builtins.push(other),
        }
    }
    if atoms.is_empty() {
        return Err(ParseError::syntax(1, 1, "a body needs at least one database atom"));
    }
    let bound: BTreeSet<&str> = atoms.iter().flat_map(Atom::vars).collect();
    let sort_of = |t: &RawTerm| match t {
        RawTerm::Var(v) => sorts.get(v).copied().unwrap_or(Sort::Any),
        _ => Sort::Any,
    };
    let resolve = |t: &RawTerm, hint: Sort| -> Result<Term, ParseError> {
        match t {
            RawTerm::Var(v) if !bound.contains(v.as_str()) => {
                Err(ParseError::UnsafeVariable(v.clone()))
            }
            RawTerm::Var(v) => Ok(Term::Var(v.clone())),
            c => Ok(Term::Const(coerce_loose(c, hint))),
        }
    };
    let mut builtins = Vec::new();
    for lit in raw_builtins {
        let b = match lit {
            RawLit::Cmp { op, left, right } => {
                let l = resolve(&left, sort_of(&right))?;
                let r = resolve(&right, sort_of(&left))?;
                let b = Builtin::cmp(l, op, r);
                if op.is_order() {
                    for (raw, t) in [(&left, &b.terms()[0]), (&right, &b.terms()[1])] {
                        let s = match t {
                            Term::Var(_) => sort_of(raw),
                            Term::Const(c) => value_sort(c),
                        };
                        if !s.is_orderable() {
                            return Err(ParseError::OrderOnNonInt(b.to_string()));
                        }
                    }
                }
                b
            }
            RawLit::IsNull(t) => Builtin::IsNull(resolve(&t, sort_of(&t))?),
            RawLit::IsNotNull(t) => Builtin::IsNotNull(resolve(&t, sort_of(&t))?),
            RawLit::Atom { .. } => unreachable!(),
        };
        builtins.push(b);
    }
    Ok(Body { atoms, builtins })
}

fn head_vars(raw: Vec<RawTerm>, owner: &str) -> Result<Vec<String>, ParseError> {
    raw.into_iter()
        .map(|t| match t {
            RawTerm::Var(v) => Ok(v),
            _ => Err(ParseError::HeadConstant(owner.to_owned())),
        })
        .collect()
}

fn check_head_safe(head: &[String], atoms: &[Atom]) -> Result<(), ParseError> {
    let bound: BTreeSet<&str> = atoms.iter().flat_map(Atom::vars).collect();
    match head.iter().find(|v| !bound.contains(v.as_str())) {
        Some(v) => Err(ParseError::UnsafeVariable(v.clone())),
        None => Ok(()),
    }
}

/// Parses `relation NAME(col:sort, ...).` declarations.
pub fn parse_schema(src: &str) -> Result<Schema, ParseError> {
    let mut cur = Cursor::new(src)?;
    let mut schema = Schema::new();
    while !cur.at_end() {
        match cur.peek() {
            Some(Tok::Ident(k)) if k == "relation" => {
                cur.bump();
            }
            _ => return Err(cur.unexpected("`relation`")),
        }
        let name = cur.ident("a relation name")?;
        cur.expect(Tok::LParen)?;
        let mut columns = Vec::new();
        loop {
            let col = cur.ident("a column name")?;
            cur.expect(Tok::Colon)?;
            let sort_name = cur.ident("a sort (int, sym, str, any)")?;
            let sort = Sort::from_name(&sort_name).ok_or_else(|| {
                cur.pos -= 1;
                cur.err(format!("unknown sort `{sort_name}`"))
            })?;
            columns.push(Column { name: col, sort });
            if cur.eat(&Tok::RParen) {
                break;
            }
            if !cur.eat(&Tok::Comma) {
                return Err(cur.unexpected("`,` or `)`"));
            }
        }
        cur.eat(&Tok::Dot);
        schema.add(RelationSchema { name, columns })?;
    }
    Ok(schema)
}

/// Parses ground facts `[@tid] R(c1, ..., cn).`; tuples without an explicit
/// id get the next free id of their relation.
pub fn parse_facts(src: &str, schema: &Arc<Schema>) -> Result<Instance, ParseError> {
    let mut cur = Cursor::new(src)?;
    let mut inst = Instance::empty(schema.clone());
    while !cur.at_end() {
        let tid: Option<Tid> = if cur.eat(&Tok::At) {
            match cur.peek() {
                Some(Tok::Number(n)) => {
                    let t = n
                        .parse()
                        .map_err(|_| cur.err(format!("invalid tuple id `{n}`")))?;
                    cur.bump();
                    Some(t)
                }
                _ => return Err(cur.unexpected("a tuple id")),
            }
        } else {
            None
        };
        let predicate = cur.ident("a relation name")?;
        let args = cur.term_list()?;
        cur.eat(&Tok::Dot);
        let rel = schema
            .get(&predicate)
            .ok_or_else(|| ParseError::UnknownPredicate(predicate.clone()))?;
        if rel.arity() != args.len() {
            return Err(ParseError::AtomArity {
                predicate,
                expected: rel.arity(),
                found: args.len(),
            });
        }
        let mut values = Vec::with_capacity(args.len());
        for (i, raw) in args.iter().enumerate() {
            let raw = match raw {
                RawTerm::Var(v) => RawTerm::Ident(v.clone()),
                other => other.clone(),
            };
            values.push(coerce_column(&raw, rel.columns[i].sort, &predicate, i + 1)?);
        }
        match tid {
            Some(t) => inst.insert(&predicate, t, values)?,
            None => {
                inst.push(&predicate, values)?;
            }
        }
    }
    Ok(inst)
}

fn view_def(cur: &mut Cursor, schema: &Schema) -> Result<ViewDef, ParseError> {
    let name = cur.ident("a view name")?;
    let head = head_vars(cur.term_list()?, &name)?;
    cur.expect(Tok::If)?;
    let body = resolve_body(cur.body()?, schema)?;
    cur.eat(&Tok::Dot);
    check_head_safe(&head, &body.atoms)?;
    let mentions_null = body.builtins.iter().any(|b| {
        matches!(b, Builtin::Cmp { .. }) && b.mentions_null()
    }) || body
        .atoms
        .iter()
        .any(|a| a.args.iter().any(Term::is_null));
    if mentions_null {
        return Err(ParseError::NullComparisonInView(name));
    }
    Ok(ViewDef {
        name,
        head,
        atoms: body.atoms,
        phi: body.builtins,
    })
}

/// Parses one or more view definitions `Name(X, ...) :- body.`
pub fn parse_views(src: &str, schema: &Schema) -> Result<Vec<ViewDef>, ParseError> {
    let mut cur = Cursor::new(src)?;
    let mut views: Vec<ViewDef> = Vec::new();
    while !cur.at_end() {
        let v = view_def(&mut cur, schema)?;
        if views.iter().any(|w| w.name == v.name) {
            return Err(ParseError::DuplicateView(v.name));
        }
        views.push(v);
    }
    Ok(views)
}

/// Parses exactly one view definition.
pub fn parse_view(src: &str, schema: &Schema) -> Result<ViewDef, ParseError> {
    let mut cur = Cursor::new(src)?;
    let v = view_def(&mut cur, schema)?;
    if !cur.at_end() {
        return Err(cur.unexpected("end of input"));
    }
    Ok(v)
}

/// Parses a query `?(X, ...) :- body.`; `?() :- ...` is a boolean query.
pub fn parse_query(src: &str, schema: &Schema) -> Result<Query, ParseError> {
    let mut cur = Cursor::new(src)?;
    cur.expect(Tok::Question)?;
    let free = head_vars(cur.term_list()?, "?")?;
    cur.expect(Tok::If)?;
    let body = resolve_body(cur.body()?, schema)?;
    cur.eat(&Tok::Dot);
    if !cur.at_end() {
        return Err(cur.unexpected("end of input"));
    }
    check_head_safe(&free, &body.atoms)?;
    Ok(Query::new(free, body.atoms, body.builtins))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        parse_schema(
            "relation P(a:int, b:int). relation R(a:int, b:int).\n\
             relation E(name:sym, code:sym, note:str)",
        )
        .unwrap()
    }

    #[test]
    fn schema_lines() {
        let s = schema();
        assert_eq!(s.relations().len(), 3);
        assert_eq!(s.get("E").unwrap().sort_at(2), Some(Sort::Sym));
        assert!(parse_schema("relation P(a:real)").is_err());
        assert!(parse_schema("relation P(a:int) relation P(b:int)").is_err());
    }

    #[test]
    fn facts_with_and_without_ids() {
        let s = Arc::new(schema());
        let d = parse_facts("P(1,2). @5 P(3,null). P(4,4).\nE(ann, 001, \"x y\").", &s).unwrap();
        let tids: Vec<Tid> = d.tuples("P").map(|(t, _)| t).collect();
        assert_eq!(tids, vec![1, 5, 6]);
        assert_eq!(
            d.tuple("E", 1).unwrap(),
            &[Value::sym("ann"), Value::sym("001"), Value::str("x y")]
        );
        assert!(matches!(
            parse_facts("P(1, a).", &s),
            Err(ParseError::ConstantSort { .. })
        ));
        assert!(matches!(
            parse_facts("@1 P(1,1). @1 P(2,2).", &s),
            Err(ParseError::Model(_))
        ));
    }

    #[test]
    fn view_and_display() {
        let s = schema();
        let v = parse_view("Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.", &s).unwrap();
        assert_eq!(v.to_string(), "Vs(X,Z) :- P(X,Y), R(Y,Z), Y < 3.");
        assert_eq!(parse_view(&v.to_string(), &s).unwrap(), v);
    }

    #[test]
    fn query_forms() {
        let s = schema();
        let q = parse_query("?(X) :- P(X,Y), isnull(Y)", &s).unwrap();
        assert_eq!(q.builtins, vec![Builtin::IsNull(Term::var("Y"))]);
        let b = parse_query("?() :- P(X,Y), X <> 1.", &s).unwrap();
        assert!(b.is_boolean());
        assert_eq!(b.builtins[0].to_string(), "X != 1");
        let q = parse_query("?(N) :- E(N, 7, T).", &s).unwrap();
        assert_eq!(q.atoms[0].args[1], Term::Const(Value::sym("7")));
    }

    #[test]
    fn semantic_errors() {
        let s = schema();
        assert!(matches!(
            parse_query("?(X) :- Q(X).", &s),
            Err(ParseError::UnknownPredicate(_))
        ));
        assert!(matches!(
            parse_query("?(X) :- P(X).", &s),
            Err(ParseError::AtomArity { .. })
        ));
        assert!(matches!(
            parse_query("?(W) :- P(X,Y).", &s),
            Err(ParseError::UnsafeVariable(_))
        ));
        assert!(matches!(
            parse_query("?(X) :- P(X,Y), W > 1.", &s),
            Err(ParseError::UnsafeVariable(_))
        ));
        assert!(matches!(
            parse_query("?(N) :- E(N,C,T), N < 3.", &s),
            Err(ParseError::OrderOnNonInt(_))
        ));
        assert!(matches!(
            parse_query("?(X) :- P(X,Y), E(X,C,T).", &s),
            Err(ParseError::SortConflict { .. })
        ));
        assert!(matches!(
            parse_view("V(X) :- P(X,Y), Y = null.", &s),
            Err(ParseError::NullComparisonInView(_))
        ));
        assert!(matches!(
            parse_view("V(X, 1) :- P(X,Y).", &s),
            Err(ParseError::HeadConstant(_))
        ));
        assert!(matches!(
            parse_views("V(X) :- P(X,Y). V(Y) :- P(X,Y).", &s),
            Err(ParseError::DuplicateView(_))
        ));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let s = schema();
        match parse_query("?(X) :-\n  P(X,Y) Y", &s) {
            Err(ParseError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 10)),
            other => panic!("{other:?}"),
        }
        assert!(parse_query("?(X) :- ", &s).unwrap_err().is_syntax());
    }
}
