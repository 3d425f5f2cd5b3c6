use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use super::ground::GroundAtom;
use super::program::{AnnotatedProgram, Rule};
use crate::error::{AspError, ParseError};
use crate::model::Value;
use crate::qlang::lexer::{tokenize, Spanned, Tok};
use crate::qlang::{Atom, Builtin, CmpOp, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    Dlv,
    Clingo,
}

impl Dialect {
    fn disjunction(self) -> &'static str {
        match self {
            Dialect::Dlv => " v ",
            Dialect::Clingo => " | ",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dialect::Dlv => "dlv",
            Dialect::Clingo => "clingo",
        }
    }
}

impl FromStr for Dialect {
    type Err = AspError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dlv" => Ok(Dialect::Dlv),
            "clingo" | "gringo" => Ok(Dialect::Clingo),
            _ => Err(AspError::UnsupportedDialect(s.to_owned())),
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn is_plain_constant(s: &str, dialect: Dialect) -> bool {
    let mut chars = s.chars();
    let first_ok = chars.next().is_some_and(|c| c.is_ascii_lowercase());
    first_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "not"
        && s != "null"
        && !(dialect == Dialect::Dlv && s == "v")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Symbols that are not valid solver constants are written as quoted
/// strings.
pub fn render_value(v: &Value, dialect: Dialect) -> String {
    match v {
        Value::Null => "null".to_owned(),
        Value::Int(i) => i.to_string(),
        Value::Sym(s) if is_plain_constant(s, dialect) => s.clone(),
        Value::Sym(s) | Value::Str(s) => quote(s),
    }
}

fn render_term(t: &Term, dialect: Dialect) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Const(c) => render_value(c, dialect),
    }
}

fn render_atom(a: &Atom, dialect: Dialect) -> String {
    if a.args.is_empty() {
        return a.predicate.clone();
    }
    let args: Vec<String> = a.args.iter().map(|t| render_term(t, dialect)).collect();
    format!("{}({})", a.predicate, args.join(","))
}

fn render_builtin(b: &Builtin, dialect: Dialect) -> String {
    match b {
        Builtin::Cmp { op, left, right } => format!(
            "{} {} {}",
            render_term(left, dialect),
            op.symbol(),
            render_term(right, dialect)
        ),
        Builtin::IsNull(t) => format!("{} = null", render_term(t, dialect)),
        Builtin::IsNotNull(t) => format!("{} != null", render_term(t, dialect)),
    }
}

pub fn render_rule(r: &Rule, dialect: Dialect) -> String {
    let head: Vec<String> = r.head.iter().map(|a| render_atom(a, dialect)).collect();
    let mut body: Vec<String> = r.pos.iter().map(|a| render_atom(a, dialect)).collect();
    body.extend(r.neg.iter().map(|a| format!("not {}", render_atom(a, dialect))));
    body.extend(r.builtins.iter().map(|b| render_builtin(b, dialect)));
    let mut out = head.join(dialect.disjunction());
    if !body.is_empty() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(":- ");
        out.push_str(&body.join(", "));
    }
    out.push('.');
    out
}

/// Program text in the given dialect, one rule per line.
pub fn export_program(p: &AnnotatedProgram, dialect: Dialect) -> String {
    export_rules(&p.rules, dialect)
}

pub fn export_rules(rules: &[Rule], dialect: Dialect) -> String {
    let mut out = String::new();
    for r in rules {
        out.push_str(&render_rule(r, dialect));
        out.push('\n');
    }
    out
}

fn syntax_err(e: ParseError) -> AspError {
    match e {
        ParseError::Syntax { line, col, message } => AspError::Syntax { line, col, message },
        other => AspError::Syntax {
            line: 0,
            col: 0,
            message: other.to_string(),
        },
    }
}

struct Reader {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Reader {
    fn new(src: &str) -> Result<Self, AspError> {
        Ok(Reader {
            toks: tokenize(src).map_err(syntax_err)?,
            pos: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn err(&self, msg: impl Into<String>) -> AspError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .or(self.toks.last())
            .map_or((1, 1), |s| (s.line, s.col));
        AspError::Syntax {
            line,
            col,
            message: msg.into(),
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn term(&mut self) -> Result<Term, AspError> {
        let t = match self.peek() {
            Some(Tok::Ident(s)) if s == "null" => Term::Const(Value::Null),
            Some(Tok::Ident(s)) if s.starts_with(|c: char| c.is_uppercase() || c == '_') => {
                Term::Var(s.clone())
            }
            Some(Tok::Ident(s)) => Term::Const(Value::Sym(s.clone())),
            Some(Tok::Number(n)) => Term::Const(Value::Int(
                n.parse().map_err(|_| self.err(format!("integer out of range: {n}")))?,
            )),
            Some(Tok::Str(s)) => Term::Const(Value::Str(s.clone())),
            _ => return Err(self.err("expected a term")),
        };
        self.pos += 1;
        Ok(t)
    }

    fn atom(&mut self) -> Result<Atom, AspError> {
        let name = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return Err(self.err("expected an atom")),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                if !self.eat(&Tok::Comma) {
                    return Err(self.err("expected `,` or `)`"));
                }
            }
        }
        Ok(Atom::new(name, args))
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

    fn is_disjunction(&self) -> bool {
        match self.peek() {
            Some(Tok::Bar | Tok::Semi) => true,
            Some(Tok::Ident(v)) if v == "v" => {
                matches!(self.peek_at(1), Some(Tok::Ident(_)))
            }
            _ => false,
        }
    }

    fn rule(&mut self) -> Result<Rule, AspError> {
        let mut head = Vec::new();
        if self.peek() != Some(&Tok::If) {
            head.push(self.atom()?);
            while self.is_disjunction() {
                self.pos += 1;
                head.push(self.atom()?);
            }
        }
        let mut rule = Rule {
            head,
            pos: Vec::new(),
            neg: Vec::new(),
            builtins: Vec::new(),
        };
        if self.eat(&Tok::If) {
            loop {
                match (self.peek(), self.peek_at(1)) {
                    (Some(Tok::Ident(n)), Some(Tok::Ident(_))) if n == "not" => {
                        self.pos += 1;
                        rule.neg.push(self.atom()?);
                    }
                    (Some(Tok::Ident(n)), Some(next))
                        if !n.starts_with(|c: char| c.is_uppercase() || c == '_')
                            && n != "null"
                            && !matches!(
                                next,
                                Tok::Eq | Tok::Neq | Tok::Lt | Tok::Gt | Tok::Le | Tok::Ge
                            ) =>
                    {
                        rule.pos.push(self.atom()?);
                    }
                    _ => {
                        let l = self.term()?;
                        let op = self.cmp_op().ok_or_else(|| self.err("expected a comparison"))?;
                        let r = self.term()?;
                        rule.builtins.push(Builtin::cmp(l, op, r));
                    }
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if !self.eat(&Tok::Dot) {
            return Err(self.err("expected `.` at the end of a rule"));
        }
        Ok(rule)
    }
}

/// Parses program text in either dialect (`v`, `|` or `;` as disjunction).
/// Constants in quotes come back as strings.
pub fn parse_program_text(src: &str) -> Result<Vec<Rule>, AspError> {
    let mut r = Reader::new(src)?;
    let mut rules = Vec::new();
    while r.peek().is_some() {
        rules.push(r.rule()?);
    }
    Ok(rules)
}

fn ground_atom(a: Atom) -> Result<GroundAtom, AspError> {
    let mut args = Vec::with_capacity(a.args.len());
    for t in a.args {
        match t {
            Term::Const(c) => args.push(c),
            Term::Var(v) => {
                return Err(AspError::Syntax {
                    line: 0,
                    col: 0,
                    message: format!("variable `{v}` in an answer set"),
                })
            }
        }
    }
    Ok(GroundAtom::new(a.predicate, args))
}

fn atom_list(src: &str) -> Result<BTreeSet<GroundAtom>, AspError> {
    let mut r = Reader::new(src)?;
    let mut out = BTreeSet::new();
    while r.peek().is_some() {
        out.insert(ground_atom(r.atom()?)?);
        r.eat(&Tok::Comma);
    }
    Ok(out)
}

/// Reads answer sets from solver output: `{a, b(1)}` lines (DLV and plain
/// formats) or clingo's `Answer: N` header followed by a line of
/// space-separated atoms. Everything else is ignored.
pub fn parse_answer_sets(output: &str) -> Result<Vec<BTreeSet<GroundAtom>>, AspError> {
    let mut out = Vec::new();
    let mut lines = output.lines();
    while let Some(line) = lines.next() {
        let t = line.trim();
        if let Some(inner) = t.strip_prefix('{') {
            let inner = inner.trim_end().strip_suffix('}').ok_or_else(|| AspError::Syntax {
                line: 0,
                col: 0,
                message: format!("unterminated answer set `{t}`"),
            })?;
            out.push(atom_list(inner)?);
        } else if t.starts_with("Answer:") {
            let atoms = lines.next().unwrap_or("");
            out.push(atom_list(atoms)?);
        }
    }
    Ok(out)
}
