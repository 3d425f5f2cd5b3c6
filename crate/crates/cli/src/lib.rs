//! Command implementations behind the `secview` binary.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{ErrorKind, Write as _};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;

use serde_json::{json, Value as Json};
use thiserror::Error;

use secview::answers::secret_answers_over;
use secview::asp::{
    self, compile_program, compile_with_query, export_program, export_rules, ground,
    model_atoms, models_to_instances, parse_answer_sets, render_rule, stable_models,
    to_denial_constraints, Dialect, GroundAtom, ProgramOptions, SolveOptions,
};
use secview::eval::{eval_classical, eval_n, AnswerSet};
use secview::instances::{
    change_sets, enumerate_secrecy_instances, EnumOptions, EnumerationMode, SecrecySolution,
};
use secview::qlang::{parse_facts, parse_query, parse_schema, parse_views, Query, ViewDef};
use secview::{
    AspError, EnumError, EvalError, Instance, ModelError, ParseError, Schema, Value,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Semantic(String),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
    #[error("{0}")]
    Bound(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Semantic(_) => 3,
            CliError::CrossCheck(_) => 4,
            CliError::Bound(_) => 5,
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Semantic(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Semantic(e.to_string())
    }
}

impl From<EnumError> for CliError {
    fn from(e: EnumError) -> Self {
        match e {
            EnumError::BoundExceeded { .. } | EnumError::SearchExceeded { .. } => {
                CliError::Bound(e.to_string())
            }
            e => CliError::Semantic(e.to_string()),
        }
    }
}

impl From<AspError> for CliError {
    fn from(e: AspError) -> Self {
        match e {
            AspError::BoundExceeded { .. } | AspError::GroundBoundExceeded { .. } => {
                CliError::Bound(e.to_string())
            }
            AspError::Syntax { .. } | AspError::UnsupportedDialect(_) => {
                CliError::Parse(e.to_string())
            }
            e => CliError::Semantic(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Via {
    #[default]
    Direct,
    Asp,
    Both,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub facts: PathBuf,
    pub views: Option<PathBuf>,
    /// Query text, or a path to a file holding it.
    pub query: Option<String>,
    pub mode: EnumerationMode,
    pub dialect: Dialect,
    pub via: Via,
    pub format: Format,
    /// Solver command, e.g. `clingo` or `python3 -m clingo`.
    pub solver: Option<String>,
    pub dcs: bool,
    pub max_cells: usize,
    pub max_models: Option<usize>,
}

impl RunConfig {
    pub fn new(schema: impl Into<PathBuf>, facts: impl Into<PathBuf>) -> Self {
        RunConfig {
            schema: schema.into(),
            facts: facts.into(),
            views: None,
            query: None,
            mode: EnumerationMode::default(),
            dialect: Dialect::Dlv,
            via: Via::default(),
            format: Format::default(),
            solver: None,
            dcs: false,
            max_cells: EnumOptions::default().max_cells,
            max_models: None,
        }
    }

    fn enum_options(&self) -> EnumOptions {
        EnumOptions {
            mode: self.mode,
            max_cells: self.max_cells,
            ..EnumOptions::default()
        }
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            max_models: self.max_models,
            ..SolveOptions::default()
        }
    }
}

struct Inputs {
    schema: Arc<Schema>,
    d: Instance,
    views: Vec<ViewDef>,
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read `{}`: {e}", path.display())))
}

fn load(cfg: &RunConfig, need_views: bool) -> Result<Inputs, CliError> {
    let schema = Arc::new(parse_schema(&read(&cfg.schema)?)?);
    let d = parse_facts(&read(&cfg.facts)?, &schema)?;
    let views = match &cfg.views {
        Some(p) => parse_views(&read(p)?, &schema)?,
        None if need_views => return Err(CliError::Parse("--views is required".into())),
        None => Vec::new(),
    };
    Ok(Inputs { schema, d, views })
}

fn load_query(cfg: &RunConfig, schema: &Schema) -> Result<Query, CliError> {
    let q = cfg
        .query
        .as_deref()
        .ok_or_else(|| CliError::Parse("--query is required".into()))?;
    let text = if Path::new(q).is_file() {
        read(Path::new(q))?
    } else {
        q.to_owned()
    };
    Ok(parse_query(&text, schema)?)
}

fn json_value(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        Value::Int(i) => json!(i),
        Value::Sym(s) | Value::Str(s) => json!(s),
    }
}

fn json_rows(a: &AnswerSet) -> Json {
    Json::Array(
        a.iter()
            .map(|row| Json::Array(row.iter().map(json_value).collect()))
            .collect(),
    )
}

fn json_instance(d: &Instance) -> Json {
    let mut facts = Vec::new();
    for rel in d.schema().relations() {
        for (tid, vals) in d.tuples(&rel.name) {
            facts.push(json!({
                "relation": rel.name,
                "tid": tid,
                "values": vals.iter().map(json_value).collect::<Vec<_>>(),
            }));
        }
    }
    Json::Array(facts)
}

fn json_solution(s: &SecrecySolution, exhaustive_only: bool) -> Json {
    json!({
        "changes": s.changes.iter().map(|c| json!({
            "relation": c.relation,
            "tid": c.tid,
            "pos": c.pos,
        })).collect::<Vec<_>>(),
        "exhaustive_only": exhaustive_only,
        "facts": json_instance(&s.instance),
    })
}

fn pretty(j: &Json) -> String {
    let mut s = serde_json::to_string_pretty(j).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<String, CliError> {
    let inp = load(cfg, false)?;
    let q = load_query(cfg, &inp.schema)?;
    let n = eval_n(&inp.d, &q)?;
    let c = eval_classical(&inp.d, &q)?;
    Ok(match cfg.format {
        Format::Json => pretty(&json!({
            "n_answers": json_rows(&n),
            "classical_answers": json_rows(&c),
        })),
        Format::Text => format!("null semantics: {n}\nclassical: {c}\n"),
    })
}

fn render_solutions(sols: &[SecrecySolution], paper: Option<&BTreeSet<secview::ChangeSet>>, format: Format) -> String {
    let flag = |s: &SecrecySolution| paper.is_some_and(|p| !p.contains(&s.changes));
    match format {
        Format::Json => pretty(&json!({
            "instances": sols.iter().map(|s| json_solution(s, flag(s))).collect::<Vec<_>>(),
        })),
        Format::Text => {
            let mut out = String::new();
            for (i, s) in sols.iter().enumerate() {
                let tag = if flag(s) { " (exhaustive-only)" } else { "" };
                let _ = writeln!(out, "instance {} changes {}{tag}", i + 1, s.changes);
                for line in s.instance.to_string().lines() {
                    let _ = writeln!(out, "  {line}");
                }
            }
            out
        }
    }
}

pub fn cmd_instances(cfg: &RunConfig) -> Result<String, CliError> {
    let inp = load(cfg, true)?;
    let sols = enumerate_secrecy_instances(&inp.d, &inp.views, cfg.enum_options())?;
    let paper = if cfg.mode == EnumerationMode::Exhaustive {
        let opts = EnumOptions {
            mode: EnumerationMode::PaperMode,
            ..cfg.enum_options()
        };
        Some(change_sets(&enumerate_secrecy_instances(&inp.d, &inp.views, opts)?))
    } else {
        None
    };
    Ok(render_solutions(&sols, paper.as_ref(), cfg.format))
}

fn split_command(cmd: &str) -> Result<(String, Vec<String>), CliError> {
    let mut parts = cmd.split_whitespace().map(str::to_owned);
    let prog = parts
        .next()
        .ok_or_else(|| CliError::Parse("empty --solver command".into()))?;
    Ok((prog, parts.collect()))
}

/// Runs an external solver on `program`. `Ok(None)` when the solver cannot
/// be started, so the caller can fall back to the built-in engine.
fn run_solver(
    cmd: &str,
    dialect: Dialect,
    program: &str,
) -> Result<Option<Vec<BTreeSet<GroundAtom>>>, CliError> {
    let (prog, mut args) = split_command(cmd)?;
    match dialect {
        Dialect::Clingo => args.push("0".into()),
        Dialect::Dlv => args.push("-n=0".into()),
    }
    let child = Command::new(&prog)
        .args(&args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn();
    let mut child = match child {
        Ok(c) => c,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(CliError::Semantic(format!("cannot start `{cmd}`: {e}"))),
    };
    child
        .stdin
        .take()
        .expect("stdin is piped")
        .write_all(program.as_bytes())
        .map_err(|e| CliError::Semantic(format!("cannot write to `{cmd}`: {e}")))?;
    let out = child
        .wait_with_output()
        .map_err(|e| CliError::Semantic(format!("`{cmd}` failed: {e}")))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let stderr = String::from_utf8_lossy(&out.stderr);
    if stderr.contains("error") && !stdout.contains("SATISFIABLE") {
        return Err(CliError::Semantic(format!("`{cmd}` reported: {}", stderr.trim())));
    }
    Ok(Some(parse_answer_sets(&stdout)?))
}

/// Answer sets of the program, from the external solver when one is
/// configured and available, else from the built-in engine.
fn answer_sets(cfg: &RunConfig, p: &asp::AnnotatedProgram) -> Result<Vec<BTreeSet<GroundAtom>>, CliError> {
    if let Some(cmd) = &cfg.solver {
        if let Some(sets) = run_solver(cmd, cfg.dialect, &export_program(p, cfg.dialect))? {
            return Ok(sets);
        }
        eprintln!("warning: solver `{cmd}` not found, using the built-in engine");
    }
    let gp = ground(p)?;
    Ok(stable_models(&gp, cfg.solve_options())?
        .iter()
        .map(|m| model_atoms(&gp, m))
        .collect())
}

fn require_paper_mode(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.mode == EnumerationMode::Exhaustive && cfg.via != Via::Direct {
        return Err(CliError::Semantic(
            "the program only nulls variable positions; use --mode=paper with --via=asp or both".into(),
        ));
    }
    Ok(())
}

pub fn cmd_answer(cfg: &RunConfig) -> Result<String, CliError> {
    require_paper_mode(cfg)?;
    let inp = load(cfg, true)?;
    let q = load_query(cfg, &inp.schema)?;
    let direct = || -> Result<AnswerSet, CliError> {
        let sols = enumerate_secrecy_instances(&inp.d, &inp.views, cfg.enum_options())?;
        Ok(secret_answers_over(&sols, &q)?.answers)
    };
    let via_asp = || -> Result<AnswerSet, CliError> {
        let p = compile_with_query(&inp.d, &inp.views, &q, ProgramOptions::default())?;
        let sets = answer_sets(cfg, &p)?;
        Ok(asp::cautious_from_models(&inp.d, ProgramOptions::default().tids, &q, &sets)?)
    };
    let answers = match cfg.via {
        Via::Direct => direct()?,
        Via::Asp => via_asp()?,
        Via::Both => {
            let a = direct()?;
            let b = via_asp()?;
            if a != b {
                return Err(CliError::CrossCheck(format!(
                    "direct answers {a} differ from program answers {b}"
                )));
            }
            a
        }
    };
    Ok(match cfg.format {
        Format::Json => pretty(&json!({ "query": q.to_string(), "answers": json_rows(&answers) })),
        Format::Text => format!("{answers}\n"),
    })
}

pub fn cmd_compile(cfg: &RunConfig) -> Result<String, CliError> {
    let inp = load(cfg, true)?;
    let p = match &cfg.query {
        Some(_) => {
            let q = load_query(cfg, &inp.schema)?;
            compile_with_query(&inp.d, &inp.views, &q, ProgramOptions::default())?
        }
        None => compile_program(&inp.d, &inp.views, ProgramOptions::default())?,
    };
    let program = export_program(&p, cfg.dialect);
    let dcs: Vec<_> = if cfg.dcs {
        inp.views.iter().flat_map(to_denial_constraints).collect()
    } else {
        Vec::new()
    };
    Ok(match cfg.format {
        Format::Json => pretty(&json!({
            "dialect": cfg.dialect.name(),
            "program": program,
            "denial_constraints": dcs.iter().map(|dc| json!({
                "view": dc.view,
                "sentence": dc.to_string(),
                "rule": render_rule(&dc.to_rule(), cfg.dialect),
            })).collect::<Vec<_>>(),
        })),
        Format::Text => {
            let mut out = program;
            if cfg.dcs {
                out.push_str("% denial constraints\n");
                for dc in &dcs {
                    let _ = writeln!(out, "% {dc}");
                }
                let rules: Vec<_> = dcs.iter().map(|dc| dc.to_rule()).collect();
                out.push_str(&export_rules(&rules, cfg.dialect));
            }
            out
        }
    })
}

/// Secrecy instances read off the answer sets of the compiled program.
pub fn cmd_solve(cfg: &RunConfig) -> Result<String, CliError> {
    require_paper_mode(cfg)?;
    let inp = load(cfg, true)?;
    let p = compile_program(&inp.d, &inp.views, ProgramOptions::default())?;
    let sols = models_to_instances(&inp.d, p.options.tids, &answer_sets(cfg, &p)?)?;
    if cfg.via == Via::Both && cfg.max_models.is_none() {
        let direct = enumerate_secrecy_instances(&inp.d, &inp.views, cfg.enum_options())?;
        if change_sets(&direct) != change_sets(&sols) {
            return Err(CliError::CrossCheck(
                "stable models and direct enumeration give different instances".into(),
            ));
        }
    }
    Ok(render_solutions(&sols, None, cfg.format))
}
