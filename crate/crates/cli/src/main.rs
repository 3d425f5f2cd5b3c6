use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use secview::asp::Dialect;
use secview::instances::{EnumOptions, EnumerationMode};
use secview_cli::{cmd_answer, cmd_compile, cmd_eval, cmd_instances, cmd_solve, Format, RunConfig, Via};

#[derive(Parser)]
#[command(name = "secview", version, about = "Query answering under secrecy views")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a query under null and classical semantics
    Eval(Common),
    /// List the secrecy instances with their change sets
    Instances(Common),
    /// Secret answers of a query
    Answer(Common),
    /// Print the secrecy program
    Compile(Common),
    /// Secrecy instances from the stable models of the program
    Solve(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum DialectArg {
    Dlv,
    Clingo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ViaArg {
    Direct,
    Asp,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    facts: PathBuf,
    #[arg(long)]
    views: Option<PathBuf>,
    /// Query text or a file containing it
    #[arg(long)]
    query: Option<String>,
    #[arg(long, value_enum, default_value = "paper")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "dlv")]
    dialect: DialectArg,
    #[arg(long, value_enum, default_value = "direct")]
    via: ViaArg,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// External solver command, e.g. `clingo` or `python3 -m clingo`
    #[arg(long)]
    solver: Option<String>,
    /// Also print the denial constraints of the views
    #[arg(long)]
    dcs: bool,
    #[arg(long, default_value_t = EnumOptions::default().max_cells, value_parser = clap::value_parser!(usize))]
    max_cells: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    max_models: Option<u64>,
}

impl Common {
    fn config(self) -> RunConfig {
        let mut cfg = RunConfig::new(self.schema, self.facts);
        cfg.views = self.views;
        cfg.query = self.query;
        cfg.mode = match self.mode {
            ModeArg::Paper => EnumerationMode::PaperMode,
            ModeArg::Exhaustive => EnumerationMode::Exhaustive,
        };
        cfg.dialect = match self.dialect {
            DialectArg::Dlv => Dialect::Dlv,
            DialectArg::Clingo => Dialect::Clingo,
        };
        cfg.via = match self.via {
            ViaArg::Direct => Via::Direct,
            ViaArg::Asp => Via::Asp,
            ViaArg::Both => Via::Both,
        };
        cfg.format = match self.format {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
        };
        cfg.solver = self.solver;
        cfg.dcs = self.dcs;
        cfg.max_cells = self.max_cells;
        cfg.max_models = self.max_models.map(|m| m as usize);
        cfg
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Eval(c) => cmd_eval(&c.config()),
        Cmd::Instances(c) => cmd_instances(&c.config()),
        Cmd::Answer(c) => cmd_answer(&c.config()),
        Cmd::Compile(c) => cmd_compile(&c.config()),
        Cmd::Solve(c) => cmd_solve(&c.config()),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
