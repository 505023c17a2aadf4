//! The `btq` command line: `check`, `gen` and `run`.
//!
//! Exit codes: 0 ok, 1 error diagnostics (model or scenario), 2 a
//! requirement was violated or a run ran out of ticks, 3 I/O failure or
//! unusable command line.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::codegen::generate;
use crate::diagnostic::{Diagnostic, Location, Severity};
use crate::engine::{load_scenario_with, run, ExecutionTrace};
use crate::model::BehaviorTreeModel;
use crate::monitor::{build_report, render_report, ReportFormat, RequirementRecord};
use crate::parser::{parse, SourceFile};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERRORS: u8 = 1;
pub const EXIT_VIOLATED: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "btq", version, about = "Quality-annotated behavior trees: check, generate, run")]
pub struct Cli {
    /// Suppress warnings and the text report.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[arg(long, global = true, value_enum, default_value_t = ColorChoice::Auto)]
    pub color: ColorChoice,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColorChoice {
    Never,
    Auto,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate models.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Generate BehaviorTree.CPP XML.
    Gen {
        input: PathBuf,
        /// Output file, or `-` for standard output. Defaults to `<input-stem>.xml`.
        #[arg(long)]
        out: Option<String>,
    },
    /// Execute scenarios and report requirement satisfaction.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub input: PathBuf,
    /// Scenario file; repeat to build a history over several runs.
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report_format: ReportFormat,
    /// Write the JSON-lines event trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Require a behavior for every leaf.
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,
    /// Let unscripted leaves succeed immediately.
    #[arg(long)]
    pub lenient: bool,
}

struct Ui<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    quiet: bool,
    color: bool,
}

impl Ui<'_> {
    fn diagnostic(&mut self, d: &Diagnostic) {
        if self.quiet && d.severity == Severity::Warning {
            return;
        }
        let line = if self.color {
            let paint = if d.is_error() { "31" } else { "33" };
            format!("{}: \x1b[{paint}m[{}]\x1b[0m {}", d.location, d.code, d.message)
        } else {
            d.to_string()
        };
        let _ = writeln!(self.err, "{line}");
    }

    fn io_error(&mut self, what: &Path, e: impl std::fmt::Display) -> u8 {
        let _ = writeln!(self.err, "{}: {e}", what.display());
        EXIT_IO
    }
}

/// Entry point used by the binary; `stderr_is_terminal` drives `--color auto`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write, stderr_is_terminal: bool) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(err, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_IO,
            };
        }
    };
    let color = cli.color == ColorChoice::Auto
        && stderr_is_terminal
        && std::env::var_os("BTQ_NO_COLOR").is_none();
    let mut ui = Ui {
        out,
        err,
        quiet: cli.quiet,
        color,
    };
    match cli.command {
        Command::Check { paths } => cmd_check(&mut ui, &paths),
        Command::Gen { input, out } => cmd_gen(&mut ui, &input, out.as_deref()),
        Command::Run(args) => cmd_run(&mut ui, &args),
    }
}

/// Reads and parses a model, printing diagnostics. `Err` carries the exit code.
fn load_model(ui: &mut Ui, path: &Path) -> Result<BehaviorTreeModel, u8> {
    let text = fs::read_to_string(path).map_err(|e| ui.io_error(path, e))?;
    let source = SourceFile::new(path.display().to_string(), &text);
    match parse(&source) {
        Ok(model) => {
            for d in crate::model::validate(&model) {
                ui.diagnostic(&d);
            }
            Ok(model)
        }
        Err(diags) => {
            for d in &diags {
                ui.diagnostic(d);
            }
            Err(EXIT_ERRORS)
        }
    }
}

fn cmd_check(ui: &mut Ui, paths: &[PathBuf]) -> u8 {
    let mut code = EXIT_OK;
    for path in paths {
        if let Err(c) = load_model(ui, path) {
            code = code.max(c);
        }
    }
    code
}

fn cmd_gen(ui: &mut Ui, input: &Path, out: Option<&str>) -> u8 {
    let model = match load_model(ui, input) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let xml = generate(&model);
    match out {
        Some("-") => {
            if let Err(e) = ui.out.write_all(xml.as_bytes()) {
                return ui.io_error(Path::new("<stdout>"), e);
            }
            EXIT_OK
        }
        other => {
            let target = other.map(PathBuf::from).unwrap_or_else(|| input.with_extension("xml"));
            match fs::write(&target, xml) {
                Ok(()) => EXIT_OK,
                Err(e) => ui.io_error(&target, e),
            }
        }
    }
}

fn cmd_run(ui: &mut Ui, args: &RunArgs) -> u8 {
    let model = match load_model(ui, &args.input) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let strict = match (args.strict, args.lenient) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    };

    let mut traces: Vec<ExecutionTrace> = Vec::new();
    let mut exhausted = false;
    for path in &args.scenarios {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return ui.io_error(path, e),
        };
        let file = path.display().to_string();
        let scenario = match load_scenario_with(&file, &text, &model, strict) {
            Ok(s) => s,
            Err(diags) => {
                for d in &diags {
                    ui.diagnostic(d);
                }
                return EXIT_ERRORS;
            }
        };
        let trace = match run(&model, &scenario) {
            Ok(t) => t,
            Err(e) => {
                ui.diagnostic(&Diagnostic::error(e.code(), e.to_string(), Location::new(&file, 1, 1)));
                return EXIT_ERRORS;
            }
        };
        if trace.exhausted {
            exhausted = true;
            ui.diagnostic(&Diagnostic::error(
                "E405",
                format!("root still running after max_ticks = {}", scenario.max_ticks),
                Location::new(&file, 1, 1),
            ));
        }
        traces.push(trace);
    }

    if let Some(path) = &args.trace {
        let lines: String = traces
            .iter()
            .enumerate()
            .map(|(i, t)| t.to_json_lines(i + 1))
            .collect();
        if let Err(e) = fs::write(path, lines) {
            return ui.io_error(path, e);
        }
    }

    let records = history(traces.iter().map(|t| t.records.as_slice()));
    let report = build_report(&records, &model);
    if !(ui.quiet && args.report_format == ReportFormat::Text) {
        let rendered = render_report(&report, args.report_format);
        if let Err(e) = ui.out.write_all(rendered.as_bytes()) {
            return ui.io_error(Path::new("<stdout>"), e);
        }
    }
    if report.has_violations() || exhausted {
        EXIT_VIOLATED
    } else {
        EXIT_OK
    }
}

/// Concatenates the records of consecutive runs, numbering executions of
/// each requirement continuously across runs.
pub fn history<'a>(runs: impl IntoIterator<Item = &'a [RequirementRecord]>) -> Vec<RequirementRecord> {
    let mut offsets: HashMap<String, u32> = HashMap::new();
    let mut out = Vec::new();
    for records in runs {
        let mut seen: HashMap<&str, u32> = HashMap::new();
        for r in records {
            let base = offsets.get(&r.requirement_id).copied().unwrap_or(0);
            let mut r2 = r.clone();
            r2.execution_index += base;
            let top = seen.entry(&r.requirement_id).or_insert(0);
            *top = (*top).max(r.execution_index);
            out.push(r2);
        }
        for (id, top) in seen {
            *offsets.entry(id.to_owned()).or_insert(0) += top;
        }
    }
    out
}
