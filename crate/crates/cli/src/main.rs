//! `tm`: validate, simulate, analyze and export Thinging Machine models.
//!
//! Exit codes: 0 success, 1 the input has errors or the requested check
//! failed, 2 usage or I/O problems.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tm_core::behavior::{simulate, Behavior, Scenario, SimulationError, Termination, Trace};
use tm_core::dsl::{parse, DEFAULT_MAX_STEPS};
use tm_core::io::{export, ExportFormat, ExportOptions};
use tm_core::leakage::{analyze, parse_policy, AnalysisError, Finding, Policy};
use tm_core::{check_document, has_errors, Diagnostic, Model};

#[derive(Parser)]
#[command(name = "tm", version, about = "Thinging Machine models: check, run and look for leaks")]
struct Cli {
    /// Report format for validate, simulate and analyze.
    #[arg(long, value_enum)]
    format: Option<Report>,
    /// Print nothing but errors; the exit code carries the result.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and list its diagnostics.
    Validate {
        path: PathBuf,
        #[arg(long, value_enum)]
        format: Option<Report>,
    },
    /// Run a scenario over the file's event chronology.
    Simulate(SimulateArgs),
    /// Find leakage machines under a policy.
    Analyze {
        path: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Exit with 1 when anything is found.
        #[arg(long)]
        fail_on_findings: bool,
        #[arg(long, value_enum)]
        format: Option<Report>,
    },
    /// Write the model as a graph description or as JSON.
    Export {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "graph")]
        format: Target,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Draw the findings under --policy in red.
        #[arg(long, requires = "policy")]
        highlight_leaks: bool,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("origin").required(true).args(["scenario", "start"]))]
struct SimulateArgs {
    path: PathBuf,
    /// A scenario declared in the file.
    #[arg(long)]
    scenario: Option<String>,
    /// Start at this event instead of a declared scenario.
    #[arg(long)]
    start: Option<String>,
    /// Guard choice, `name=true` or `name=false`. Overrides the scenario's.
    #[arg(long = "guard", value_parser = guard_choice)]
    guards: Vec<(String, bool)>,
    #[arg(long)]
    max_steps: Option<u32>,
    #[arg(long, value_enum)]
    format: Option<Report>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Text,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    Graph,
    Structured,
}

fn guard_choice(s: &str) -> Result<(String, bool), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=true or name=false")?;
    let v = match v {
        "true" => true,
        "false" => false,
        _ => return Err(format!("`{v}` is not true or false")),
    };
    Ok((k.to_string(), v))
}

/// How a command ended, before it becomes an exit code.
enum Failure {
    /// Problems with the input's content.
    Input,
    /// Bad invocation or unreadable files.
    Usage(String),
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let report = |own: Option<Report>| own.or(cli.format).unwrap_or(Report::Text);
    let outcome = match cli.command {
        Command::Validate { path, format } => validate(&path, report(format), quiet),
        Command::Simulate(args) => {
            let format = report(args.format);
            run(&args, format, quiet)
        }
        Command::Analyze {
            path,
            policy,
            fail_on_findings,
            format,
        } => leaks(&path, &policy, fail_on_findings, report(format), quiet),
        Command::Export {
            path,
            format,
            policy,
            highlight_leaks,
        } => write_export(&path, format, policy.as_deref(), highlight_leaks),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("tm: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("values serialize"));
}

fn diagnostic_lines(path: &Path, diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diags {
        writeln!(out, "{}: {d}", path.display()).unwrap();
    }
    out
}

/// Parses a model file. Syntax errors are reported on stderr.
fn load(path: &Path) -> Result<(Model, Behavior), Failure> {
    let text = read(path)?;
    let r = parse(&text);
    match (r.model, r.behavior) {
        (Some(m), Some(b)) => Ok((m, b)),
        _ => {
            eprint!("{}", diagnostic_lines(path, &r.diagnostics));
            Err(Failure::Input)
        }
    }
}

fn validate(path: &Path, format: Report, quiet: bool) -> Outcome {
    let text = read(path)?;
    let r = parse(&text);
    let mut diags = r.diagnostics;
    if let Some(m) = &r.model {
        diags.extend(check_document(m, r.behavior.as_ref()));
    }
    let errors = diags.iter().filter(|d| d.is_error()).count();
    let warnings = diags.len() - errors;
    match format {
        Report::Structured if !quiet => print_json(&json!({
            "path": path.display().to_string(),
            "errors": errors,
            "warnings": warnings,
            "diagnostics": diags,
        })),
        Report::Text if !quiet => {
            print!("{}", diagnostic_lines(path, &diags));
            println!("{errors} error(s), {warnings} warning(s)");
        }
        _ => eprint!("{}", diagnostic_lines(path, &diags.iter().filter(|d| d.is_error()).cloned().collect::<Vec<_>>())),
    }
    if errors > 0 {
        Err(Failure::Input)
    } else {
        Ok(())
    }
}

fn run(args: &SimulateArgs, format: Report, quiet: bool) -> Outcome {
    let (model, behavior) = load(&args.path)?;
    let mut scenario = match (&args.scenario, &args.start) {
        (Some(name), _) => behavior
            .scenario(name)
            .cloned()
            .ok_or_else(|| Failure::Usage(format!("no scenario `{name}` in {}", args.path.display())))?,
        (None, Some(start)) => Scenario::new("(command line)", start.as_str(), DEFAULT_MAX_STEPS),
        (None, None) => unreachable!("clap requires one of them"),
    };
    for (k, v) in &args.guards {
        scenario.guard_choices.insert(k.clone(), *v);
    }
    if let Some(n) = args.max_steps {
        scenario.max_steps = n;
    }
    let trace = match simulate(&model, &behavior.events, &behavior.chronology, &scenario) {
        Ok(t) => t,
        Err(SimulationError::InvalidInput(diags)) => {
            eprint!("{}", diagnostic_lines(&args.path, &diags));
            return Err(Failure::Input);
        }
        Err(e) => return Err(Failure::Usage(e.to_string())),
    };
    if !quiet {
        match format {
            Report::Text => print!("{}", trace_text(&scenario, &trace)),
            Report::Structured => print_json(&json!({
                "scenario": scenario.name,
                "start": scenario.start,
                "terminated": trace.terminated,
                "firings": trace.firings,
            })),
        }
    }
    if trace.terminated == Termination::GuardUnresolved {
        let last = trace.firings.last().map_or("", |f| f.event.as_str());
        eprintln!("tm: no single enabled successor after {last}; choose with --guard");
        return Err(Failure::Input);
    }
    Ok(())
}

fn trace_text(scenario: &Scenario, trace: &Trace) -> String {
    let mut out = format!(
        "# {} from {}: {} firing(s), {}\n",
        scenario.name,
        scenario.start,
        trace.firings.len(),
        trace.terminated
    );
    for f in &trace.firings {
        let stages: Vec<String> = f.stages.iter().map(ToString::to_string).collect();
        writeln!(out, "{}: {}", f.event, stages.join(", ")).unwrap();
    }
    out
}

/// Reads and binds a policy. Any error in it is a usage problem.
fn load_policy(path: &Path, model: &Model) -> Result<Policy, Failure> {
    let r = parse_policy(&read(path)?, model);
    if has_errors(&r.diagnostics) {
        eprint!("{}", diagnostic_lines(path, &r.diagnostics));
        return Err(Failure::Usage(format!("{} is not a usable policy", path.display())));
    }
    Ok(r.policy.expect("no errors means a policy"))
}

fn findings(path: &Path, model: &Model, policy: &Policy) -> Result<Vec<Finding>, Failure> {
    analyze(model, policy).map_err(|e| match e {
        AnalysisError::InvalidModel(diags) => {
            eprint!("{}", diagnostic_lines(path, &diags));
            Failure::Input
        }
        AnalysisError::InvalidPolicy(diags) => {
            eprint!("{}", diagnostic_lines(path, &diags));
            Failure::Usage("policy does not fit the model".into())
        }
    })
}

fn leaks(path: &Path, policy_path: &Path, fail_on_findings: bool, format: Report, quiet: bool) -> Outcome {
    let (model, _) = load(path)?;
    let policy = load_policy(policy_path, &model)?;
    let found = findings(path, &model, &policy)?;
    if !quiet {
        match format {
            Report::Text => print!("{}", findings_text(&model, &found)),
            Report::Structured => print_json(&json!({ "count": found.len(), "findings": found })),
        }
    }
    if fail_on_findings && !found.is_empty() {
        return Err(Failure::Input);
    }
    Ok(())
}

fn findings_text(model: &Model, found: &[Finding]) -> String {
    let mut out = String::new();
    for f in found {
        let thing = model.thing(&f.thing).map_or(f.thing.as_str(), |t| t.name.as_str());
        writeln!(out, "{thing} -> {}", f.leak_machine_path).unwrap();
        writeln!(out, "  activator: {}", f.activator.as_deref().unwrap_or("(none)")).unwrap();
        writeln!(out, "  source:    {}", f.source_kind).unwrap();
        let hops: Vec<String> = f.evidence.iter().map(ToString::to_string).collect();
        writeln!(out, "  evidence:  {}", hops.join(" -> ")).unwrap();
    }
    writeln!(out, "{} leakage machine(s) found", found.len()).unwrap();
    out
}

fn write_export(path: &Path, target: Target, policy: Option<&Path>, highlight: bool) -> Outcome {
    let (model, behavior) = load(path)?;
    let highlight_findings = match (policy, highlight) {
        (Some(p), true) => {
            let policy = load_policy(p, &model)?;
            Some(findings(path, &model, &policy)?)
        }
        _ => None,
    };
    let options = ExportOptions {
        format: match target {
            Target::Graph => ExportFormat::GraphDesc,
            Target::Structured => ExportFormat::Structured,
        },
        highlight_findings,
        include_behavior: !behavior.is_empty(),
    };
    match export(&model, Some(&behavior), &options) {
        Ok(text) => {
            print!("{text}");
            Ok(())
        }
        Err(e) => {
            eprint!("{}", diagnostic_lines(path, &e.0));
            Err(Failure::Input)
        }
    }
}
