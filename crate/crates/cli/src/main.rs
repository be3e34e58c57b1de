//! `authpi`: parse, check, run and meta-verify role-authorized processes.
//!
//! Exit codes:
//!
//! | code | meaning                                                    |
//! |------|------------------------------------------------------------|
//! | 0    | success                                                    |
//! | 1    | the file could not be read, parsed or loaded               |
//! | 2    | no typing derivation exists                                |
//! | 3    | derivable, but the authorization set is not empty          |
//! | 4    | `step --choose K` with K out of range                      |
//! | 5    | an authorization error is reachable                        |
//! | 6    | meta-verification failed                                   |
//! | 7    | the state budget was exceeded                              |

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use authpi::checker::{check_process, Checked, Derivation, TypeError};
use authpi::dynamics::{
    canonicalize, enabled_steps_of, explore, is_auth_error, CanonicalForm, DynamicsError,
    StepLabel,
};
use authpi::env::AuthSet;
use authpi::meta::{error_free_check, preservation_check, safety_report, MetaError, MetaReport, Verdict};
use authpi::surface::{parse_file, print_shared_type, print_type, SourceFile};
use authpi::syntax::Process;
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const EXIT_LOAD: u8 = 1;
const EXIT_UNTYPABLE: u8 = 2;
const EXIT_SIGMA: u8 = 3;
const EXIT_CHOICE: u8 = 4;
const EXIT_ERROR_STATE: u8 = 5;
const EXIT_META: u8 = 6;
const EXIT_BUDGET: u8 = 7;

#[derive(Parser)]
#[command(name = "authpi", version, about = "Role-authorized pi-calculus toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a file and print it back in canonical form.
    Parse(Common),
    /// Type check a process against the declared environments.
    Check {
        #[command(flatten)]
        common: Common,
        /// Print the typing derivation.
        #[arg(long)]
        emit_derivation: bool,
        /// Check every proc in the file.
        #[arg(long)]
        all_procs: bool,
    },
    /// List the enabled reductions, or apply one.
    Step {
        #[command(flatten)]
        common: Common,
        /// Index of the reduction to apply.
        #[arg(long)]
        choose: Option<usize>,
    },
    /// Reduce to a normal form, or explore every reachable state.
    Run {
        #[command(flatten)]
        common: Common,
        /// Pick each reduction uniformly at random from this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Explore the whole state space.
        #[arg(long)]
        all: bool,
    },
    /// Search for reachable authorization errors.
    Safety {
        #[command(flatten)]
        common: Common,
        /// Run even if the process is not well typed.
        #[arg(long)]
        force: bool,
    },
    /// Check error freedom, preservation and safety.
    Meta {
        #[command(flatten)]
        common: Common,
        /// Run even if the process is not well typed.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Declaration file.
    file: PathBuf,
    /// Name of the proc to use.
    #[arg(long = "proc", default_value = "main")]
    proc_name: String,
    /// Print a JSON report instead of text.
    #[arg(long)]
    json: bool,
    /// State budget for exploration.
    #[arg(long, env = "AUTHPI_MAX_STATES", default_value_t = 100_000)]
    max_states: usize,
}

#[derive(Serialize)]
struct ErrorEntry {
    trace: Vec<StepLabel>,
    state: String,
}

/// The JSON report; the first eight keys are always present.
#[derive(Serialize)]
struct Report {
    command: &'static str,
    fixture: String,
    verdict: String,
    sigma: Option<Vec<[String; 2]>>,
    states: Option<usize>,
    edges: Option<usize>,
    errors: Vec<ErrorEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    derivation: Option<Derivation>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    type_errors: Option<Vec<TypeError>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<Vec<StepEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<MetaReport>,
}

#[derive(Serialize)]
struct StepEntry {
    index: usize,
    label: StepLabel,
    result: String,
}

impl Report {
    fn new(command: &'static str, common: &Common) -> Self {
        Report {
            command,
            fixture: common.file.display().to_string(),
            verdict: String::new(),
            sigma: None,
            states: None,
            edges: None,
            errors: Vec::new(),
            derivation: None,
            diagnostics: Vec::new(),
            output: None,
            type_errors: None,
            steps: None,
            meta: None,
        }
    }
}

fn sigma_pairs(sigma: &AuthSet) -> Vec<[String; 2]> {
    sigma
        .iter()
        .map(|(a, r)| [a.to_string(), r.to_string()])
        .collect()
}

/// Collects human-readable lines and the JSON report side by side.
struct Out {
    json: bool,
    lines: Vec<String>,
    report: Report,
}

impl Out {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn finish(mut self, code: u8) -> ExitCode {
        let mut stdout = std::io::stdout().lock();
        if self.json {
            if !self.lines.is_empty() && self.report.output.is_none() {
                self.report.output = Some(self.lines.join("\n"));
            }
            let text = serde_json::to_string_pretty(&self.report).expect("report serializes");
            let _ = writeln!(stdout, "{text}");
        } else {
            for line in &self.lines {
                if writeln!(stdout, "{line}").is_err() {
                    break;
                }
            }
        }
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Parse(common) => with_file("parse", &common, cmd_parse),
        Command::Check {
            common,
            emit_derivation,
            all_procs,
        } => with_file("check", &common, |out, file| {
            cmd_check(out, file, &common.proc_name, emit_derivation, all_procs)
        }),
        Command::Step { common, choose } => with_proc("step", &common, |out, file, p| {
            cmd_step(out, file, p, choose)
        }),
        Command::Run { common, seed, all } => with_proc("run", &common, |out, _, p| {
            cmd_run(out, p, seed, all, common.max_states)
        }),
        Command::Safety { common, force } => with_proc("safety", &common, |out, file, p| {
            cmd_safety(out, file, p, force, common.max_states)
        }),
        Command::Meta { common, force } => with_proc("meta", &common, |out, file, p| {
            cmd_meta(out, file, p, force, common.max_states)
        }),
    }
}

fn with_file(
    command: &'static str,
    common: &Common,
    body: impl FnOnce(&mut Out, &SourceFile) -> u8,
) -> ExitCode {
    let mut out = Out {
        json: common.json,
        lines: Vec::new(),
        report: Report::new(command, common),
    };
    let src = match std::fs::read_to_string(&common.file) {
        Ok(src) => src,
        Err(e) => {
            let msg = format!("{}: {e}", common.file.display());
            return load_failure(out, vec![msg]);
        }
    };
    let file = match parse_file(&src) {
        Ok(file) => file,
        Err(diags) => {
            let msgs = diags
                .0
                .iter()
                .map(|d| format!("{}:{d}", common.file.display()))
                .collect();
            return load_failure(out, msgs);
        }
    };
    let code = body(&mut out, &file);
    out.finish(code)
}

fn load_failure(mut out: Out, msgs: Vec<String>) -> ExitCode {
    out.report.verdict = "load-error".into();
    if !out.json {
        for m in &msgs {
            eprintln!("{m}");
        }
    }
    out.report.diagnostics = msgs;
    out.finish(EXIT_LOAD)
}

fn with_proc(
    command: &'static str,
    common: &Common,
    body: impl FnOnce(&mut Out, &SourceFile, &Process) -> u8,
) -> ExitCode {
    let name = common.proc_name.clone();
    with_file(command, common, move |out, file| match file.proc(&name) {
        Some(p) => body(out, file, p),
        None => {
            out.report.verdict = "load-error".into();
            let msg = format!("no proc named `{name}`");
            if !out.json {
                eprintln!("{msg}");
            }
            out.report.diagnostics.push(msg);
            EXIT_LOAD
        }
    })
}

fn cmd_parse(out: &mut Out, file: &SourceFile) -> u8 {
    for (name, b) in &file.typedefs {
        out.say(format!("typedef {name} = {};", print_type(b)));
    }
    for (name, t) in &file.shared {
        out.say(format!("shared {name} : {};", print_shared_type(t)));
    }
    for (name, b) in &file.linear {
        out.say(format!("linear {name} : {};", print_type(b)));
    }
    for (name, p) in &file.procs {
        out.say(format!("proc {name} = {p};"));
    }
    out.report.verdict = "ok".into();
    0
}

fn cmd_check(out: &mut Out, file: &SourceFile, proc_name: &str, emit: bool, all: bool) -> u8 {
    let names: Vec<&str> = if all {
        file.procs.iter().map(|(n, _)| n.as_str()).collect()
    } else {
        vec![proc_name]
    };
    let (linear, shared) = (file.linear_env(), file.shared_env());
    // load errors outrank missing derivations, which outrank residual Σ
    let severity = |code: u8| match code {
        EXIT_LOAD => 3,
        EXIT_UNTYPABLE => 2,
        EXIT_SIGMA => 1,
        _ => 0,
    };
    let mut worst = 0u8;
    let mut note = |code: u8| {
        if severity(code) > severity(worst) {
            worst = code;
        }
    };
    let mut verdicts = Vec::new();
    for name in names {
        let Some(p) = file.proc(name) else {
            out.say(format!("no proc named `{name}`"));
            out.report.diagnostics.push(format!("no proc named `{name}`"));
            note(EXIT_LOAD);
            verdicts.push("load-error");
            continue;
        };
        let prefix = if all { format!("{name}: ") } else { String::new() };
        match check_process(&linear, &shared, p) {
            Ok(Checked { sigma, derivation }) => {
                let (verdict, code) = if sigma.is_empty() {
                    ("well-typed", 0)
                } else {
                    ("not-well-typed", EXIT_SIGMA)
                };
                let text = if sigma.is_empty() {
                    "well-typed"
                } else {
                    "derivable but Σ is not empty"
                };
                out.say(format!("{prefix}Σ = {sigma}; {text}"));
                if emit {
                    out.say(derivation.render().trim_end().to_string());
                    out.report.derivation = Some(derivation);
                }
                out.report.sigma = Some(sigma_pairs(&sigma));
                note(code);
                verdicts.push(verdict);
            }
            Err(errors) => {
                for e in &errors {
                    out.say(format!(
                        "{prefix}no derivation: {:?} at {:?}: {}",
                        e.reason, e.location, e.detail
                    ));
                }
                out.report.type_errors = Some(errors);
                note(EXIT_UNTYPABLE);
                verdicts.push("ill-typed");
            }
        }
    }
    out.report.verdict = if verdicts.len() == 1 {
        verdicts[0].to_string()
    } else {
        match worst {
            0 => "well-typed",
            EXIT_SIGMA => "not-well-typed",
            EXIT_UNTYPABLE => "ill-typed",
            _ => "load-error",
        }
        .to_string()
    };
    worst
}

fn cmd_step(out: &mut Out, _file: &SourceFile, p: &Process, choose: Option<usize>) -> u8 {
    let cf = canonicalize(p);
    let steps = enabled_steps_of(&cf);
    out.report.steps = Some(
        steps
            .iter()
            .enumerate()
            .map(|(index, (label, next))| StepEntry {
                index,
                label: label.clone(),
                result: next.to_string(),
            })
            .collect(),
    );
    match choose {
        None => {
            if steps.is_empty() {
                out.say("no enabled steps");
            }
            for (i, (label, next)) in steps.iter().enumerate() {
                out.say(format!("[{i}] {label}"));
                out.say(format!("    {next}"));
            }
            out.report.verdict = "ok".into();
            0
        }
        Some(k) if k < steps.len() => {
            let next = canonicalize(&steps[k].1.to_process());
            out.say(format!("{}", steps[k].0));
            out.say(next.to_string());
            out.report.output = Some(next.to_string());
            out.report.verdict = "ok".into();
            0
        }
        Some(k) => {
            out.say(format!("step {k} out of range ({} enabled)", steps.len()));
            out.report.verdict = "out-of-range".into();
            EXIT_CHOICE
        }
    }
}

fn cmd_run(out: &mut Out, p: &Process, seed: Option<u64>, all: bool, max_states: usize) -> u8 {
    if all {
        let space = match explore(p, max_states) {
            Ok(space) => space,
            Err(e) => return budget(out, e),
        };
        out.report.states = Some(space.states.len());
        out.report.edges = Some(space.edges.len());
        for &s in &space.error_states {
            out.report.errors.push(ErrorEntry {
                trace: space.trace_to(s),
                state: space.states[s].to_string(),
            });
        }
        out.say(format!(
            "{} states, {} edges, {} errors",
            space.states.len(),
            space.edges.len(),
            space.error_states.len()
        ));
        for (i, state) in space.states.iter().enumerate() {
            let flag = if space.error_states.contains(&i) {
                " [error]"
            } else if space.stuck_states.contains(&i) {
                " [stuck]"
            } else {
                ""
            };
            out.say(format!("  #{i}{flag} {state}"));
        }
        for (from, label, to) in &space.edges {
            out.say(format!("  #{from} -> #{to}: {label}"));
        }
        return verdict_on_errors(out, !space.error_states.is_empty());
    }

    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    let mut state: CanonicalForm = canonicalize(p);
    let mut trace = Vec::new();
    let mut visited = 1usize;
    out.say(format!("{state}"));
    let mut error = is_auth_error(&state.to_process());
    while !error {
        let steps = enabled_steps_of(&state);
        if steps.is_empty() {
            break;
        }
        if visited >= max_states {
            return budget(out, DynamicsError::BudgetExceeded { limit: max_states });
        }
        let pick = match rng.as_mut() {
            Some(rng) => rng.gen_range(0..steps.len()),
            None => 0,
        };
        let (label, next) = steps[pick].clone();
        state = canonicalize(&next.to_process());
        visited += 1;
        out.say(format!("-> {label}"));
        out.say(format!("{state}"));
        trace.push(label);
        error = is_auth_error(&state.to_process());
    }
    out.report.states = Some(visited);
    out.report.edges = Some(trace.len());
    if error {
        out.say("authorization error");
        out.report.errors.push(ErrorEntry {
            trace,
            state: state.to_string(),
        });
    } else if !state.is_inactive() {
        out.say("stuck");
    } else {
        out.say("terminated");
    }
    verdict_on_errors(out, error)
}

fn verdict_on_errors(out: &mut Out, found: bool) -> u8 {
    if found {
        out.report.verdict = "error".into();
        EXIT_ERROR_STATE
    } else {
        out.report.verdict = "ok".into();
        0
    }
}

fn budget(out: &mut Out, e: DynamicsError) -> u8 {
    out.say(e.to_string());
    out.report.verdict = "budget-exceeded".into();
    EXIT_BUDGET
}

/// Typing precondition of `safety` and `meta`; returns an exit code when
/// it fails and `force` is off.
fn precondition(out: &mut Out, file: &SourceFile, p: &Process, force: bool) -> Result<bool, u8> {
    match check_process(&file.linear_env(), &file.shared_env(), p) {
        Ok(c) if c.sigma.is_empty() => {
            out.report.sigma = Some(Vec::new());
            Ok(true)
        }
        Ok(c) => {
            out.report.sigma = Some(sigma_pairs(&c.sigma));
            out.say(format!("precondition: Σ = {} is not empty", c.sigma));
            if force {
                Ok(false)
            } else {
                out.report.verdict = "precondition-failed".into();
                Err(EXIT_SIGMA)
            }
        }
        Err(errors) => {
            if let Some(e) = errors.first() {
                out.say(format!("precondition: no derivation ({:?}: {})", e.reason, e.detail));
            }
            out.report.type_errors = Some(errors);
            if force {
                Ok(false)
            } else {
                out.report.verdict = "precondition-failed".into();
                Err(EXIT_UNTYPABLE)
            }
        }
    }
}

fn cmd_safety(out: &mut Out, file: &SourceFile, p: &Process, force: bool, max_states: usize) -> u8 {
    if let Err(code) = precondition(out, file, p, force) {
        return code;
    }
    let report = safety_report(&out.report.fixture, p, max_states);
    if report.verdict == Verdict::BudgetExceeded {
        return budget(out, DynamicsError::BudgetExceeded { limit: max_states });
    }
    out.report.states = Some(report.states_visited);
    out.report.edges = Some(report.edges_checked);
    if report.safety_failures.is_empty() {
        out.say(format!(
            "no reachable authorization error ({} states)",
            report.states_visited
        ));
    }
    for w in &report.safety_failures {
        out.say(format!("witness of length {}:", w.trace.len()));
        for label in &w.trace {
            out.say(format!("  {label}"));
        }
        out.say(format!("  reaches {}", w.state));
        out.report.errors.push(ErrorEntry {
            trace: w.trace.clone(),
            state: w.state.clone(),
        });
    }
    verdict_on_errors(out, !report.safety_failures.is_empty())
}

fn cmd_meta(out: &mut Out, file: &SourceFile, p: &Process, force: bool, max_states: usize) -> u8 {
    let typed = match precondition(out, file, p, force) {
        Ok(typed) => typed,
        Err(code) => return code,
    };
    let (linear, shared) = (file.linear_env(), file.shared_env());
    let fixture = out.report.fixture.clone();

    let mut report = safety_report(&fixture, p, max_states);
    if typed {
        match error_free_check(&linear, &shared, p) {
            Ok(true) => out.say("error freedom: holds"),
            Ok(false) => {
                out.say("error freedom: VIOLATED");
                report.verdict = Verdict::Fail;
            }
            Err(e) => out.say(format!("error freedom: {e}")),
        }
        match preservation_check(&fixture, &linear, &shared, p, max_states) {
            Ok(pres) => report = report.merge(pres),
            Err(MetaError::NotTypable(_)) | Err(MetaError::NonEmptySigma(_)) => {
                unreachable!("precondition already established")
            }
        }
    } else {
        out.say("preservation: skipped (process is not well typed)");
    }
    out.report.states = Some(report.states_visited);
    out.report.edges = Some(report.edges_checked);
    for f in &report.preservation_failures {
        out.say(format!("preservation failure at {} via {}: {}", f.state, f.step, f.detail));
    }
    for w in &report.safety_failures {
        out.say(format!(
            "safety failure: {} reached by [{}]",
            w.state,
            w.trace
                .iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        out.report.errors.push(ErrorEntry {
            trace: w.trace.clone(),
            state: w.state.clone(),
        });
    }
    out.say(format!(
        "{:?}: {} states, {} edges checked",
        report.verdict, report.states_visited, report.edges_checked
    ));
    let code = match report.verdict {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_META,
        Verdict::BudgetExceeded => EXIT_BUDGET,
    };
    out.report.verdict = match report.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "fail",
        Verdict::BudgetExceeded => "budget-exceeded",
    }
    .into();
    out.report.meta = Some(report);
    code
}
