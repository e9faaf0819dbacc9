use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use quadham::coefficients::{ModelId, ModelSpec};
use quadham::export::CsvTable;
use quadham::verify::{run_all, Budget};
use quadham::{Error, Result};

mod settings;
mod tasks;

use settings::Settings;
use tasks::Output;

#[derive(Parser)]
#[command(name = "quadham", version, about = "Propagators, invariants and moment dynamics of quadratic Hamiltonians")]
struct Cli {
    /// INI file with [model], [numeric] and [output] sections; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    task: Task,
}

#[derive(Subcommand)]
enum Task {
    /// Solve the characteristic equation and tabulate μ, μ'
    Mu(Opts),
    /// Kernel parameters (μ, h, α, β, γ) at --t or over [0, --t-end]
    Kernel(Opts),
    /// Green function G(x, y, t) as JSON {re, im}
    Green(Opts),
    /// Propagate a coherent state (--method gaussian|grid)
    Propagate(Opts),
    /// Second moments along the moment equations
    Moments(Opts),
    /// Catalogued energy operator and its expectation value
    Invariant(Opts),
    /// Elementary-equation basis functions and their residuals
    #[command(name = "appendix_d", alias = "appendix-d")]
    AppendixD(Opts),
    /// Heisenberg uncertainty margin along the moment equations
    Uncertainty(Opts),
    /// Run the acceptance checks and print a PASS/FAIL table
    #[command(name = "verify_all", alias = "verify-all")]
    VerifyAll(VerifyOpts),
    /// List built-in models, their parameters and constraints
    #[command(name = "list_models", alias = "list-models")]
    ListModels {
        #[arg(long)]
        json: bool,
    },
}

/// Model parameters accept comma-separated lists; every combination is run.
#[derive(Args, Default)]
struct Opts {
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    omega0: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    t_end: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x_mean: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p_mean: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    half_width: Option<String>,
    /// closed (default) or numeric
    #[arg(long)]
    source: Option<String>,
    /// gaussian (default) or grid
    #[arg(long)]
    method: Option<String>,
    /// Output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
}

impl Opts {
    fn apply(&self, s: &mut Settings) {
        let pairs = [
            ("model", &self.model),
            ("omega0", &self.omega0),
            ("lambda", &self.lambda),
            ("mu", &self.mu),
            ("delta", &self.delta),
            ("gamma", &self.gamma),
            ("t", &self.t),
            ("t_end", &self.t_end),
            ("samples", &self.samples),
            ("x", &self.x),
            ("y", &self.y),
            ("x_mean", &self.x_mean),
            ("p_mean", &self.p_mean),
            ("tol", &self.tol),
            ("dt", &self.dt),
            ("n", &self.n),
            ("half_width", &self.half_width),
            ("source", &self.source),
            ("method", &self.method),
            ("format", &self.format),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                s.set(k, v.clone());
            }
        }
        if let Some(p) = &self.out {
            s.set("out", p.to_string_lossy());
        }
    }
}

#[derive(Args)]
struct VerifyOpts {
    /// Only `all` is accepted: the checks span several models each
    #[arg(long, default_value = "all")]
    model: String,
    #[arg(long, default_value = "full")]
    budget: String,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    module: &'a str,
    code: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ModelRow {
    id: &'static str,
    parameters: &'static [&'static str],
    constraint: &'static str,
    self_adjoint: bool,
}

#[derive(Serialize)]
struct JsonTable<'a> {
    header: &'a [String],
    rows: &'a [Vec<f64>],
}

fn emit_error(module: &str, code: &str, message: String) {
    let rec = ErrorRecord { module, code, message };
    eprintln!("{}", serde_json::to_string(&rec).expect("error record serializes"));
}

fn exit_for(e: &Error) -> ExitCode {
    emit_error(e.module(), e.code(), e.to_string());
    ExitCode::from(if e.is_validation() { 2 } else { 3 })
}

/// Write to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn write_out(s: &Settings, text: &str) -> Result<()> {
    match s.get("out") {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => print_stdout(text),
    }
}

fn table_text(table: &CsvTable, format: &str) -> Result<String> {
    match format {
        "csv" => table.to_csv_string(),
        "json" => Ok(quadham::export::to_json(&JsonTable { header: &table.header, rows: &table.rows })? + "\n"),
        other => Err(Error::InvalidInput(format!("format must be csv or json, got {other:?}"))),
    }
}

/// Prefix each sweep member's rows with its parameters and stack them.
fn stack(specs: &[ModelSpec], tables: Vec<CsvTable>) -> CsvTable {
    let mut header: Vec<String> = ["omega0", "lambda", "mu", "delta"].map(String::from).to_vec();
    header.extend(tables[0].header.iter().cloned());
    let mut out = CsvTable::new(header);
    for (spec, t) in specs.iter().zip(tables) {
        for row in t.rows {
            let mut r = vec![spec.omega0, spec.lambda, spec.mu_param, spec.delta];
            r.extend(row);
            out.push(r);
        }
    }
    out
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("QUADHAM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidInput(format!("QUADHAM_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))
}

fn run_model_task(s: &Settings, f: fn(&ModelSpec, &Settings) -> Result<Output>) -> Result<()> {
    let specs = s.model_sweep()?;
    let format = s.get("format").unwrap_or("csv");
    let pool = thread_pool()?;
    let outputs: Vec<Output> = pool.install(|| specs.par_iter().map(|spec| f(spec, s)).collect::<Result<_>>())?;
    if let [Output::Record(v)] = outputs.as_slice() {
        return write_out(s, &(serde_json::to_string_pretty(v)? + "\n"));
    }
    let mut tables = Vec::new();
    let mut records = Vec::new();
    for o in outputs {
        match o {
            Output::Table(t) => tables.push(t),
            Output::Record(v) => records.push(v),
        }
    }
    if !records.is_empty() {
        return write_out(s, &(serde_json::to_string_pretty(&records)? + "\n"));
    }
    let table = if tables.len() == 1 { tables.pop().unwrap() } else { stack(&specs, tables) };
    write_out(s, &table_text(&table, format)?)
}

fn verify(v: &VerifyOpts) -> Result<bool> {
    if v.model != "all" {
        return Err(Error::InvalidInput(format!("verify_all runs every check; use --model all (got {:?})", v.model)));
    }
    let budget: Budget = v.budget.parse()?;
    let outcomes = thread_pool()?.install(|| run_all(budget));
    let mut text = String::new();
    if v.json {
        text = quadham::export::to_json(&outcomes)? + "\n";
    } else {
        for o in &outcomes {
            text += &(o.line() + "\n");
        }
        let passed = outcomes.iter().filter(|o| o.passed).count();
        text += &format!("{passed}/{} criteria passed\n", outcomes.len());
    }
    print_stdout(&text)?;
    Ok(outcomes.iter().all(|o| o.passed))
}

fn list_models(json: bool) -> Result<()> {
    let rows: Vec<ModelRow> = ModelId::ALL
        .iter()
        .map(|m| ModelRow { id: m.id(), parameters: m.parameters(), constraint: m.constraint(), self_adjoint: m.is_self_adjoint() })
        .collect();
    if json {
        return print_stdout(&(quadham::export::to_json(&rows)? + "\n"));
    }
    let mut text = format!("{:<26} {:<24} {:<30} self-adjoint\n", "model", "parameters", "constraint");
    for r in rows {
        text += &format!("{:<26} {:<24} {:<30} {}\n", r.id, r.parameters.join(","), r.constraint, r.self_adjoint);
    }
    print_stdout(&text)
}

fn settings_for(cli: &Cli, opts: &Opts) -> Result<Settings> {
    let mut s = match &cli.config {
        Some(p) => Settings::from_ini(p)?,
        None => Settings::default(),
    };
    opts.apply(&mut s);
    Ok(s)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let model_task: (&Opts, fn(&ModelSpec, &Settings) -> Result<Output>) = match &cli.task {
        Task::Mu(o) => (o, tasks::mu),
        Task::Kernel(o) => (o, tasks::kernel),
        Task::Green(o) => (o, tasks::green),
        Task::Propagate(o) => (o, tasks::propagate),
        Task::Moments(o) => (o, tasks::moments),
        Task::Invariant(o) => (o, tasks::invariant),
        Task::Uncertainty(o) => (o, tasks::uncertainty),
        Task::AppendixD(o) => {
            let s = settings_for(cli, o)?;
            let table = match tasks::appendix_d(&s)? {
                Output::Table(t) => t,
                Output::Record(_) => unreachable!("appendix_d emits a table"),
            };
            write_out(&s, &table_text(&table, s.get("format").unwrap_or("csv"))?)?;
            return Ok(ExitCode::SUCCESS);
        }
        Task::VerifyAll(v) => {
            return Ok(if verify(v)? { ExitCode::SUCCESS } else { ExitCode::from(3) });
        }
        Task::ListModels { json } => {
            list_models(*json)?;
            return Ok(ExitCode::SUCCESS);
        }
    };
    let s = settings_for(cli, model_task.0)?;
    run_model_task(&s, model_task.1)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            emit_error("cli", "usage", e.to_string().trim_end().to_string());
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => exit_for(&e),
    }
}
