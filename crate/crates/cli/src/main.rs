//! `qschro <task> --input FILE [--out DIR] [--tol ATOL,RTOL] [--horizon X] [--tmax T]`

mod output;
mod problem;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use qschro::Error;

use output::Report;
use problem::{Num, TaskName, Tols};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_PARSE: u8 = 64;
pub const EXIT_VALIDATION: u8 = 65;
pub const EXIT_NUMERIC: u8 = 70;

#[derive(Debug)]
pub enum Failure {
    Parse(String),
    Validation(String),
    Numeric(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Other(_) => EXIT_ERROR,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Failure::Parse(_) => "PARSE_ERROR",
            Failure::Validation(_) => "VALIDATION_ERROR",
            Failure::Numeric(_) => "NUMERIC_ERROR",
            Failure::Other(_) => "ERROR",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Validation(m) | Failure::Numeric(m) | Failure::Other(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let m = e.to_string();
        match e {
            Error::StepUnderflow { .. } | Error::NoConvergence { .. } | Error::OverflowUnrecoverable(_) => {
                Failure::Numeric(m)
            }
            Error::SideMismatch => Failure::Other(m),
            _ => Failure::Validation(m),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "qschro", version, about = "Quasi-derivative Schrodinger toolkit")]
struct Args {
    task: TaskName,
    /// Problem file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Write the report to DIR instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator tolerances as ATOL,RTOL.
    #[arg(long)]
    tol: Option<String>,
    /// Search horizon X for the condition checks.
    #[arg(long)]
    horizon: Option<f64>,
    /// Largest probe window; resets the window list.
    #[arg(long)]
    tmax: Option<f64>,
}

fn threads() -> Result<Option<usize>, Failure> {
    match std::env::var("QSCHRO_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::Validation(format!("QSCHRO_THREADS: expected a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn parse_tol(s: &str) -> Result<Tols, Failure> {
    let bad = || Failure::Validation(format!("--tol: expected ATOL,RTOL, got {s:?}"));
    let (a, r) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let r: f64 = r.trim().parse().map_err(|_| bad())?;
    Ok(Tols { atol: Num(a), rtol: Num(r) })
}

fn execute(args: &Args) -> Result<(String, tasks::Status), Failure> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Failure::Other(format!("cannot read {}: {e}", args.input.display())))?;
    let mut p = problem::parse(&text)?;
    if let Some(t) = p.task {
        if t != args.task {
            return Err(problem::validation(
                "task",
                format!("file declares {} but {} was requested", t.label(), args.task.label()),
            ));
        }
    }
    if let Some(t) = &args.tol {
        p.tolerances = Some(parse_tol(t)?);
    }
    for (flag, v, slot) in [("--horizon", args.horizon, &mut p.horizon), ("--tmax", args.tmax, &mut p.tmax)] {
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(Failure::Validation(format!("{flag}: not finite")));
            }
            *slot = Some(Num(x));
            if flag == "--tmax" {
                p.windows = None;
            }
        }
    }
    tasks::normalize(&mut p, args.task);

    let mut body = Report::default();
    let status = tasks::run(&p, args.task, &mut body)?;

    let mut rep = Report::default();
    rep.raw("# qschro report");
    rep.section("metadata");
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    rep.kv("generated_unix", now.to_string());
    rep.kv("threads", rayon::current_num_threads().to_string());
    rep.raw("[/metadata]");
    rep.section("run");
    rep.kv("version", env!("CARGO_PKG_VERSION"));
    rep.kv("task", args.task.label());
    let tol = p.tolerances.expect("normalized");
    rep.kv("tolerances", format!("{},{}", output::num(tol.atol.0), output::num(tol.rtol.0)));
    rep.kv("status", format!("{:?}", status).to_lowercase());
    rep.kv("exit_code", status.code().to_string());
    rep.section("problem");
    rep.raw(&serde_json::to_string_pretty(&p).map_err(|e| Failure::Other(e.to_string()))?);
    rep.raw("[/problem]");
    rep.section("results");
    rep.raw(&body.into_string());
    Ok((rep.into_string(), status))
}

fn report_path(args: &Args, dir: &Path, output: Option<&str>) -> PathBuf {
    match output {
        Some(name) => dir.join(name),
        None => {
            let stem = args.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or("problem".into());
            dir.join(format!("{stem}.{}.report", args.task.label()))
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = threads().and_then(|n| {
        if let Some(n) = n {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Failure::Other(format!("thread pool: {e}")))?;
        }
        let (text, status) = execute(&args)?;
        match &args.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
                let output = std::fs::read_to_string(&args.input)
                    .ok()
                    .and_then(|t| problem::parse(&t).ok())
                    .and_then(|p| p.output);
                let path = report_path(&args, dir, output.as_deref());
                std::fs::write(&path, text).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
                eprintln!("report written to {}", path.display());
            }
            None => print!("{text}"),
        }
        Ok(status)
    });
    match result {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(f) => {
            eprintln!("error[{}]: {}", f.label(), f.message());
            ExitCode::from(f.code())
        }
    }
}
