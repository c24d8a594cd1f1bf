//! Command-line front end: run the experiment, check the property suites, or
//! sweep one config key.
//!
//! Exit codes:
//!
//! | code | meaning                                  |
//! |------|------------------------------------------|
//! | 0    | success                                  |
//! | 1    | a verification property failed           |
//! | 2    | invalid configuration or usage           |
//! | 3    | constraint violation                     |
//! | 4    | numerical divergence                     |
//! | 5    | output could not be written              |

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use armctl::config::{default_experiment, load_experiment, serialize, Experiment};
use armctl::sim::{barrier_effort_split, LyapunovDiagnostics, RunSummary, SimFailure, SimLog};
use armctl::verify::verify_all;
use armctl::{ConfigError, SimError};
use clap::{Parser, ValueEnum};

const EXIT_PROPERTY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;
const EXIT_DIVERGENCE: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Run,
    Verify,
    Sweep,
}

#[derive(Debug, Parser)]
#[command(name = "armctl", version, about = "Actor-critic tracking control of a two-link arm")]
struct Args {
    /// Experiment file (TOML); keys it omits take the bundled defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "ARMCTL_OUT", default_value = "armctl-out")]
    out: PathBuf,
    /// Override a config key, e.g. `--set controller.k2=20` or `--set K2=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_enum, default_value_t = Suite::Run)]
    suite: Suite,
}

#[derive(Debug)]
enum Failure {
    Config(ConfigError),
    Io(PathBuf, std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn load(args: &Args, extra: &[String]) -> Result<Experiment, ConfigError> {
    let overrides: Vec<String> = args.overrides.iter().chain(extra).cloned().collect();
    match &args.config {
        Some(path) => load_experiment(path, &overrides),
        None => default_experiment(&overrides),
    }
}

fn exit_code(error: &SimError) -> u8 {
    match error {
        SimError::Config(_) => EXIT_CONFIG,
        SimError::ConstraintViolation { .. } => EXIT_VIOLATION,
        SimError::Divergence { .. } => EXIT_DIVERGENCE,
    }
}

/// Runs one experiment into `dir` and returns the summary with the exit code.
fn run_into(exp: &Experiment, dir: &Path) -> Result<(RunSummary, u8), Failure> {
    create_dir(dir)?;
    write(&dir.join("config.toml"), &serialize(exp))?;
    let tc = exp.sim.constraint.tc;
    let (log, code, failure): (SimLog, u8, Option<SimFailure>) = match armctl::sim::run(&exp.sim) {
        Ok(log) => (log, 0, None),
        Err(f) => (f.log.clone(), exit_code(&f.error), Some(f)),
    };
    write(&dir.join("log.csv"), &log.to_csv())?;

    let summary = RunSummary::from_log(&log, tc);
    let code = if code == 0 && summary.violations > 0 { EXIT_VIOLATION } else { code };
    let status = match (&failure, code) {
        (Some(f), _) => f.error.kind(),
        (None, 0) => "ok",
        (None, _) => "constraint_violation",
    };
    write(&dir.join("summary.txt"), &format!("status = {status}\n{}", summary.report()))?;

    let mut diag = LyapunovDiagnostics::from_log(&log, &exp.sim).report();
    let effort = barrier_effort_split(&log, &exp.sim.constraint);
    let _ = writeln!(diag, "barrier_effort_low_mean = {:.16e}", effort.low_mean);
    let _ = writeln!(diag, "barrier_effort_low_count = {}", effort.low_count);
    let _ = writeln!(diag, "barrier_effort_high_mean = {:.16e}", effort.high_mean);
    let _ = writeln!(diag, "barrier_effort_high_count = {}", effort.high_count);
    write(&dir.join("diagnostics.txt"), &diag)?;

    let failure_path = dir.join("failure.txt");
    match &failure {
        Some(f) => write(&failure_path, &f.report())?,
        None if failure_path.exists() => {
            fs::remove_file(&failure_path).map_err(|e| Failure::Io(failure_path.clone(), e))?
        }
        None => {}
    }
    Ok((summary, code))
}

fn cmd_run(args: &Args) -> Result<u8, Failure> {
    let exp = load(args, &[])?;
    let (summary, code) = run_into(&exp, &args.out)?;
    println!("status: {}", if code == 0 { "ok" } else { "failed" });
    println!("rows: {}  t_final: {}", summary.rows, summary.t_final);
    println!("violations: {}", summary.violations);
    println!(
        "max |Wa|: {:.6e}  max |Wc|: {:.6e}  max |Z2|: {:.6e}",
        summary.max_wa_norm, summary.max_wc_norm, summary.max_z2_norm
    );
    println!("steady-state mean |Z1| (t >= {}): {:.6e}", summary.steady_from, summary.steady_error);
    if code != 0 {
        eprintln!("see {}", args.out.join("failure.txt").display());
    }
    println!("output: {}", args.out.display());
    Ok(code)
}

fn cmd_verify(args: &Args) -> Result<u8, Failure> {
    let exp = load(args, &[])?;
    let report = verify_all(&exp);
    print!("{report}");
    create_dir(&args.out)?;
    write(&args.out.join("verify.txt"), &report.to_string())?;
    Ok(if report.all_passed() { 0 } else { EXIT_PROPERTY })
}

fn cmd_sweep(args: &Args) -> Result<u8, Failure> {
    let base = load(args, &[])?;
    let points = base.sweep.overrides();
    if points.is_empty() {
        return Err(ConfigError::invalid("sweep.values", "must not be empty").into());
    }
    // Reject every bad point before starting any run.
    let exps = points.iter().map(|o| load(args, std::slice::from_ref(o))).collect::<Result<Vec<_>, _>>()?;
    create_dir(&args.out)?;
    let results: Vec<Result<(RunSummary, u8), Failure>> = std::thread::scope(|scope| {
        let handles: Vec<_> = exps
            .iter()
            .enumerate()
            .map(|(i, exp)| {
                let dir = args.out.join(format!("run_{i:03}"));
                scope.spawn(move || run_into(exp, &dir))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut csv =
        String::from("index,override,exit_code,violations,max_wa_norm,max_wc_norm,max_z2_norm,steady_error_mean\n");
    let mut worst = 0;
    for (i, (point, result)) in points.iter().zip(results).enumerate() {
        let (s, code) = result?;
        let _ = writeln!(
            csv,
            "{i},\"{}\",{code},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            point.replace('"', "\"\""),
            s.violations,
            s.max_wa_norm,
            s.max_wc_norm,
            s.max_z2_norm,
            s.steady_error
        );
        println!("{point}: exit {code}, steady-state mean |Z1| {:.6e}", s.steady_error);
        worst = worst.max(code);
    }
    write(&args.out.join("sweep_summary.csv"), &csv)?;
    Ok(worst)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let outcome = match args.suite {
        Suite::Run => cmd_run(&args),
        Suite::Verify => cmd_verify(&args),
        Suite::Sweep => cmd_sweep(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(path, e)) => {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::from(EXIT_IO)
        }
    }
}
