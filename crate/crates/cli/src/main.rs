//! `bellpoly`: quantum predictions, polytope membership and hidden-variable
//! simulations driven by JSON scenario files.

mod commands;
mod error;
mod scenario;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Report, Settings};
use error::CliError;
use scenario::{Format, Mode, Scenario};

#[derive(Debug, Parser)]
#[command(name = "bellpoly", version, about = "Bell-type inequalities, correlation polytopes and hidden-variable models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Singlet-state conditional table and Bell-Clauser-Horne check for a geometry.
    Quantum(Common),
    /// Decide whether a correlation vector lies in its classical polytope.
    Check(Common),
    /// Evaluate or simulate a local deterministic hidden-variable world.
    Ldm(Common),
    /// Simulate the detection-loophole model and compare raw and post-selected statistics.
    Fine(Common),
    /// Analyse a laboratory record, or build or refute one for a target vector.
    Record(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario JSON file.
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Exact rational arithmetic where the command supports it.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Omit the timestamp so repeated runs are byte-identical.
    #[arg(long)]
    reproducible: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (mode, common) = match &cli.command {
        Command::Quantum(c) => (Mode::Quantum, c),
        Command::Check(c) => (Mode::Check, c),
        Command::Ldm(c) => (Mode::Ldm, c),
        Command::Fine(c) => (Mode::Fine, c),
        Command::Record(c) => (Mode::Record, c),
    };
    match run(mode, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bellpoly {}: {e}", mode.name());
            if let CliError::Invariant { dump, .. } = &e {
                eprintln!("{}", serde_json::to_string_pretty(dump).unwrap_or_default());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(mode: Mode, c: &Common) -> Result<(), CliError> {
    let scenario = match &c.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(m) = scenario.mode {
        if m != mode {
            return Err(CliError::Usage(format!("scenario is for {}, not {}", m.name(), mode.name())));
        }
    }
    let settings = Settings {
        seed: c.seed.or(scenario.seed).unwrap_or(0),
        trials: c.trials.or(scenario.trials),
        exact: c.exact || scenario.exact.unwrap_or(false),
    };
    if settings.trials == Some(0) {
        return Err(CliError::Usage("trials must be at least 1".into()));
    }
    let format = c.format.or(scenario.format).unwrap_or(Format::Json);
    let report = match mode {
        Mode::Quantum => commands::quantum(&scenario, &settings),
        Mode::Check => commands::check(&scenario, &settings),
        Mode::Ldm => commands::ldm(&scenario, &settings),
        Mode::Fine => commands::fine(&scenario, &settings, format),
        Mode::Record => commands::record(&scenario, &settings),
    }?;
    emit(mode, &settings, format, c.reproducible, scenario.description.as_deref(), &report);
    match report.breach {
        Some((message, dump)) => Err(CliError::Invariant { message, dump }),
        None => Ok(()),
    }
}

fn envelope(mode: Mode, s: &Settings, reproducible: bool, description: Option<&str>, r: &Report) -> Value {
    let mut v = json!({
        "tool": "bellpoly",
        "version": env!("CARGO_PKG_VERSION"),
        "command": mode.name(),
        "seed": s.seed,
        "trials": s.trials,
        "exact": s.exact,
        "status": if r.breach.is_some() { "invariant_breach" } else { "ok" },
        "result": r.result,
    });
    if let Some(d) = description {
        v["description"] = json!(d);
    }
    if !reproducible {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        v["generated_at"] = json!(now);
    }
    v
}

fn emit(mode: Mode, s: &Settings, format: Format, reproducible: bool, description: Option<&str>, r: &Report) {
    let out = match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(&envelope(mode, s, reproducible, description, r)).expect("serializable");
            text.push('\n');
            text
        }
        Format::Csv => r.csv.clone(),
        Format::Text => r.text.clone(),
    };
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(out.as_bytes());
    let _ = stdout.flush();
}
