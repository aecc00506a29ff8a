//! Command-line front end.
//!
//! ```text
//! evacflow field    <scenario> [--out DIR] [--override key=value]...
//! evacflow simulate <scenario> [--out DIR] [--override key=value]...
//! evacflow trace    <scenario> [--out DIR] [--override key=value]...
//! evacflow report   <scenario> [--out DIR] [--override key=value]...
//! evacflow verify   [--case NAME] [--seed N] [--out DIR]
//! ```
//!
//! Exit codes: 0 success, 1 verification failure or i/o, 2 scenario parse
//! error, 3 validation error, 4 solver failure, 5 range/stability failure.

use clap::{Args, Parser, Subcommand};
use evacflow::error::EvacError;
use evacflow::pipeline::{run_pipeline, StageSet};
use evacflow::scenario::parse_scenario;
use evacflow::verify::run_oracles;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "evacflow",
    version,
    about = "Crowd evacuation simulator on Cartesian grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file.
    scenario: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override a scalar scenario key, e.g. `--override delta=0.25`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the potential and routing field, write u/phi/w and flux report.
    Field(RunArgs),
    /// Field stage plus density evolution (report and snapshots).
    Simulate(RunArgs),
    /// Field stage plus path tracing (trajectories and evacuation map).
    Trace(RunArgs),
    /// All stages.
    Report(RunArgs),
    /// Run the oracle suite.
    Verify {
        /// Only run cases whose name contains this string.
        #[arg(long = "case")]
        case: Option<String>,
        /// Seed for the randomized cases.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the machine-readable report.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, String> {
    let mut lines: Vec<String> = text.lines().map(|l| l.to_string()).collect();
    for ov in overrides {
        let Some((key, value)) = ov.split_once('=') else {
            return Err(format!("override {ov:?} is not KEY=VALUE"));
        };
        let key = key.trim();
        let value = value.trim();
        if key == "mask" || key == "path" {
            return Err(format!("{key} cannot be overridden on the command line"));
        }
        // Replace an existing assignment or prepend a new one; the mask
        // block is left untouched because assignments precede it.
        let mut replaced = false;
        let mut in_mask = false;
        for line in lines.iter_mut() {
            if in_mask {
                continue;
            }
            if line.trim() == "mask:" {
                in_mask = true;
                continue;
            }
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    *line = format!("{key} = {value}");
                    replaced = true;
                    break;
                }
            }
        }
        if !replaced {
            lines.insert(0, format!("{key} = {value}"));
        }
    }
    Ok(lines.join("\n"))
}

fn run_stages(args: &RunArgs, stages: StageSet) -> Result<(), EvacError> {
    let text = std::fs::read_to_string(&args.scenario)?;
    let text = apply_overrides(&text, &args.overrides).map_err(|message| {
        EvacError::Scenario(evacflow::scenario::ScenarioError::Syntax { line: 0, message })
    })?;
    let sc = parse_scenario(&text)?;
    let base_dir = args
        .scenario
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    let summary = run_pipeline(&sc, stages, &args.out, &base_dir)?;
    println!("digest  {}", summary.digest);
    println!("varpi   {}", summary.varpi);
    println!(
        "flux    {} in [{}, {}]",
        summary.total_exit_flux, summary.e3_lower, summary.e3_upper
    );
    if let Some(t) = summary.evacuation_time {
        println!("evac    {t}");
    }
    if let Some(f) = summary.exited_fraction {
        println!("exited  {f}");
    }
    println!("out     {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), EvacError> = match &cli.command {
        Command::Field(args) => run_stages(args, StageSet::field_only()),
        Command::Simulate(args) => run_stages(
            args,
            StageSet {
                simulate: true,
                trace: false,
            },
        ),
        Command::Trace(args) => run_stages(
            args,
            StageSet {
                simulate: false,
                trace: true,
            },
        ),
        Command::Report(args) => run_stages(args, StageSet::all()),
        Command::Verify { case, seed, out } => {
            let report = run_oracles(case.as_deref(), *seed);
            print!("{}", report.render_text());
            if let Err(e) =
                evacflow::output::write_file(out, "verify_report.csv", &report.render_csv())
            {
                eprintln!("error: could not write report: {e}");
                return ExitCode::from(1);
            }
            return if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
