//! `csflock run | sweep | verify-pe | bounds`.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails,
//! 2 on invalid input or a failed run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use csflock::bounds::{initial_constants, InitialConstants};
use csflock::scenario::{load_scenario, parse_scenario_unchecked, verify_scenario_pe, Scenario};
use csflock::{run_scenario, run_sweep, PeDeclaration, PeReport, ScenarioError};

#[derive(Parser)]
#[command(
    name = "csflock",
    version,
    about = "Delayed Cucker-Smale flocking: simulate and check the flocking estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario, write its artifacts and evaluate the checks.
    Run {
        scenario: PathBuf,
        /// Output directory (default: the scenario's `output`, else `out/<name>`).
        #[arg(long, env = "CSFLOCK_OUT")]
        out: Option<PathBuf>,
        /// Record every k-th integrator step.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Run every point of the scenario's `[sweep]` grid in parallel.
    Sweep {
        scenario: PathBuf,
        #[arg(long, env = "CSFLOCK_OUT")]
        out: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check the persistence-of-excitation declaration exactly.
    VerifyPe { scenario: PathBuf },
    /// Print the constants computable from the initial data alone.
    Bounds { scenario: PathBuf },
}

fn out_dir(sc: &Scenario, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| sc.output.clone())
        .unwrap_or_else(|| Path::new("out").join(sc.name.replace('/', "_")))
}

fn read_unchecked(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let sc = parse_scenario_unchecked(&text)?;
    sc.validate_structure()?;
    Ok(sc)
}

#[derive(Serialize)]
struct PeOutput {
    declared: bool,
    declaration: PeDeclaration,
    #[serde(flatten)]
    report: PeReport,
}

#[derive(Serialize)]
struct BoundsOutput {
    k: f64,
    tau_bar: f64,
    infint: bool,
    pe: Option<PeDeclaration>,
    pe_declared: bool,
    #[serde(flatten)]
    initial: InitialConstants,
}

fn execute(cli: Cli) -> Result<bool, ScenarioError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            stride,
        } => {
            let sc = load_scenario(&scenario)?;
            if !sc.sweep.is_empty() {
                eprintln!("note: [sweep] is ignored by `run`; use `csflock sweep`");
            }
            let dir = out_dir(&sc, out);
            let report = run_scenario(&sc, &dir, stride)?;
            for v in &report.checks {
                let margin = v
                    .worst_margin
                    .map(|m| format!("{m:.3e}"))
                    .unwrap_or_else(|| "-".into());
                let note = v
                    .note
                    .as_deref()
                    .map(|n| format!("  ({n})"))
                    .unwrap_or_default();
                println!(
                    "{:<20} {:<4} margin {margin}{note}",
                    v.name,
                    if v.pass { "ok" } else { "FAIL" }
                );
            }
            if let Some(mu) = report.constants.mu {
                println!("mu = {mu:.6e}");
            }
            println!(
                "{} -> {}",
                if report.pass { "PASS" } else { "FAIL" },
                dir.display()
            );
            Ok(report.pass)
        }
        Command::Sweep {
            scenario,
            out,
            stride,
            workers,
        } => {
            let sc = load_scenario(&scenario)?;
            let dir = out_dir(&sc, out);
            let rows = run_sweep(&sc, &dir, workers, stride)?;
            let passed = rows.iter().filter(|r| r.pass()).count();
            for r in &rows {
                let status = match &r.outcome {
                    Ok(rep) if rep.pass => "ok".to_string(),
                    Ok(_) => "FAIL".to_string(),
                    Err(e) => format!("ERROR {e}"),
                };
                println!("{:<40} {status}", r.point.label());
            }
            println!(
                "{passed}/{} passed -> {}",
                rows.len(),
                dir.join("summary.csv").display()
            );
            Ok(passed == rows.len())
        }
        Command::VerifyPe { scenario } => {
            let sc = read_unchecked(&scenario)?;
            match verify_scenario_pe(&sc)? {
                None => {
                    println!("no PE declaration and no default for this schedule");
                    Ok(false)
                }
                Some((declaration, report)) => {
                    let out = PeOutput {
                        declared: sc.system.schedule.pe.is_some(),
                        declaration,
                        report,
                    };
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&out).expect("serializes")
                    );
                    Ok(report.pass)
                }
            }
        }
        Command::Bounds { scenario } => {
            let sc = read_unchecked(&scenario)?;
            let cfg = sc.config();
            let tau_bar = cfg.tau_bar();
            let out = BoundsOutput {
                k: cfg.influence.sup_norm(),
                tau_bar,
                infint: cfg.influence.satisfies_infint(),
                pe: cfg.schedule.pe.or_else(|| cfg.schedule.default_pe(tau_bar)),
                pe_declared: cfg.schedule.pe.is_some(),
                initial: initial_constants(&cfg),
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("serializes")
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
