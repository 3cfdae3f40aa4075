//! Runs scenarios and writes their artifacts:
//!
//! * `scenario.toml`: the resolved scenario,
//! * `trajectory.csv`: `t, agent, x.., v..` on the record grid,
//! * `diagnostics.json`: the [`DiagnosticsReport`],
//! * `series.csv`: `t, d_x, d_v, energy, lyapunov`,
//! * `error.json`: written instead of the last three when the run fails.
//!
//! A sweep writes one such directory per grid point plus `summary.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{analyze, CheckKind, DiagnosticsReport};
use crate::error::ScenarioError;
use crate::integrator::run;
use crate::scenario::{GridPoint, Scenario};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), ScenarioError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    scenario: &'a str,
    stage: &'a str,
    error: String,
}

fn write_error(
    dir: &Path,
    sc: &Scenario,
    stage: &str,
    err: &ScenarioError,
) -> Result<(), ScenarioError> {
    let rec = ErrorRecord {
        scenario: &sc.name,
        stage,
        error: err.to_string(),
    };
    let text = serde_json::to_string_pretty(&rec).expect("error record serializes");
    write_file(&dir.join("error.json"), |w| writeln!(w, "{text}"))
}

/// Integrates `sc`, analyzes it and writes the artifacts into `dir`.
/// `stride` overrides the scenario's record stride for both the trajectory
/// file and the diagnostics. Integrator and analysis failures leave an
/// `error.json` behind before being returned.
pub fn run_scenario(
    sc: &Scenario,
    dir: &Path,
    stride: Option<usize>,
) -> Result<DiagnosticsReport, ScenarioError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("scenario.toml"), |w| {
        w.write_all(sc.to_toml().as_bytes())
    })?;
    let mut cfg = sc.config();
    if let Some(s) = stride {
        cfg.integrator.record_stride = s.max(1);
    }
    let history = match run(&cfg) {
        Ok(h) => h,
        Err(e) => {
            let e = ScenarioError::from(e);
            write_error(dir, sc, "integrator", &e)?;
            return Err(e);
        }
    };
    write_file(&dir.join("trajectory.csv"), |w| {
        history.write_csv(w, cfg.integrator.record_stride)
    })?;
    let report = match analyze(&cfg, &history, &sc.bounds_options()) {
        Ok(r) => r,
        Err(e) => {
            let e = ScenarioError::from(e);
            write_error(dir, sc, "bounds", &e)?;
            return Err(e);
        }
    };
    write_file(&dir.join("diagnostics.json"), |w| {
        writeln!(w, "{}", report.to_json())
    })?;
    write_file(&dir.join("series.csv"), |w| report.series.write_csv(w))?;
    Ok(report)
}

/// One line of `summary.csv`.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: GridPoint,
    pub dir: PathBuf,
    pub outcome: Result<DiagnosticsReport, String>,
}

impl SweepRow {
    pub fn pass(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.pass)
    }
}

/// Runs every grid point of `sc.sweep` on `workers` threads (all cores when
/// `None`). Points that fail validation or integration are reported in the
/// summary rather than aborting the sweep.
pub fn run_sweep(
    sc: &Scenario,
    out: &Path,
    workers: Option<usize>,
    stride: Option<usize>,
) -> Result<Vec<SweepRow>, ScenarioError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let grid = sc.sweep.grid();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ScenarioError::parse("--workers", e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.par_iter()
            .map(|point| {
                let dir = out.join(point.label());
                let outcome = sc
                    .at(point)
                    .and_then(|p| {
                        p.validate()?;
                        Ok(p)
                    })
                    .and_then(|p| run_scenario(&p, &dir, stride))
                    .map_err(|e| e.to_string());
                SweepRow {
                    point: point.clone(),
                    dir,
                    outcome,
                }
            })
            .collect()
    });
    write_summary(&out.join("summary.csv"), sc, &rows)?;
    Ok(rows)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_summary(path: &Path, sc: &Scenario, rows: &[SweepRow]) -> Result<(), ScenarioError> {
    let axes = &sc.sweep;
    let checks: Vec<CheckKind> = sc.checks.enabled();
    write_file(path, |w| {
        let mut header: Vec<&str> = Vec::new();
        if !axes.agents.is_empty() {
            header.push("agents");
        }
        if !axes.tau_bar.is_empty() {
            header.push("tau_bar");
        }
        if !axes.duty.is_empty() {
            header.push("duty");
        }
        if !axes.gamma.is_empty() {
            header.push("gamma");
        }
        if !axes.seed.is_empty() {
            header.push("seed");
        }
        header.extend(["mu", "final_dv", "pass", "error"]);
        header.extend(checks.iter().map(|c| c.name()));
        writeln!(w, "{}", header.join(","))?;
        for row in rows {
            let p = &row.point;
            let mut f: Vec<String> = Vec::new();
            f.extend(p.agents.map(|v| v.to_string()));
            f.extend(p.tau_bar.map(|v| v.to_string()));
            f.extend(p.duty.map(|v| v.to_string()));
            f.extend(p.gamma.map(|v| v.to_string()));
            f.extend(p.seed.map(|v| v.to_string()));
            match &row.outcome {
                Ok(r) => {
                    f.push(r.constants.mu.map(|m| format!("{m:e}")).unwrap_or_default());
                    f.push(format!("{:e}", r.flocking.final_dv));
                    f.push(r.pass.to_string());
                    f.push(String::new());
                    for c in &checks {
                        f.push(
                            r.check(c.name())
                                .map(|v| v.pass.to_string())
                                .unwrap_or_default(),
                        );
                    }
                }
                Err(e) => {
                    f.extend([String::new(), String::new(), "false".into(), csv_field(e)]);
                    f.extend(checks.iter().map(|_| String::new()));
                }
            }
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    })
}
