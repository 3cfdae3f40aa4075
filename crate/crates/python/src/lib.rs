//! Python bindings: load or build scenarios, run them, inspect the
//! diagnostics, and evaluate the closed-form constants.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use csflock::bounds::{self, DiagnosticsReport};
use csflock::scenario::{self, verify_scenario_pe};
use csflock::{analyze, run, ScenarioError};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario_err(e: ScenarioError) -> PyErr {
    match e {
        ScenarioError::Parse { .. } => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// `(window, floor, worst_integral, worst_start, pass)`
type PeSummary = (f64, f64, f64, f64, bool);

/// A validated scenario.
#[pyclass(module = "csflock_py", frozen)]
struct Scenario {
    inner: scenario::Scenario,
}

#[pymethods]
impl Scenario {
    /// Parses TOML text; raises `ValueError` naming the offending field.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = scenario::parse_scenario(text).map_err(scenario_err)?;
        Ok(Scenario { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = scenario::load_scenario(&path).map_err(scenario_err)?;
        Ok(Scenario { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn agents(&self) -> usize {
        self.inner.system.agents
    }

    #[getter]
    fn tau_bar(&self) -> f64 {
        self.inner.system.delay.tau_bar()
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    /// Copy with a different agent count, seed or horizon.
    #[pyo3(signature = (agents=None, seed=None, t_end=None))]
    fn with_overrides(
        &self,
        agents: Option<usize>,
        seed: Option<u64>,
        t_end: Option<f64>,
    ) -> PyResult<Self> {
        let point = scenario::GridPoint {
            agents,
            seed,
            ..Default::default()
        };
        let mut inner = self.inner.at(&point).map_err(scenario_err)?;
        inner.name = self.inner.name.clone();
        if let Some(t) = t_end {
            inner.system.integrator.t_end = t;
        }
        inner.validate().map_err(scenario_err)?;
        Ok(Scenario { inner })
    }

    /// Exact PE scan: `(window, floor, worst_integral, worst_start, pass)`,
    /// or `None` for a blackout list without a declaration.
    fn verify_pe(&self) -> PyResult<Option<PeSummary>> {
        let res = verify_scenario_pe(&self.inner).map_err(scenario_err)?;
        Ok(res.map(|(pe, r)| {
            (
                pe.window,
                pe.floor,
                r.worst_window_integral,
                r.worst_window_start,
                r.pass,
            )
        }))
    }

    /// Integrates and analyzes in memory; with `out`, also writes the
    /// artifacts there. Releases the GIL while running.
    #[pyo3(signature = (out=None, stride=None))]
    fn run(&self, py: Python<'_>, out: Option<PathBuf>, stride: Option<usize>) -> PyResult<Report> {
        let sc = self.inner.clone();
        let report = py
            .detach(move || -> Result<DiagnosticsReport, ScenarioError> {
                match out {
                    Some(dir) => csflock::run_scenario(&sc, &dir, stride),
                    None => {
                        let mut cfg = sc.config();
                        if let Some(s) = stride {
                            cfg.integrator.record_stride = s.max(1);
                        }
                        let history = run(&cfg)?;
                        Ok(analyze(&cfg, &history, &sc.bounds_options())?)
                    }
                }
            })
            .map_err(scenario_err)?;
        Ok(Report { inner: report })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, agents={})",
            self.inner.name, self.inner.system.agents
        )
    }
}

/// Diagnostics of one run.
#[pyclass(module = "csflock_py", frozen)]
struct Report {
    inner: DiagnosticsReport,
}

#[pymethods]
impl Report {
    /// Every enabled check passed.
    #[getter]
    fn passed(&self) -> bool {
        self.inner.pass
    }

    #[getter]
    fn mu(&self) -> Option<f64> {
        self.inner.constants.mu
    }

    #[getter]
    fn final_dv(&self) -> f64 {
        self.inner.flocking.final_dv
    }

    #[getter]
    fn velocity_aligned(&self) -> bool {
        self.inner.flocking.velocity_aligned
    }

    /// `(name, pass)` for every enabled check, in canonical order.
    fn checks(&self) -> Vec<(String, bool)> {
        self.inner
            .checks
            .iter()
            .map(|v| (v.name.clone(), v.pass))
            .collect()
    }

    /// Verdict of one check, `None` if it was not enabled.
    fn check(&self, name: &str) -> Option<bool> {
        self.inner.check(name).map(|v| v.pass)
    }

    /// `(t, d_x, d_v)` on the record grid.
    fn series(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s = &self.inner.series;
        (s.t.clone(), s.d_x.clone(), s.d_v.clone())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        let mu = self
            .inner
            .constants
            .mu
            .map_or("None".to_string(), |m| format!("{m:e}"));
        let passed = if self.inner.pass { "True" } else { "False" };
        format!(
            "Report(passed={passed}, mu={mu}, final_dv={:e})",
            self.inner.flocking.final_dv
        )
    }
}

/// `(C*, C)` for sup psi `k`, window `t`, delay bound `tau_bar`, PE floor and influence floor `phi`.
#[pyfunction]
fn contraction_constants(
    k: f64,
    t: f64,
    tau_bar: f64,
    floor: f64,
    phi: f64,
) -> PyResult<(f64, f64)> {
    bounds::contraction_constants(k, t, tau_bar, floor, phi).map_err(value_err)
}

/// `mu = ln(1 / (1 - c_hat)) / (3T)`.
#[pyfunction]
fn decay_rate(c_hat: f64, t: f64) -> PyResult<f64> {
    bounds::decay_rate(c_hat, t).map_err(value_err)
}

/// Position and velocity diameters of a flat state `[x.., v..]`.
#[pyfunction]
fn diameters(state: Vec<f64>, agents: usize, dim: usize) -> PyResult<(f64, f64)> {
    if agents == 0 || dim == 0 || state.len() != 2 * agents * dim {
        return Err(PyValueError::new_err(format!(
            "state has {} entries, expected 2 * {agents} * {dim}",
            state.len()
        )));
    }
    Ok(bounds::diameters(&state, agents, dim))
}

#[pymodule]
fn csflock_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Scenario>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(contraction_constants, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rate, m)?)?;
    m.add_function(wrap_pyfunction!(diameters, m)?)?;
    Ok(())
}
