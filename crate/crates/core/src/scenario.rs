//! Scenario files: a TOML description of one run (or a sweep of runs) and
//! the checks to apply to it.
//!
//! ```toml
//! name = "stress"
//!
//! [system]
//! agents = 32
//! dimension = 3
//! influence = { kind = "power_law", k = 1.0, gamma = 0.4 }
//! delay = { kind = "pointwise", tau_bar = 0.5, tau = { kind = "constant", value = 0.3 } }
//! schedule = { pattern = { kind = "square_wave", period = 2.0, duty = 0.3 }, pe = { window = 2.0, floor = 0.6 } }
//! integrator = { t_end = 60.0 }
//!
//! [initial]
//! kind = "random_ball"
//! seed = 42
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bounds::{BoundsOptions, CheckKind, FlockingThresholds};
use crate::config::{AgentHistory, Coupling, InitialData, IntegratorSettings, SystemConfig};
use crate::delay::{DelaySpec, TimeFunction};
use crate::error::{ModelError, ScenarioError, ScheduleError};
use crate::influence::Influence;
use crate::schedule::{PeReport, SchedulePattern, WeightSchedule};

fn one() -> usize {
    1
}

fn default_influence() -> Influence {
    Influence::Constant { k: 1.0 }
}

fn default_delay() -> DelaySpec {
    DelaySpec::Pointwise {
        tau: TimeFunction::Constant { value: 0.0 },
        tau_bar: 0.0,
    }
}

fn default_integrator() -> IntegratorSettings {
    IntegratorSettings::new(10.0)
}

/// Everything in [`SystemConfig`] except the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub agents: usize,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default = "default_influence")]
    pub influence: Influence,
    #[serde(default = "default_delay")]
    pub delay: DelaySpec,
    #[serde(default = "WeightSchedule::always_on")]
    pub schedule: WeightSchedule,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorSettings,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// See [`InitialData::random_ball`].
    RandomBall {
        #[serde(default)]
        seed: u64,
        #[serde(default = "unit")]
        position_radius: f64,
        #[serde(default = "unit")]
        velocity_radius: f64,
        #[serde(default)]
        pin_extremes: bool,
        #[serde(default)]
        moving: bool,
    },
    Explicit {
        agents: Vec<AgentHistory>,
    },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::RandomBall {
            seed: 0,
            position_radius: 1.0,
            velocity_radius: 1.0,
            pin_extremes: false,
            moving: false,
        }
    }
}

impl InitialSpec {
    pub fn build(&self, agents: usize, dim: usize) -> InitialData {
        match self {
            InitialSpec::RandomBall {
                seed,
                position_radius,
                velocity_radius,
                pin_extremes,
                moving,
            } => InitialData::random_ball(
                agents,
                dim,
                *seed,
                *position_radius,
                *velocity_radius,
                *pin_extremes,
                *moving,
            ),
            InitialSpec::Explicit { agents } => InitialData {
                agents: agents.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    /// Added to the default set (every check except `flocking`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub enable: Vec<CheckKind>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disable: Vec<CheckKind>,
    #[serde(default)]
    pub flocking: FlockingThresholds,
    /// Seed for the random directions of the invariance check.
    #[serde(default)]
    pub seed: u64,
}

impl ChecksSpec {
    pub fn enabled(&self) -> Vec<CheckKind> {
        CheckKind::ALL
            .into_iter()
            .filter(|k| {
                (CheckKind::defaults().contains(k) || self.enable.contains(k))
                    && !self.disable.contains(k)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Replaces the computed rate in the envelope check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_rate: Option<f64>,
}

/// Axes of a sweep; the grid is their Cartesian product (empty axes are
/// left at the scenario's value).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tau_bar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub duty: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seed: Vec<u64>,
}

/// One value per swept axis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agents: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl GridPoint {
    /// Directory-friendly label, e.g. `agents-8_seed-3`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.agents {
            parts.push(format!("agents-{v}"));
        }
        if let Some(v) = self.tau_bar {
            parts.push(format!("tau_bar-{v}"));
        }
        if let Some(v) = self.duty {
            parts.push(format!("duty-{v}"));
        }
        if let Some(v) = self.gamma {
            parts.push(format!("gamma-{v}"));
        }
        if let Some(v) = self.seed {
            parts.push(format!("seed-{v}"));
        }
        if parts.is_empty() {
            "base".into()
        } else {
            parts.join("_")
        }
    }
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
            && self.tau_bar.is_empty()
            && self.duty.is_empty()
            && self.gamma.is_empty()
            && self.seed.is_empty()
    }

    /// Grid points in row-major order (agents outermost, seed innermost).
    pub fn grid(&self) -> Vec<GridPoint> {
        fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
            if values.is_empty() {
                vec![None]
            } else {
                values.iter().copied().map(Some).collect()
            }
        }
        let mut out = Vec::new();
        for agents in axis(&self.agents) {
            for tau_bar in axis(&self.tau_bar) {
                for duty in axis(&self.duty) {
                    for gamma in axis(&self.gamma) {
                        for seed in axis(&self.seed) {
                            out.push(GridPoint {
                                agents,
                                tau_bar,
                                duty,
                                gamma,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Output directory; the CLI's `--out` wins over it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub system: SystemSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    #[serde(default)]
    pub overrides: Overrides,
    #[serde(default, skip_serializing_if = "SweepAxes::is_empty")]
    pub sweep: SweepAxes,
}

impl Scenario {
    pub fn config(&self) -> SystemConfig {
        let s = &self.system;
        SystemConfig {
            agents: s.agents,
            dimension: s.dimension,
            influence: s.influence.clone(),
            delay: s.delay.clone(),
            schedule: s.schedule.clone(),
            initial: self.initial.build(s.agents, s.dimension),
            coupling: s.coupling,
            integrator: s.integrator.clone(),
        }
    }

    pub fn bounds_options(&self) -> BoundsOptions {
        BoundsOptions {
            stride: None,
            enabled: self.checks.enabled(),
            flocking: self.checks.flocking,
            envelope_rate: self.overrides.envelope_rate,
            random_directions: 4,
            seed: self.checks.seed,
            resolution_check: true,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Full validation, including the exact PE check.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.validate_structure()?;
        let cfg = self.config();
        let horizon = cfg.integrator.t_end + cfg.schedule.pe.map_or(0.0, |pe| pe.window);
        cfg.schedule
            .validate(cfg.tau_bar(), horizon)
            .map_err(|e| schedule_error("system.schedule", e))
    }

    /// Validation without the PE scan.
    pub fn validate_structure(&self) -> Result<(), ScenarioError> {
        let s = &self.system;
        if s.agents < 2 {
            return Err(ScenarioError::parse(
                "system.agents",
                format!("at least two agents are required, got {}", s.agents),
            ));
        }
        if s.dimension == 0 {
            return Err(ScenarioError::parse(
                "system.dimension",
                "dimension must be at least 1",
            ));
        }
        s.influence
            .validate()
            .map_err(|e| ScenarioError::parse("system.influence", e.to_string()))?;
        let tau_bar = s.delay.tau_bar();
        let tau_bar_ok = match &s.delay {
            DelaySpec::Pointwise { .. } => tau_bar.is_finite() && tau_bar >= 0.0,
            DelaySpec::Distributed(_) => tau_bar.is_finite() && tau_bar > 0.0,
        };
        if !tau_bar_ok {
            return Err(ScenarioError::parse(
                "system.delay.tau_bar",
                format!("tau_bar must be nonnegative and finite (positive for distributed delays), got {tau_bar}"),
            ));
        }
        s.delay
            .validate()
            .map_err(|e| ScenarioError::parse(delay_path(&e), e.to_string()))?;
        s.schedule
            .validate_pattern()
            .map_err(|e| ScenarioError::parse("system.schedule.pattern", e.to_string()))?;
        if let InitialSpec::RandomBall {
            position_radius,
            velocity_radius,
            ..
        } = &self.initial
        {
            for (name, r) in [
                ("position_radius", position_radius),
                ("velocity_radius", velocity_radius),
            ] {
                if !(r.is_finite() && *r >= 0.0) {
                    return Err(ScenarioError::parse(
                        format!("initial.{name}"),
                        format!("radius must be nonnegative, got {r}"),
                    ));
                }
            }
        }
        if let Some(rate) = self.overrides.envelope_rate {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(ScenarioError::parse(
                    "overrides.envelope_rate",
                    format!("rate must be nonnegative, got {rate}"),
                ));
            }
        }
        self.config().validate_structure().map_err(|e| {
            let path = match &e {
                crate::error::IntegratorError::InvalidSettings(_) => "system.integrator",
                crate::error::IntegratorError::Model(ModelError::InvalidConfig(msg))
                    if msg.contains("initial") =>
                {
                    "initial"
                }
                crate::error::IntegratorError::Model(ModelError::InvalidConfig(msg))
                    if msg.contains("coupling") =>
                {
                    "system.coupling"
                }
                _ => "system",
            };
            ScenarioError::parse(path, e.to_string())
        })
    }

    /// The scenario with one sweep point applied. A changed duty cycle resets
    /// the PE declaration to the square wave's default; a changed `tau_bar`
    /// keeps the declaration unless its window becomes shorter than the delay.
    pub fn at(&self, point: &GridPoint) -> Result<Scenario, ScenarioError> {
        let mut sc = self.clone();
        sc.sweep = SweepAxes::default();
        sc.name = format!("{}/{}", self.name, point.label());
        let s = &mut sc.system;
        if let Some(n) = point.agents {
            s.agents = n;
        }
        if let Some(tb) = point.tau_bar {
            match &mut s.delay {
                DelaySpec::Pointwise { tau, tau_bar } => {
                    *tau_bar = tb;
                    if let TimeFunction::Constant { value } = tau {
                        *value = tb;
                    }
                }
                DelaySpec::Distributed(kernel) => kernel.tau_bar = tb,
            }
            if s.schedule.pe.is_some_and(|pe| pe.window < tb) {
                s.schedule.pe = s.schedule.default_pe(tb);
            }
        }
        if let Some(d) = point.duty {
            match &mut s.schedule.pattern {
                SchedulePattern::SquareWave { duty, .. } => *duty = d,
                _ => {
                    return Err(ScenarioError::parse(
                        "sweep.duty",
                        "the duty axis needs a square-wave schedule",
                    ))
                }
            }
            s.schedule.pe = s.schedule.default_pe(s.delay.tau_bar());
        }
        if let Some(g) = point.gamma {
            match &mut s.influence {
                Influence::PowerLaw { gamma, .. } => *gamma = g,
                _ => {
                    return Err(ScenarioError::parse(
                        "sweep.gamma",
                        "the gamma axis needs a power-law influence",
                    ))
                }
            }
        }
        if let Some(seed) = point.seed {
            match &mut sc.initial {
                InitialSpec::RandomBall { seed: s0, .. } => *s0 = seed,
                InitialSpec::Explicit { .. } => {
                    return Err(ScenarioError::parse(
                        "sweep.seed",
                        "the seed axis needs generated initial data",
                    ))
                }
            }
        }
        if point.agents.is_some() && matches!(sc.initial, InitialSpec::Explicit { .. }) {
            return Err(ScenarioError::parse(
                "sweep.agents",
                "the agents axis needs generated initial data",
            ));
        }
        Ok(sc)
    }
}

fn delay_path(e: &ModelError) -> &'static str {
    match e {
        ModelError::InvalidKernel(_) => "system.delay.beta",
        ModelError::InvalidDelay(msg) if msg.starts_with("tau1") => "system.delay.tau1",
        ModelError::InvalidDelay(msg) if msg.starts_with("tau2") => "system.delay.tau2",
        ModelError::InvalidDelay(msg) if msg.starts_with("tau:") => "system.delay.tau",
        _ => "system.delay",
    }
}

fn schedule_error(base: &str, e: ScheduleError) -> ScenarioError {
    let path = match e {
        ScheduleError::PeViolated { .. } | ScheduleError::HorizonTooShort { .. } => {
            format!("{base}.pe")
        }
        ScheduleError::Invalid(ref msg)
            if msg.contains("PE") || msg.contains("window") || msg.contains("floor") =>
        {
            format!("{base}.pe")
        }
        _ => format!("{base}.pattern"),
    };
    ScenarioError::parse(path, e.to_string())
}

/// Parses TOML text into a scenario without any semantic validation.
pub fn parse_scenario_unchecked(text: &str) -> Result<Scenario, ScenarioError> {
    let table: toml::Table = toml::from_str(text)
        .map_err(|e| ScenarioError::parse("<document>", e.to_string().trim_end()))?;
    serde_path_to_error::deserialize(table).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::parse(
            if path == "." { "<root>".into() } else { path },
            e.into_inner().to_string(),
        )
    })
}

/// Parses and fully validates a scenario, including the exact PE check.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let sc = parse_scenario_unchecked(text)?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Exact PE report for the scenario's declared (or default) window.
pub fn verify_scenario_pe(
    sc: &Scenario,
) -> Result<Option<(crate::schedule::PeDeclaration, PeReport)>, ScenarioError> {
    let cfg = sc.config();
    let tau_bar = cfg.tau_bar();
    let Some(pe) = cfg.schedule.pe.or_else(|| cfg.schedule.default_pe(tau_bar)) else {
        return Ok(None);
    };
    let horizon = cfg.integrator.t_end + pe.window;
    let report = cfg
        .schedule
        .verify_pe(pe.window, pe.floor, horizon)
        .map_err(|e| schedule_error("system.schedule", e))?;
    Ok(Some((pe, report)))
}
