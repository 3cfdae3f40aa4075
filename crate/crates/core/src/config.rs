//! Full description of one simulation: agents, influence, delay, weights,
//! initial history and integrator settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::delay::DelaySpec;
use crate::error::{IntegratorError, ModelError};
use crate::influence::Influence;
use crate::schedule::WeightSchedule;

/// A continuous `R^d`-valued function on `[-tau_bar, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialPath {
    Constant {
        value: Vec<f64>,
    },
    /// `at_zero + slope * s`.
    Linear {
        at_zero: Vec<f64>,
        slope: Vec<f64>,
    },
    /// Cubic Hermite through the samples with finite-difference slopes.
    Sampled {
        times: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InitialPath {
    pub fn dim(&self) -> usize {
        match self {
            InitialPath::Constant { value } => value.len(),
            InitialPath::Linear { at_zero, .. } => at_zero.len(),
            InitialPath::Sampled { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    fn validate(&self, d: usize, tau_bar: f64, field: &str) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(format!("{field}: {msg}")));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            InitialPath::Constant { value } => {
                if value.len() != d || !finite(value) {
                    return bad(format!("expected {d} finite components"));
                }
            }
            InitialPath::Linear { at_zero, slope } => {
                if at_zero.len() != d || slope.len() != d || !finite(at_zero) || !finite(slope) {
                    return bad(format!("expected {d} finite components"));
                }
            }
            InitialPath::Sampled { times, values } => {
                if times.len() < 2 || times.len() != values.len() {
                    return bad("need at least two samples with one value per time".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("sample times must be strictly increasing".into());
                }
                if times[0] > -tau_bar || *times.last().unwrap() < 0.0 {
                    return bad(format!("samples must cover [-{tau_bar}, 0]"));
                }
                if values.iter().any(|v| v.len() != d || !finite(v)) {
                    return bad(format!("every sample needs {d} finite components"));
                }
            }
        }
        Ok(())
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        match self {
            InitialPath::Constant { value } => out.copy_from_slice(value),
            InitialPath::Linear { at_zero, slope } => {
                for ((o, a), b) in out.iter_mut().zip(at_zero).zip(slope) {
                    *o = a + b * s;
                }
            }
            InitialPath::Sampled { times, values } => {
                let last = times.len() - 1;
                let k = times.partition_point(|&t| t <= s).clamp(1, last) - 1;
                let (t0, t1) = (times[k], times[k + 1]);
                let h = t1 - t0;
                let theta = ((s - t0) / h).clamp(0.0, 1.0);
                let (h00, h10, h01, h11) = hermite_basis(theta);
                for (c, o) in out.iter_mut().enumerate() {
                    let m0 = sampled_slope(times, values, k, c);
                    let m1 = sampled_slope(times, values, k + 1, c);
                    *o = h00 * values[k][c] + h10 * h * m0 + h01 * values[k + 1][c] + h11 * h * m1;
                }
            }
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(s, &mut out);
        out
    }

    /// Times in `[-tau_bar, 0]` where the maxima of convex functionals of the
    /// path are attained (exactly for constant and linear paths, on a dense
    /// grid for sampled ones).
    pub fn probe_times(&self, tau_bar: f64) -> Vec<f64> {
        match self {
            InitialPath::Constant { .. } => vec![0.0],
            InitialPath::Linear { .. } => {
                if tau_bar > 0.0 {
                    vec![-tau_bar, 0.0]
                } else {
                    vec![0.0]
                }
            }
            InitialPath::Sampled { times, .. } => {
                let mut out: Vec<f64> = (0..=1000)
                    .map(|k| -tau_bar + tau_bar * k as f64 / 1000.0)
                    .collect();
                out.extend(times.iter().copied().filter(|&t| t >= -tau_bar && t <= 0.0));
                out.sort_by(f64::total_cmp);
                out.dedup();
                out
            }
        }
    }
}

fn sampled_slope(times: &[f64], values: &[Vec<f64>], k: usize, c: usize) -> f64 {
    let last = times.len() - 1;
    let (a, b) = if k == 0 {
        (0, 1)
    } else if k == last {
        (last - 1, last)
    } else {
        (k - 1, k + 1)
    };
    (values[b][c] - values[a][c]) / (times[b] - times[a])
}

/// Cubic Hermite basis `(h00, h10, h01, h11)` at `theta`.
#[inline]
pub(crate) fn hermite_basis(theta: f64) -> (f64, f64, f64, f64) {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + theta,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentHistory {
    pub position: InitialPath,
    pub velocity: InitialPath,
}

/// Initial positions and velocities of every agent on `[-tau_bar, 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InitialData {
    pub agents: Vec<AgentHistory>,
}

impl InitialData {
    /// Constant histories.
    pub fn constant(positions: &[Vec<f64>], velocities: &[Vec<f64>]) -> Self {
        let agents = positions
            .iter()
            .zip(velocities)
            .map(|(x, v)| AgentHistory {
                position: InitialPath::Constant { value: x.clone() },
                velocity: InitialPath::Constant { value: v.clone() },
            })
            .collect();
        InitialData { agents }
    }

    /// Seeded random data: positions uniform in a ball of radius
    /// `position_radius`, velocities uniform in a ball of radius
    /// `velocity_radius`. With `pin_extremes`, agents 0 and 1 get velocities
    /// `+-velocity_radius e_1`, which fixes `C0V = velocity_radius` and
    /// `D0 = 2 velocity_radius` for every agent count. With `moving`, positions
    /// follow `x(s) = x(0) + s v` on the history segment.
    pub fn random_ball(
        n: usize,
        d: usize,
        seed: u64,
        position_radius: f64,
        velocity_radius: f64,
        pin_extremes: bool,
        moving: bool,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut agents = Vec::with_capacity(n);
        for i in 0..n {
            let x = sample_ball(&mut rng, d, position_radius);
            let mut v = sample_ball(&mut rng, d, velocity_radius);
            if pin_extremes && i < 2 {
                v = vec![0.0; d];
                v[0] = if i == 0 {
                    velocity_radius
                } else {
                    -velocity_radius
                };
            }
            let position = if moving {
                InitialPath::Linear {
                    at_zero: x,
                    slope: v.clone(),
                }
            } else {
                InitialPath::Constant { value: x }
            };
            agents.push(AgentHistory {
                position,
                velocity: InitialPath::Constant { value: v },
            });
        }
        InitialData { agents }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Writes the flat state `[x_0 .. x_{N-1}, v_0 .. v_{N-1}]` at `s`.
    pub fn state_into(&self, s: f64, d: usize, out: &mut [f64]) {
        let n = self.agents.len();
        let (xs, vs) = out.split_at_mut(n * d);
        for (i, agent) in self.agents.iter().enumerate() {
            agent.position.eval_into(s, &mut xs[i * d..(i + 1) * d]);
            agent.velocity.eval_into(s, &mut vs[i * d..(i + 1) * d]);
        }
    }

    fn validate(&self, n: usize, d: usize, tau_bar: f64) -> Result<(), ModelError> {
        if self.agents.len() != n {
            return Err(ModelError::InvalidConfig(format!(
                "initial data lists {} agents, expected {n}",
                self.agents.len()
            )));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent
                .position
                .validate(d, tau_bar, &format!("initial[{i}].position"))?;
            agent
                .velocity
                .validate(d, tau_bar, &format!("initial[{i}].velocity"))?;
        }
        Ok(())
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, d: usize, radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; d];
    }
    loop {
        let p: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm2: f64 = p.iter().map(|x| x * x).sum();
        if norm2 <= 1.0 {
            return p.into_iter().map(|x| x * radius).collect();
        }
    }
}

/// How the delayed neighbour enters the velocity equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `v_j(t - tau) - v_i(t)`.
    #[default]
    Velocity,
    /// `x_j(t - tau) - x_i(t)`.
    LiteralPosition,
}

fn default_overlap() -> usize {
    2
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    /// Maximal step; `None` selects `min(tau_bar / 20, T / 50, 1e-2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_step: Option<f64>,
    pub t_end: f64,
    /// Fixed-point sweeps when a stage looks up a time inside the current step.
    #[serde(default = "default_overlap")]
    pub overlap_iterations: usize,
    /// Every k-th step is emitted to outputs and diagnostics.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl IntegratorSettings {
    pub fn new(t_end: f64) -> Self {
        IntegratorSettings {
            h_step: None,
            t_end,
            overlap_iterations: default_overlap(),
            record_stride: default_stride(),
        }
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.h_step = Some(h);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub agents: usize,
    pub dimension: usize,
    pub influence: Influence,
    pub delay: DelaySpec,
    pub schedule: WeightSchedule,
    pub initial: InitialData,
    #[serde(default)]
    pub coupling: Coupling,
    pub integrator: IntegratorSettings,
}

impl SystemConfig {
    /// Everything except the persistence-of-excitation declaration.
    pub fn validate_structure(&self) -> Result<(), IntegratorError> {
        if self.agents < 2 {
            return Err(ModelError::TooFewAgents(self.agents).into());
        }
        if self.dimension == 0 {
            return Err(ModelError::InvalidConfig("dimension must be at least 1".into()).into());
        }
        self.influence.validate()?;
        self.delay.validate()?;
        if self.coupling == Coupling::LiteralPosition && self.delay.is_distributed() {
            return Err(ModelError::InvalidConfig(
                "literal position coupling applies to the pointwise model only".into(),
            )
            .into());
        }
        self.schedule.validate_pattern()?;
        self.initial
            .validate(self.agents, self.dimension, self.delay.tau_bar())?;
        let s = &self.integrator;
        if !(s.t_end.is_finite() && s.t_end > 0.0) {
            return Err(IntegratorError::InvalidSettings(format!(
                "t_end must be positive, got {}",
                s.t_end
            )));
        }
        if let Some(h) = s.h_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(IntegratorError::InvalidSettings(format!(
                    "h_step must be positive, got {h}"
                )));
            }
        }
        if s.overlap_iterations == 0 {
            return Err(IntegratorError::InvalidSettings(
                "overlap_iterations must be at least 1".into(),
            ));
        }
        if s.record_stride == 0 {
            return Err(IntegratorError::InvalidSettings(
                "record_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Structure plus the PE declaration, verified exactly on
    /// `[0, t_end + T]` so every window starting before `t_end` is covered.
    pub fn validate(&self) -> Result<(), IntegratorError> {
        self.validate_structure()?;
        let horizon = self.integrator.t_end + self.schedule.pe.map_or(0.0, |pe| pe.window);
        self.schedule.validate(self.delay.tau_bar(), horizon)?;
        Ok(())
    }

    pub fn tau_bar(&self) -> f64 {
        self.delay.tau_bar()
    }

    /// Width of the flat state vector, `2 N d`.
    pub fn state_width(&self) -> usize {
        2 * self.agents * self.dimension
    }

    pub fn step_size(&self) -> f64 {
        if let Some(h) = self.integrator.h_step {
            return h;
        }
        let mut h: f64 = 1e-2;
        let tau_bar = self.tau_bar();
        if tau_bar > 0.0 {
            h = h.min(tau_bar / 20.0);
        }
        if let Some(pe) = self.schedule.pe {
            h = h.min(pe.window / 50.0);
        }
        h
    }
}
