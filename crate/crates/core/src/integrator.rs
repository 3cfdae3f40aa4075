//! Method of steps with classical RK4.
//!
//! Steps never straddle a breakpoint of `alpha`, so the weight is a constant
//! on each step (taken at the step midpoint). Delayed lookups are served by
//! the committed history; when a lag is shorter than the step, a stage may
//! ask for a time inside the step being computed. Those lookups get a
//! predictor first and are then refined by re-running the step against its
//! own provisional Hermite cell.

use std::cell::Cell;

use crate::config::{hermite_basis, SystemConfig};
use crate::error::{HistoryError, IntegratorError, ScheduleError};
use crate::history::{DelayedStates, TrajectoryHistory};
use crate::model::Rhs;
use crate::schedule::WeightSchedule;

/// Breakpoints closer than this are rejected.
const DEGENERATE_GAP: f64 = 1e-12;
/// Window marks closer than this to an existing plan time are dropped.
const MARK_MERGE: f64 = 1e-9;

/// Step times on `[0, t_end]`: every breakpoint of `alpha` is a step time and
/// no step is longer than `h_step`.
pub fn align_breakpoints(
    schedule: &WeightSchedule,
    h_step: f64,
    t_end: f64,
) -> Result<Vec<f64>, IntegratorError> {
    plan_with_marks(schedule, h_step, t_end, &[])
}

/// The step plan used by [`run`]: [`align_breakpoints`] plus the window marks
/// `kT` and `kT - tau_bar`, so that diagnostics find nodes exactly there.
pub fn plan_steps(cfg: &SystemConfig) -> Result<Vec<f64>, IntegratorError> {
    let t_end = cfg.integrator.t_end;
    let tau_bar = cfg.tau_bar();
    let mut marks = Vec::new();
    if let Some(pe) = cfg.schedule.pe.or_else(|| cfg.schedule.default_pe(tau_bar)) {
        let mut k = 1.0;
        while k * pe.window - tau_bar < t_end {
            marks.push(k * pe.window);
            marks.push(k * pe.window - tau_bar);
            k += 1.0;
        }
    }
    plan_with_marks(&cfg.schedule, cfg.step_size(), t_end, &marks)
}

fn plan_with_marks(
    schedule: &WeightSchedule,
    h_step: f64,
    t_end: f64,
    marks: &[f64],
) -> Result<Vec<f64>, IntegratorError> {
    if !(h_step.is_finite() && h_step > 0.0) {
        return Err(IntegratorError::InvalidSettings(format!(
            "h_step must be positive, got {h_step}"
        )));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(IntegratorError::InvalidSettings(format!(
            "t_end must be positive, got {t_end}"
        )));
    }
    let mut anchors = vec![0.0];
    for b in schedule.breakpoints(t_end) {
        if t_end - b < DEGENERATE_GAP {
            break;
        }
        let prev = *anchors.last().unwrap();
        if b - prev < DEGENERATE_GAP {
            return Err(ScheduleError::DegenerateSchedule(prev, b).into());
        }
        anchors.push(b);
    }
    anchors.push(t_end);

    let mut extra: Vec<f64> = marks
        .iter()
        .copied()
        .filter(|&m| m > 0.0 && m < t_end)
        .collect();
    extra.sort_by(f64::total_cmp);
    for m in extra {
        let idx = anchors.partition_point(|&a| a < m);
        let near = |j: usize| anchors.get(j).is_some_and(|&a| (a - m).abs() < MARK_MERGE);
        if !(near(idx) || (idx > 0 && near(idx - 1))) {
            anchors.insert(idx, m);
        }
    }

    let mut plan = vec![0.0];
    for w in anchors.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = (((b - a) / h_step) - 1e-9).ceil().max(1.0) as usize;
        for j in 1..n {
            plan.push(a + (b - a) * j as f64 / n as f64);
        }
        plan.push(b);
    }
    Ok(plan)
}

/// Provisional cubic on the step being computed.
struct StepCell<'a> {
    t0: f64,
    t1: f64,
    y0: &'a [f64],
    y1: &'a [f64],
    d0: &'a [f64],
    d1: &'a [f64],
}

impl StepCell<'_> {
    fn eval(&self, s: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        let (b00, b10, b01, b11) = hermite_basis((s - self.t0) / h);
        for (c, o) in out.iter_mut().enumerate() {
            *o = b00 * self.y0[c] + b10 * h * self.d0[c] + b01 * self.y1[c] + b11 * h * self.d1[c];
        }
    }
}

/// Lookups during one step: committed history up to `t0`, then either the
/// provisional cell or a predictor.
struct StepLookup<'a> {
    history: &'a TrajectoryHistory,
    t0: f64,
    cell: Option<StepCell<'a>>,
    /// `(y0, k1)` for a first-order predictor when no committed cell exists yet.
    taylor: (&'a [f64], &'a [f64]),
    overlapped: Cell<bool>,
}

impl DelayedStates for StepLookup<'_> {
    fn state_at(&self, s: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        if s <= self.t0 + 1e-12 * (1.0 + self.t0.abs()) {
            return self.history.sample_into(s.min(self.t0), out);
        }
        self.overlapped.set(true);
        if let Some(cell) = &self.cell {
            cell.eval(s, out);
        } else if !self.history.extrapolate_into(s, out) {
            let (y0, k1) = self.taylor;
            for (c, o) in out.iter_mut().enumerate() {
                *o = y0[c] + (s - self.t0) * k1[c];
            }
        }
        Ok(())
    }
}

struct Stages {
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    kend: Vec<f64>,
    tmp: Vec<f64>,
    y1: Vec<f64>,
}

impl Stages {
    fn new(w: usize) -> Self {
        Stages {
            k2: vec![0.0; w],
            k3: vec![0.0; w],
            k4: vec![0.0; w],
            kend: vec![0.0; w],
            tmp: vec![0.0; w],
            y1: vec![0.0; w],
        }
    }

    /// Stages 2 to 4, the new state, and the derivative at its end.
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &mut self,
        rhs: &mut Rhs,
        lookup: &StepLookup<'_>,
        t0: f64,
        h: f64,
        alpha: f64,
        y0: &[f64],
        k1: &[f64],
    ) -> Result<(), IntegratorError> {
        let axpy = |tmp: &mut [f64], a: f64, k: &[f64]| {
            for ((t, y), k) in tmp.iter_mut().zip(y0).zip(k) {
                *t = y + a * k;
            }
        };
        axpy(&mut self.tmp, 0.5 * h, k1);
        rhs.eval(t0 + 0.5 * h, alpha, &self.tmp, lookup, &mut self.k2)?;
        axpy(&mut self.tmp, 0.5 * h, &self.k2);
        rhs.eval(t0 + 0.5 * h, alpha, &self.tmp, lookup, &mut self.k3)?;
        axpy(&mut self.tmp, h, &self.k3);
        rhs.eval(t0 + h, alpha, &self.tmp, lookup, &mut self.k4)?;
        for c in 0..y0.len() {
            self.y1[c] =
                y0[c] + h / 6.0 * (k1[c] + 2.0 * self.k2[c] + 2.0 * self.k3[c] + self.k4[c]);
        }
        rhs.eval(t0 + h, alpha, &self.y1, lookup, &mut self.kend)?;
        Ok(())
    }
}

/// Integrates `cfg` on `[0, t_end]`. The PE declaration is not checked here;
/// see [`SystemConfig::validate`].
pub fn run(cfg: &SystemConfig) -> Result<TrajectoryHistory, IntegratorError> {
    cfg.validate_structure()?;
    let plan = plan_steps(cfg)?;
    let n = cfg.agents;
    let d = cfg.dimension;
    let nd = n * d;
    let w = cfg.state_width();
    let iterations = cfg.integrator.overlap_iterations;

    let mut history = TrajectoryHistory::new(cfg.initial.clone(), n, d, cfg.tau_bar());
    let mut rhs = Rhs::new(cfg);
    let mut y0 = history.state(0).to_vec();
    let mut k1 = vec![0.0; w];
    let mut k1_alpha: Option<f64> = None;
    let mut stages = Stages::new(w);

    for step in plan.windows(2) {
        let (t0, t1) = (step[0], step[1]);
        let h = t1 - t0;
        let alpha = cfg.schedule.value(0.5 * (t0 + t1));

        if k1_alpha != Some(alpha) {
            // lookups at t0 - lag never pass t0
            let lookup = StepLookup {
                history: &history,
                t0,
                cell: None,
                taylor: (&y0, &y0),
                overlapped: Cell::new(false),
            };
            rhs.eval(t0, alpha, &y0, &lookup, &mut k1)?;
        }

        let predictor = StepLookup {
            history: &history,
            t0,
            cell: None,
            taylor: (&y0, &k1),
            overlapped: Cell::new(false),
        };
        stages.sweep(&mut rhs, &predictor, t0, h, alpha, &y0, &k1)?;
        let overlapped = predictor.overlapped.get();

        if overlapped {
            for _ in 0..iterations {
                let (y1, kend) = (stages.y1.clone(), stages.kend.clone());
                let refine = StepLookup {
                    history: &history,
                    t0,
                    cell: Some(StepCell {
                        t0,
                        t1,
                        y0: &y0,
                        y1: &y1,
                        d0: &k1,
                        d1: &kend,
                    }),
                    taylor: (&y0, &k1),
                    overlapped: Cell::new(false),
                };
                stages.sweep(&mut rhs, &refine, t0, h, alpha, &y0, &k1)?;
            }
        }

        if let Some(c) = stages.y1.iter().position(|v| !v.is_finite()) {
            return Err(IntegratorError::NonFinite {
                t: t1,
                agent: (c % nd) / d,
            });
        }
        history.append(t1, &stages.y1, &k1[nd..], &stages.kend[nd..])?;
        y0.copy_from_slice(&stages.y1);
        if overlapped {
            k1_alpha = None;
        } else {
            k1.copy_from_slice(&stages.kend);
            k1_alpha = Some(alpha);
        }
    }
    Ok(history)
}
