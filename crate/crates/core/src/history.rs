//! Dense trajectory record on `[-tau_bar, t_now]`.
//!
//! Times in `[-tau_bar, 0]` are answered from the initial-data functions.
//! Past `t = 0` every step is stored as a node carrying positions and
//! velocities, and every cell between nodes carries the accelerations at its
//! two ends. Positions and velocities are reconstructed by cubic Hermite
//! interpolation (position slopes are the node velocities). Accelerations are
//! stored per cell because the weight `alpha` may jump at a node.

use std::io::{self, Write};

use crate::config::{hermite_basis, InitialData};
use crate::error::HistoryError;

/// Relative slack on range checks, absorbing round-off in `t - tau(t)`.
const RANGE_SLACK: f64 = 1e-12;

/// Source of delayed states for the right-hand side.
pub trait DelayedStates {
    /// Writes the full state `[x_0 .. x_{N-1}, v_0 .. v_{N-1}]` at time `s`.
    fn state_at(&self, s: f64, out: &mut [f64]) -> Result<(), HistoryError>;
}

#[derive(Debug, Clone)]
pub struct TrajectoryHistory {
    agents: usize,
    dim: usize,
    tau_bar: f64,
    initial: InitialData,
    times: Vec<f64>,
    /// `times.len() * 2Nd`
    states: Vec<f64>,
    /// `(times.len() - 1) * 2Nd`: accelerations at the left and right end of each cell
    accels: Vec<f64>,
}

impl TrajectoryHistory {
    /// A history holding only the initial segment; the node at `t = 0` is the
    /// initial data evaluated at 0.
    pub fn new(initial: InitialData, agents: usize, dim: usize, tau_bar: f64) -> Self {
        let mut state = vec![0.0; 2 * agents * dim];
        initial.state_into(0.0, dim, &mut state);
        TrajectoryHistory {
            agents,
            dim,
            tau_bar,
            initial,
            times: vec![0.0],
            states: state,
            accels: Vec::new(),
        }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau_bar(&self) -> f64 {
        self.tau_bar
    }

    pub fn initial(&self) -> &InitialData {
        &self.initial
    }

    /// Width of one stored state, `2 N d`.
    pub fn width(&self) -> usize {
        2 * self.agents * self.dim
    }

    /// Node times, starting at 0.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_now(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        let w = self.width();
        &self.states[k * w..(k + 1) * w]
    }

    /// Accelerations `(left end, right end)` of cell `k` = `[t_k, t_{k+1}]`.
    pub fn cell_accels(&self, k: usize) -> (&[f64], &[f64]) {
        let nd = self.agents * self.dim;
        let base = 2 * nd * k;
        (
            &self.accels[base..base + nd],
            &self.accels[base + nd..base + 2 * nd],
        )
    }

    /// Commits a step ending at `t_new`. `accel_start` is the velocity
    /// derivative at `t_now` used on this step, `accel_end` the one at `t_new`.
    pub fn append(
        &mut self,
        t_new: f64,
        state: &[f64],
        accel_start: &[f64],
        accel_end: &[f64],
    ) -> Result<(), HistoryError> {
        let t_now = self.t_now();
        if !(t_new > t_now) {
            return Err(HistoryError::NonMonotone { t_new, t_now });
        }
        let w = self.width();
        let nd = w / 2;
        for (got, expected) in [
            (state.len(), w),
            (accel_start.len(), nd),
            (accel_end.len(), nd),
        ] {
            if got != expected {
                return Err(HistoryError::ShapeMismatch { got, expected });
            }
        }
        self.times.push(t_new);
        self.states.extend_from_slice(state);
        self.accels.extend_from_slice(accel_start);
        self.accels.extend_from_slice(accel_end);
        Ok(())
    }

    /// Positions and velocities of all agents at `s in [-tau_bar, t_now]`.
    pub fn sample(&self, s: f64) -> Result<Vec<f64>, HistoryError> {
        let mut out = vec![0.0; self.width()];
        self.sample_into(s, &mut out)?;
        Ok(out)
    }

    pub fn sample_into(&self, s: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        let t_now = self.t_now();
        let slack = RANGE_SLACK * (1.0 + t_now.abs() + self.tau_bar);
        if s.is_nan() || s < -self.tau_bar - slack || s > t_now + slack {
            return Err(HistoryError::OutOfRange {
                t: s,
                start: -self.tau_bar,
                end: t_now,
            });
        }
        if s <= 0.0 {
            self.initial.state_into(s.max(-self.tau_bar), self.dim, out);
            return Ok(());
        }
        let s = s.min(t_now);
        let idx = self.times.partition_point(|&t| t < s);
        if self.times[idx] == s {
            out.copy_from_slice(self.state(idx));
            return Ok(());
        }
        self.eval_cell(idx - 1, s, out);
        Ok(())
    }

    /// Hermite value of cell `k` at `s` (extrapolates outside the cell).
    pub(crate) fn eval_cell(&self, k: usize, s: f64, out: &mut [f64]) {
        let nd = self.agents * self.dim;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let (b00, b10, b01, b11) = hermite_basis((s - t0) / h);
        let y0 = self.state(k);
        let y1 = self.state(k + 1);
        let (a0, a1) = self.cell_accels(k);
        for c in 0..nd {
            // positions: slopes are the node velocities
            out[c] = b00 * y0[c] + b10 * h * y0[nd + c] + b01 * y1[c] + b11 * h * y1[nd + c];
            out[nd + c] = b00 * y0[nd + c] + b10 * h * a0[c] + b01 * y1[nd + c] + b11 * h * a1[c];
        }
    }

    /// Continues the last cell's cubic past `t_now`; `false` if no cell exists yet.
    pub(crate) fn extrapolate_into(&self, s: f64, out: &mut [f64]) -> bool {
        if self.times.len() < 2 {
            return false;
        }
        self.eval_cell(self.times.len() - 2, s, out);
        true
    }

    /// Trajectory CSV: `t, agent, x_0..x_{d-1}, v_0..v_{d-1}`, one row per agent
    /// per emitted node (every `stride`-th node plus the last one).
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        let d = self.dim;
        let nd = self.agents * d;
        let mut header = String::from("t,agent");
        for c in 0..d {
            header.push_str(&format!(",x{c}"));
        }
        for c in 0..d {
            header.push_str(&format!(",v{c}"));
        }
        writeln!(w, "{header}")?;
        let last = self.times.len() - 1;
        for k in (0..=last).filter(|k| k % stride.max(1) == 0 || *k == last) {
            let y = self.state(k);
            for i in 0..self.agents {
                write!(w, "{},{i}", self.times[k])?;
                for c in 0..d {
                    write!(w, ",{}", y[i * d + c])?;
                }
                for c in 0..d {
                    write!(w, ",{}", y[nd + i * d + c])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

impl DelayedStates for TrajectoryHistory {
    fn state_at(&self, s: f64, out: &mut [f64]) -> Result<(), HistoryError> {
        self.sample_into(s, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history_with(tau_bar: f64) -> TrajectoryHistory {
        let initial = InitialData::constant(&[vec![1.0], vec![-1.0]], &[vec![0.25], vec![-0.75]]);
        TrajectoryHistory::new(initial, 2, 1, tau_bar)
    }

    /// Appends nodes of the exact trajectory x = p(t), v = p'(t), a = p''(t).
    fn fill_cubic(h: &mut TrajectoryHistory, step: f64, n: usize) {
        let first = h.len();
        let p = |t: f64| 0.3 * t * t * t - t * t + 2.0 * t + 1.0;
        let dp = |t: f64| 0.9 * t * t - 2.0 * t + 2.0;
        let ddp = |t: f64| 1.8 * t - 2.0;
        for k in first..=n {
            let t0 = (k - 1) as f64 * step;
            let t = k as f64 * step;
            let state = [p(t), -p(t), dp(t), -dp(t)];
            h.append(t, &state, &[ddp(t0), -ddp(t0)], &[ddp(t), -ddp(t)])
                .unwrap();
        }
    }

    #[test]
    fn initial_segment_is_exact() {
        let h = history_with(0.5);
        assert_eq!(h.sample(-0.3).unwrap(), vec![1.0, -1.0, 0.25, -0.75]);
        assert_eq!(h.sample(-0.5).unwrap(), vec![1.0, -1.0, 0.25, -0.75]);
        assert!(matches!(
            h.sample(-0.6),
            Err(HistoryError::OutOfRange { .. })
        ));
        assert!(matches!(
            h.sample(0.1),
            Err(HistoryError::OutOfRange { .. })
        ));
    }

    #[test]
    fn append_contract() {
        let mut h = history_with(0.5);
        let s = [0.0; 4];
        let a = [0.0; 2];
        h.append(0.1, &s, &a, &a).unwrap();
        assert_eq!(h.t_now(), 0.1);
        h.append(0.2, &s, &a, &a).unwrap();
        assert_eq!(h.len(), 3);
        assert!(matches!(
            h.append(0.2, &s, &a, &a),
            Err(HistoryError::NonMonotone { .. })
        ));
        assert!(matches!(
            h.append(0.3, &s[..3], &a, &a),
            Err(HistoryError::ShapeMismatch { .. })
        ));
        assert_eq!(h.sample(0.1).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn past_is_not_mutated_by_append() {
        let mut h = history_with(0.5);
        fill_cubic(&mut h, 0.1, 3);
        let before = h.sample(0.15).unwrap();
        fill_cubic(&mut h, 0.1, 6);
        assert_eq!(h.sample(0.15).unwrap(), before);
    }

    #[test]
    fn reproduces_cubic_trajectories() {
        let mut h = history_with(0.5);
        // restart at t = 0 is the constant initial state, so start the cubic in cell 1
        fill_cubic(&mut h, 0.25, 8);
        let p = |t: f64| 0.3 * t * t * t - t * t + 2.0 * t + 1.0;
        let dp = |t: f64| 0.9 * t * t - 2.0 * t + 2.0;
        for k in 0..100 {
            let t = 0.25 + 1.75 * k as f64 / 99.0;
            let y = h.sample(t).unwrap();
            assert!((y[0] - p(t)).abs() < 1e-13, "x at {t}");
            assert!((y[2] - dp(t)).abs() < 1e-13, "v at {t}");
            assert!((y[3] + dp(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolation_error_is_fourth_order() {
        let f = |t: f64| (3.0 * t).sin();
        let df = |t: f64| 3.0 * (3.0 * t).cos();
        let ddf = |t: f64| -9.0 * (3.0 * t).sin();
        let max_err = |step: f64| {
            let mut h = history_with(0.5);
            let n = (2.0 / step).round() as usize;
            for k in 1..=n {
                let (t0, t) = ((k - 1) as f64 * step, k as f64 * step);
                h.append(t, &[f(t), 0.0, df(t), 0.0], &[ddf(t0), 0.0], &[ddf(t), 0.0])
                    .unwrap();
            }
            // the first cell starts from the constant initial node
            (200..2000)
                .map(|j| {
                    let t = j as f64 * 1e-3;
                    (h.sample(t).unwrap()[2] - df(t)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (max_err(0.1), max_err(0.05));
        let order = (e1 / e2).log2();
        assert!(order >= 3.5, "observed order {order}");
    }
}
