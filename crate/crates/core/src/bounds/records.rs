//! The record grid: the samples of a run on which diagnostics are evaluated.

use crate::history::TrajectoryHistory;
use crate::model::distance;

/// Times within this distance are treated as equal when matching window marks.
pub(crate) const TIME_EPS: f64 = 1e-9;

/// Exact pairwise maxima `(d_X, d_V)` of one flat state
/// `[x_0 .. x_{N-1}, v_0 .. v_{N-1}]` with `N` agents in `R^d`.
pub fn diameters(state: &[f64], agents: usize, dim: usize) -> (f64, f64) {
    let nd = agents * dim;
    let (xs, vs) = state.split_at(nd);
    let mut dx: f64 = 0.0;
    let mut dv: f64 = 0.0;
    for i in 0..agents {
        for j in i + 1..agents {
            dx = dx.max(distance(
                &xs[i * dim..(i + 1) * dim],
                &xs[j * dim..(j + 1) * dim],
            ));
            dv = dv.max(distance(
                &vs[i * dim..(i + 1) * dim],
                &vs[j * dim..(j + 1) * dim],
            ));
        }
    }
    (dx, dv)
}

/// Diameter of the velocity cloud of several states (pairs may come from
/// different times, and `i = j` is allowed).
pub(crate) fn velocity_cloud_diameter<'a, I>(states: I, agents: usize, dim: usize) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let nd = agents * dim;
    let points: Vec<&[f64]> = states
        .into_iter()
        .flat_map(|s| (0..agents).map(move |i| &s[nd + i * dim..nd + (i + 1) * dim]))
        .collect();
    let mut best: f64 = 0.0;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            best = best.max(distance(p, q));
        }
    }
    best
}

/// Records on `[-tau_bar, t_end]`: a uniform sampling of the initial segment
/// followed by every `stride`-th history node, always keeping the nodes at
/// the supplied marks and the final node.
#[derive(Debug, Clone)]
pub(crate) struct Records {
    pub times: Vec<f64>,
    states: Vec<f64>,
    width: usize,
    /// Index of the first record at `t >= 0`.
    pub first_nonnegative: usize,
    /// History node index of each record at `t >= 0`.
    pub nodes: Vec<usize>,
    pub d_x: Vec<f64>,
    pub d_v: Vec<f64>,
}

impl Records {
    pub fn build(history: &TrajectoryHistory, step: f64, stride: usize, marks: &[f64]) -> Self {
        let stride = stride.max(1);
        let width = history.width();
        let tau_bar = history.tau_bar();
        let mut times = Vec::new();
        let mut states = Vec::new();
        if tau_bar > 0.0 {
            let cells = (tau_bar / (step * stride as f64)).ceil().max(1.0) as usize;
            let mut buf = vec![0.0; width];
            for j in 0..cells {
                let s = -tau_bar + tau_bar * j as f64 / cells as f64;
                history.initial().state_into(s, history.dim(), &mut buf);
                times.push(s);
                states.extend_from_slice(&buf);
            }
        }
        let first_nonnegative = times.len();

        let node_times = history.times();
        let last = node_times.len() - 1;
        let mut keep = vec![false; node_times.len()];
        for (k, flag) in keep.iter_mut().enumerate() {
            *flag = k % stride == 0 || k == last;
        }
        for &m in marks {
            let idx = node_times.partition_point(|&t| t < m - TIME_EPS);
            if idx <= last && (node_times[idx] - m).abs() <= TIME_EPS {
                keep[idx] = true;
            }
        }
        let mut nodes = Vec::new();
        for k in (0..=last).filter(|&k| keep[k]) {
            times.push(node_times[k]);
            states.extend_from_slice(history.state(k));
            nodes.push(k);
        }

        let (n, d) = (history.agents(), history.dim());
        let (d_x, d_v) = states.chunks(width).map(|s| diameters(s, n, d)).unzip();
        Records {
            times,
            states,
            width,
            first_nonnegative,
            nodes,
            d_x,
            d_v,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.width..(k + 1) * self.width]
    }

    /// Record indices with times in `[a, b]`, up to [`TIME_EPS`].
    pub fn window(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.times.partition_point(|&t| t < a - TIME_EPS);
        let hi = self.times.partition_point(|&t| t <= b + TIME_EPS);
        lo..hi.max(lo)
    }

    /// Record index of the record at time `t`, if one exists.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s < t - TIME_EPS);
        (k < self.len() && (self.times[k] - t).abs() <= TIME_EPS).then_some(k)
    }

    /// Running maximum of `d_X` over the records.
    pub fn running_max_dx(&self) -> Vec<f64> {
        let mut acc: f64 = 0.0;
        self.d_x
            .iter()
            .map(|&v| {
                acc = acc.max(v);
                acc
            })
            .collect()
    }
}

/// Piecewise-linear interpolation of a nondecreasing record series, clamped
/// at both ends.
pub(crate) fn interpolate(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|&s| s <= t);
    if k == 0 {
        return values[0];
    }
    if k == times.len() {
        return values[k - 1];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let theta = (t - t0) / (t1 - t0);
    values[k - 1] + theta * (values[k] - values[k - 1])
}
