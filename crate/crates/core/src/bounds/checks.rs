//! Individual inequality checks. Every check reduces to a stream of margins
//! `bound - value` that must stay above `-tolerance`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InitialData, SystemConfig};
use crate::delay::DelaySpec;
use crate::history::TrajectoryHistory;
use crate::model::distance;
use crate::quadrature::GaussLegendre;

use super::records::Records;

/// Outcome of one checked inequality family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// Number of instances evaluated.
    pub checked: usize,
    pub tolerance: f64,
    /// Smallest `bound - value` seen; `None` when nothing was evaluated.
    pub worst_margin: Option<f64>,
    /// Time (or window index `n` for sequence checks) of the worst margin.
    pub worst_at: Option<f64>,
    pub first_violation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    /// A check that could not run; it fails unless `pass` says otherwise.
    pub fn skipped(name: &str, pass: bool, note: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            pass,
            checked: 0,
            tolerance: 0.0,
            worst_margin: None,
            worst_at: None,
            first_violation: None,
            note: Some(note.into()),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Tally {
    name: &'static str,
    tolerance: f64,
    checked: usize,
    worst: f64,
    worst_at: f64,
    first: Option<f64>,
}

impl Tally {
    pub fn new(name: &'static str, tolerance: f64) -> Self {
        Tally {
            name,
            tolerance,
            checked: 0,
            worst: f64::INFINITY,
            worst_at: f64::NAN,
            first: None,
        }
    }

    pub fn observe(&mut self, at: f64, margin: f64) {
        self.checked += 1;
        // NaN margins count as violations
        let margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        if margin < self.worst {
            self.worst = margin;
            self.worst_at = at;
        }
        if margin < -self.tolerance && self.first.is_none() {
            self.first = Some(at);
        }
    }

    pub fn finish(self) -> Verdict {
        let any = self.checked > 0;
        Verdict {
            name: self.name.to_string(),
            pass: self.first.is_none(),
            checked: self.checked,
            tolerance: self.tolerance,
            worst_margin: any.then_some(self.worst),
            worst_at: any.then_some(self.worst_at),
            first_violation: self.first,
            note: None,
        }
    }
}

/// Verdicts for the window-diameter sequence:
/// `D_{n+1} <= D_n`, `D_{n+1} <= e^{-KT} d_V(nT) + (1 - e^{-KT}) D_n`, and
/// `D_{n+1} <= (1 - C_n) D_{n-2}` for `n >= 2`.
///
/// `d_v_at_windows[n]` is `d_V(nT)`; all slices are indexed by `n`. The
/// third verdict is omitted when `contraction` is empty.
pub fn check_sequence_properties(
    diam: &[f64],
    contraction: &[f64],
    d_v_at_windows: &[f64],
    k: f64,
    window: f64,
    tolerance: f64,
) -> Vec<Verdict> {
    let decay = (-k * window).exp();
    let mut monotone = Tally::new("monotone_diameter", tolerance);
    let mut one_step = Tally::new("one_step", tolerance);
    let mut contract = Tally::new("contraction", tolerance);
    for n in 0..diam.len().saturating_sub(1) {
        let next = diam[n + 1];
        monotone.observe(n as f64, diam[n] - next);
        if let Some(dv) = d_v_at_windows.get(n) {
            one_step.observe(n as f64, decay * dv + (1.0 - decay) * diam[n] - next);
        }
        if n >= 2 {
            if let Some(c) = contraction.get(n) {
                contract.observe(n as f64, (1.0 - c) * diam[n - 2] - next);
            }
        }
    }
    let mut out = vec![monotone.finish(), one_step.finish()];
    if !contraction.is_empty() {
        out.push(contract.finish());
    }
    out
}

/// `d_V(t) <= D0 e^{-mu (t - 3T)} (1 + 1e-6)` at every supplied `t >= 0`.
pub fn check_decay_envelope(
    times: &[f64],
    d_v: &[f64],
    d0: f64,
    mu: f64,
    window: f64,
    floor: f64,
) -> Verdict {
    let mut tally = Tally::new("envelope", floor);
    for (&t, &dv) in times.iter().zip(d_v) {
        if t < 0.0 {
            continue;
        }
        let envelope = d0 * (-mu * (t - 3.0 * window)).exp() * (1.0 + 1e-6);
        tally.observe(t, envelope - dv);
    }
    tally.finish()
}

/// Delayed arguments of the right-hand side at time `t`: one lag for the
/// pointwise model, the quadrature nodes for the distributed one.
pub(crate) struct Lags {
    rule: Option<GaussLegendre>,
}

impl Lags {
    pub fn new(delay: &DelaySpec) -> Self {
        Lags {
            rule: delay.kernel().map(|k| GaussLegendre::new(k.nodes)),
        }
    }

    pub fn at(&self, delay: &DelaySpec, t: f64) -> Vec<f64> {
        match (delay, &self.rule) {
            (DelaySpec::Distributed(kernel), Some(rule)) => {
                let (a, b) = kernel.lags(t);
                rule.nodes_on(a, b).map(|(s, _)| s).collect()
            }
            _ => vec![delay.pointwise_lag(t).unwrap_or(0.0)],
        }
    }
}

/// Inputs shared by the per-record checks.
pub(crate) struct RecordContext<'a> {
    pub cfg: &'a SystemConfig,
    pub history: &'a TrajectoryHistory,
    pub records: &'a Records,
    /// `tau_bar C0V + M0X`
    pub offset: f64,
    pub running_max_dx: &'a [f64],
}

/// Pointwise-in-time checks on records with `t >= 0`:
/// speed bound, window bound `d_V(t) <= D_n`, delayed-distance bound and
/// rate floor.
pub(crate) fn record_checks(
    ctx: &RecordContext<'_>,
    c0v: f64,
    vel_tol: f64,
    window_bounds: Option<(&[f64], f64)>,
) -> Vec<Verdict> {
    let cfg = ctx.cfg;
    let (n, d) = (cfg.agents, cfg.dimension);
    let nd = n * d;
    let psi = &cfg.influence;
    let tau_bar = cfg.tau_bar();
    let recs = ctx.records;
    let lags = Lags::new(&cfg.delay);
    let mut speed = Tally::new("velocity_bound", 1e-8);
    let mut window = Tally::new("window_bound", vel_tol);
    let mut delayed = Tally::new("delayed_distance", 1e-8 * (1.0 + ctx.offset));
    let mut floor = Tally::new("rate_floor", 1e-12);
    let mut past = vec![0.0; 2 * nd];

    for r in recs.first_nonnegative..recs.len() {
        let t = recs.times[r];
        let y = recs.state(r);
        let vmax = (0..n)
            .map(|i| {
                y[nd + i * d..nd + (i + 1) * d]
                    .iter()
                    .map(|c| c * c)
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        speed.observe(t, c0v - vmax);

        if let Some((diam, period)) = window_bounds {
            // min over n with nT - tau_bar <= t
            let reach = ((t + tau_bar) / period + 1e-9).floor() as usize;
            let bound = diam[..=reach.min(diam.len() - 1)]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            window.observe(t, bound - recs.d_v[r]);
        }

        let upper = ctx.offset + recs.d_x[r];
        let phi = psi.min_on_unchecked(ctx.offset + ctx.running_max_dx[r]);
        for lag in lags.at(&cfg.delay, t) {
            if lag == 0.0 {
                past.copy_from_slice(y);
            } else if ctx.history.sample_into(t - lag, &mut past).is_err() {
                continue;
            }
            for i in 0..n {
                let xi = &y[i * d..(i + 1) * d];
                for j in (0..n).filter(|&j| j != i) {
                    let r_ij = distance(xi, &past[j * d..(j + 1) * d]);
                    delayed.observe(t, upper - r_ij);
                    let b = psi.value(r_ij);
                    floor.observe(t, (b - phi) / phi.max(f64::MIN_POSITIVE));
                }
            }
        }
    }
    let mut out = vec![speed.finish()];
    if window_bounds.is_some() {
        out.push(window.finish());
    }
    out.push(delayed.finish());
    out.push(floor.finish());
    out
}

/// Discrete derivative of the running maximum of `d_X` against `d_V`:
/// `(R(t_{k+1}) - R(t_k)) / dt <= max(d_V(t_k), d_V(t_{k+1})) + 2 K D0 dt`.
pub(crate) fn diameter_rate(records: &Records, running_max: &[f64], k: f64, d0: f64) -> Verdict {
    let mut tally = Tally::new("diameter_rate", 0.0);
    let start = records.first_nonnegative;
    for r in start..records.len().saturating_sub(1) {
        let dt = records.times[r + 1] - records.times[r];
        let rate = (running_max[r + 1] - running_max[r]) / dt;
        let bound = records.d_v[r].max(records.d_v[r + 1])
            + 2.0 * k * d0 * dt
            + 1e-12 * (1.0 + running_max[r]) / dt;
        tally.observe(records.times[r + 1], bound - rate);
    }
    tally.finish()
}

/// Range of the cubic Hermite interpolant with end values `p0, p1` and end
/// slopes `m0, m1` (per unit time, cell length `h`) on `theta in [ta, tb]`.
fn cubic_range(p0: f64, m0: f64, p1: f64, m1: f64, h: f64, ta: f64, tb: f64) -> (f64, f64) {
    let (hm0, hm1) = (h * m0, h * m1);
    let c3 = 2.0 * p0 + hm0 - 2.0 * p1 + hm1;
    let c2 = -3.0 * p0 - 2.0 * hm0 + 3.0 * p1 - hm1;
    let c1 = hm0;
    let eval = |th: f64| ((c3 * th + c2) * th + c1) * th + p0;
    let (mut lo, mut hi) = {
        let (a, b) = (eval(ta), eval(tb));
        (a.min(b), a.max(b))
    };
    // roots of 3 c3 th^2 + 2 c2 th + c1
    let (qa, qb, qc) = (3.0 * c3, 2.0 * c2, c1);
    let mut consider = |th: f64| {
        if th > ta && th < tb {
            let v = eval(th);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    };
    if qa.abs() < 1e-300 {
        if qb != 0.0 {
            consider(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -0.5 * (qb + qb.signum() * sq);
            if q != 0.0 {
                consider(q / qa);
                consider(qc / q);
            } else {
                consider(0.0);
            }
        }
    }
    (lo, hi)
}

/// Unit test directions: the coordinate axes plus `extra` seeded random ones.
/// Both the minimum and the maximum are checked, which covers `-v` as well.
pub(crate) fn test_directions(dim: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..dim)
        .map(|k| (0..dim).map(|c| if c == k { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < dim + extra {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            out.push(v.into_iter().map(|c| c / norm).collect());
        }
    }
    out
}

fn initial_projection_range(
    initial: &InitialData,
    dim: usize,
    tau_bar: f64,
    u: &[f64],
    a: f64,
) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for agent in &initial.agents {
        let path = &agent.velocity;
        let mut times: Vec<f64> = path
            .probe_times(tau_bar)
            .into_iter()
            .filter(|&s| s >= a && s <= 0.0)
            .collect();
        times.extend([a, 0.0]);
        for s in times {
            let v = path.eval(s);
            let p: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    debug_assert_eq!(u.len(), dim);
    (lo, hi)
}

/// Invariance of velocity projections: for every direction `u` and every
/// record time `S >= 0`, all later node values of `<v_i, u>` stay inside the
/// range of `<v_j(s), u>` over `s in [S - tau_bar, S]`. Window ranges use the
/// exact extrema of the Hermite cells.
pub(crate) fn invariance(
    history: &TrajectoryHistory,
    records: &Records,
    directions: &[Vec<f64>],
    tolerance: f64,
) -> Verdict {
    let (n, d) = (history.agents(), history.dim());
    let nd = n * d;
    let tau_bar = history.tau_bar();
    let times = history.times();
    let nodes = times.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut tally = Tally::new("invariance", tolerance);

    for u in directions {
        let proj: Vec<Vec<f64>> = (0..nodes)
            .map(|k| {
                let y = history.state(k);
                (0..n)
                    .map(|i| dot(&y[nd + i * d..nd + (i + 1) * d], u))
                    .collect()
            })
            .collect();
        let slopes: Vec<(Vec<f64>, Vec<f64>)> = (0..nodes - 1)
            .map(|k| {
                let (a0, a1) = history.cell_accels(k);
                (
                    (0..n).map(|i| dot(&a0[i * d..(i + 1) * d], u)).collect(),
                    (0..n).map(|i| dot(&a1[i * d..(i + 1) * d], u)).collect(),
                )
            })
            .collect();
        let cell_range = |k: usize, ta: f64, tb: f64| {
            let h = times[k + 1] - times[k];
            let (s0, s1) = &slopes[k];
            (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let (a, b) = cubic_range(proj[k][i], s0[i], proj[k + 1][i], s1[i], h, ta, tb);
                (lo.min(a), hi.max(b))
            })
        };
        let full: Vec<(f64, f64)> = (0..nodes - 1).map(|k| cell_range(k, 0.0, 1.0)).collect();

        let mut suffix_lo = vec![f64::INFINITY; nodes + 1];
        let mut suffix_hi = vec![f64::NEG_INFINITY; nodes + 1];
        for k in (0..nodes).rev() {
            let (lo, hi) = proj[k]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
                    (lo.min(p), hi.max(p))
                });
            suffix_lo[k] = suffix_lo[k + 1].min(lo);
            suffix_hi[k] = suffix_hi[k + 1].max(hi);
        }

        for &ks in &records.nodes {
            let s = times[ks];
            let a = s - tau_bar;
            let mut lo = proj[ks].iter().copied().fold(f64::INFINITY, f64::min);
            let mut hi = proj[ks].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if tau_bar > 0.0 {
                let mut first = 0;
                if a < 0.0 {
                    let (l, h) = initial_projection_range(history.initial(), d, tau_bar, u, a);
                    lo = lo.min(l);
                    hi = hi.max(h);
                } else {
                    first = times.partition_point(|&t| t < a);
                    if first > 0 && times[first] > a {
                        let k = first - 1;
                        let ta = (a - times[k]) / (times[k + 1] - times[k]);
                        let (l, h) = cell_range(k, ta, 1.0);
                        lo = lo.min(l);
                        hi = hi.max(h);
                    }
                }
                for &(l, h) in &full[first.min(ks)..ks] {
                    lo = lo.min(l);
                    hi = hi.max(h);
                }
            }
            let margin = (hi - suffix_hi[ks]).min(suffix_lo[ks] - lo);
            tally.observe(s, margin);
        }
    }
    tally.finish()
}

/// `max_t d_X(t) <= d_star`.
pub(crate) fn position_bound(records: &Records, d_star: f64) -> Verdict {
    let mut tally = Tally::new("position_bound", 1e-8);
    for (t, dx) in records.times.iter().zip(&records.d_x) {
        tally.observe(*t, d_star - dx);
    }
    tally.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increasing_sequence_fails_at_first_index() {
        let v = check_sequence_properties(&[1.0, 1.5, 2.0], &[], &[1.0, 1.5, 2.0], 1.0, 1.0, 1e-8);
        let mono = &v[0];
        assert!(!mono.pass);
        assert_eq!(mono.first_violation, Some(0.0));
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn constant_zero_sequence_passes() {
        let v = check_sequence_properties(&[0.0; 6], &[0.1; 6], &[0.0; 6], 1.0, 1.0, 0.0);
        assert!(v.iter().all(|x| x.pass && x.checked > 0));
    }

    #[test]
    fn envelope_reports_violation() {
        let ok = check_decay_envelope(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.2], 1.0, 0.1, 1.0, 0.0);
        assert!(ok.pass);
        let bad = check_decay_envelope(&[0.0, 10.0], &[1.0, 1.0], 1.0, 0.5, 1.0, 0.0);
        assert!(!bad.pass);
        assert_eq!(bad.first_violation, Some(10.0));
        assert!(bad.worst_margin.unwrap() < 0.0);
    }

    #[test]
    fn cubic_range_matches_dense_scan() {
        let cases = [
            (0.0, 3.0, 0.0, 3.0),
            (1.0, -2.0, 0.5, 4.0),
            (0.2, 0.0, 0.2, 0.0),
            (0.0, 1.0, 1.0, 1.0),
        ];
        for (p0, m0, p1, m1) in cases {
            for (ta, tb) in [(0.0, 1.0), (0.3, 0.8)] {
                let h = 0.7;
                let (lo, hi) = cubic_range(p0, m0, p1, m1, h, ta, tb);
                let mut slo = f64::INFINITY;
                let mut shi = f64::NEG_INFINITY;
                for j in 0..=20000 {
                    let th = ta + (tb - ta) * j as f64 / 20000.0;
                    let (b00, b10, b01, b11) = crate::config::hermite_basis(th);
                    let v = b00 * p0 + b10 * h * m0 + b01 * p1 + b11 * h * m1;
                    slo = slo.min(v);
                    shi = shi.max(v);
                }
                assert!(lo <= slo + 1e-12 && lo >= slo - 1e-7, "{lo} vs {slo}");
                assert!(hi >= shi - 1e-12 && hi <= shi + 1e-7, "{hi} vs {shi}");
            }
        }
    }

    #[test]
    fn directions_are_unit_and_seeded() {
        let a = test_directions(3, 4, 11);
        assert_eq!(a.len(), 7);
        for v in &a {
            assert!((v.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-14);
        }
        assert_eq!(a, test_directions(3, 4, 11));
    }
}
