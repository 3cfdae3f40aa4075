//! Diagnostics of a completed run against the flocking estimates: initial
//! constants, window diameters `D_n`, contraction constants, the exponential
//! envelope, the Lyapunov functional, and the pointwise inequalities behind
//! them.

mod checks;
mod constants;
mod lyapunov;
mod records;
mod report;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::BoundsError;
use crate::history::TrajectoryHistory;
use crate::schedule::PeDeclaration;

pub use checks::{check_decay_envelope, check_sequence_properties, Verdict};
pub use constants::{
    contraction_constants, decay_rate, initial_constants, phi_lower_bound, InitialConstants,
};
pub use lyapunov::{
    energy_at, lyapunov_series, rigorous_position_bound, LyapunovInputs, LyapunovSeries,
};
pub use records::diameters;
pub use report::{
    DiagnosticsReport, FlockingThresholds, FlockingVerdict, ReportConstants, Resolution, Sequences,
    Series,
};

use checks::{RecordContext, Tally};
use records::{interpolate, velocity_cloud_diameter, Records, TIME_EPS};

/// Named inequality families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    VelocityBound,
    WindowBound,
    MonotoneDiameter,
    OneStep,
    Contraction,
    Envelope,
    DelayedDistance,
    RateFloor,
    Invariance,
    Lyapunov,
    DiameterRate,
    PositionBound,
    Flocking,
}

impl CheckKind {
    pub const ALL: [CheckKind; 13] = [
        CheckKind::VelocityBound,
        CheckKind::WindowBound,
        CheckKind::MonotoneDiameter,
        CheckKind::OneStep,
        CheckKind::Contraction,
        CheckKind::Envelope,
        CheckKind::DelayedDistance,
        CheckKind::RateFloor,
        CheckKind::Invariance,
        CheckKind::Lyapunov,
        CheckKind::DiameterRate,
        CheckKind::PositionBound,
        CheckKind::Flocking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::VelocityBound => "velocity_bound",
            CheckKind::WindowBound => "window_bound",
            CheckKind::MonotoneDiameter => "monotone_diameter",
            CheckKind::OneStep => "one_step",
            CheckKind::Contraction => "contraction",
            CheckKind::Envelope => "envelope",
            CheckKind::DelayedDistance => "delayed_distance",
            CheckKind::RateFloor => "rate_floor",
            CheckKind::Invariance => "invariance",
            CheckKind::Lyapunov => "lyapunov",
            CheckKind::DiameterRate => "diameter_rate",
            CheckKind::PositionBound => "position_bound",
            CheckKind::Flocking => "flocking",
        }
    }

    /// Everything except the flocking verdict.
    pub fn defaults() -> Vec<CheckKind> {
        CheckKind::ALL
            .into_iter()
            .filter(|k| *k != CheckKind::Flocking)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions {
    /// Record-grid stride over history nodes; `None` uses the config's.
    pub stride: Option<usize>,
    pub enabled: Vec<CheckKind>,
    pub flocking: FlockingThresholds,
    /// Replaces the computed rate in the envelope check.
    pub envelope_rate: Option<f64>,
    /// Random directions added to the coordinate axes in the invariance check.
    pub random_directions: usize,
    pub seed: u64,
    pub resolution_check: bool,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            stride: None,
            enabled: CheckKind::defaults(),
            flocking: FlockingThresholds::default(),
            envelope_rate: None,
            random_directions: 4,
            seed: 0,
            resolution_check: true,
        }
    }
}

/// `D_n = max_{i,j} max_{s,t in [nT - tau_bar, nT]} |v_i(s) - v_j(t)|` on the
/// history nodes in the window; `D_0` comes from the initial data.
pub fn generalized_diameter(
    cfg: &SystemConfig,
    history: &TrajectoryHistory,
    n: usize,
    window: f64,
) -> Result<f64, BoundsError> {
    if n == 0 {
        return Ok(initial_constants(cfg).d0);
    }
    let end = n as f64 * window;
    let start = end - history.tau_bar();
    if start < -TIME_EPS || end > history.t_now() + TIME_EPS {
        return Err(crate::error::HistoryError::OutOfRange {
            t: end,
            start: -history.tau_bar(),
            end: history.t_now(),
        }
        .into());
    }
    let times = history.times();
    let lo = times.partition_point(|&t| t < start - TIME_EPS);
    let hi = times.partition_point(|&t| t <= end + TIME_EPS);
    Ok(velocity_cloud_diameter(
        (lo..hi).map(|k| history.state(k)),
        history.agents(),
        history.dim(),
    ))
}

/// Flocking verdict from `d_X`, `d_V` series on `t >= 0`.
pub fn flocking_verdict(
    times: &[f64],
    d_x: &[f64],
    d_v: &[f64],
    d0: f64,
    thresholds: &FlockingThresholds,
) -> FlockingVerdict {
    let t_end = times.last().copied().unwrap_or(0.0);
    let cut = times.partition_point(|&t| t < 0.75 * t_end);
    let max_dx = d_x.iter().copied().fold(0.0, f64::max);
    let early = d_x[..cut.max(1)].iter().copied().fold(0.0, f64::max);
    let late = d_x[cut.min(d_x.len())..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let tail_growth = (late - early).max(0.0);
    let final_dv = d_v.last().copied().unwrap_or(0.0);
    let align_tolerance = thresholds.align_relative * d0;
    FlockingVerdict {
        position_bounded: thresholds.position.is_none_or(|p| max_dx <= p)
            && tail_growth <= 1e-3 * max_dx,
        velocity_aligned: final_dv <= align_tolerance,
        max_dx,
        tail_growth,
        final_dv,
        align_tolerance,
    }
}

/// The PE declaration behind the theory constants, or why there is none.
fn theory_window(cfg: &SystemConfig, t_end: f64) -> Result<PeDeclaration, String> {
    let tau_bar = cfg.tau_bar();
    let pe = cfg
        .schedule
        .pe
        .or_else(|| cfg.schedule.default_pe(tau_bar))
        .ok_or_else(|| "the schedule has no persistence-of-excitation declaration".to_string())?;
    let mut schedule = cfg.schedule.clone();
    schedule.pe = Some(pe);
    schedule
        .validate(tau_bar, t_end + pe.window)
        .map_err(|e| e.to_string())?;
    Ok(pe)
}

/// Least-squares slope of `-ln d_V` on records after `3T`.
fn empirical_rate(times: &[f64], d_v: &[f64], from: f64, d0: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(d_v)
        .filter(|(t, v)| **t >= from && **v > 1e-12 * d0 && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| {
        (a + (t - mt) * (y - my), b + (t - mt) * (t - mt))
    });
    (den > 0.0).then(|| -num / den)
}

struct Windowed {
    diameter: Vec<f64>,
    d_v: Vec<f64>,
    phi: Vec<f64>,
    contraction: Vec<f64>,
}

fn window_sequences(
    cfg: &SystemConfig,
    records: &Records,
    running_max: &[f64],
    pe: PeDeclaration,
    consts: &InitialConstants,
    n_max: usize,
) -> Result<Windowed, BoundsError> {
    let tau_bar = cfg.tau_bar();
    let k = cfg.influence.sup_norm();
    let offset = tau_bar * consts.c0v + consts.m0x;
    let (n, d) = (cfg.agents, cfg.dimension);
    let mut out = Windowed {
        diameter: Vec::with_capacity(n_max + 1),
        d_v: Vec::new(),
        phi: Vec::new(),
        contraction: Vec::new(),
    };
    for m in 0..=n_max {
        let t = m as f64 * pe.window;
        let idx = records.index_of(t).ok_or_else(|| {
            BoundsError::InvalidArgument(format!("no record at window mark t = {t}"))
        })?;
        if m == 0 {
            out.diameter.push(consts.d0);
        } else {
            let range = records.window(t - tau_bar, t);
            out.diameter.push(velocity_cloud_diameter(
                range.map(|r| records.state(r)),
                n,
                d,
            ));
        }
        out.d_v.push(records.d_v[idx]);
        let phi = cfg.influence.min_on(offset + running_max[idx])?;
        out.phi.push(phi);
        out.contraction
            .push(contraction_constants(k, pe.window, tau_bar, pe.floor, phi)?.1);
    }
    Ok(out)
}

/// Evaluates every enabled check on a completed run.
pub fn analyze(
    cfg: &SystemConfig,
    history: &TrajectoryHistory,
    options: &BoundsOptions,
) -> Result<DiagnosticsReport, BoundsError> {
    if history.agents() != cfg.agents || history.dim() != cfg.dimension {
        return Err(BoundsError::InvalidArgument(
            "history shape does not match the configuration".into(),
        ));
    }
    let stride = options
        .stride
        .unwrap_or(cfg.integrator.record_stride)
        .max(1);
    let t_end = history.t_now();
    let tau_bar = cfg.tau_bar();
    let k = cfg.influence.sup_norm();
    let consts = initial_constants(cfg);
    let offset = tau_bar * consts.c0v + consts.m0x;
    let vel_tol = 1e-8 * consts.d0 + 1e-13 * consts.c0v.max(1.0);
    let enabled = |c: CheckKind| options.enabled.contains(&c);

    let pe = theory_window(cfg, t_end);
    let mut marks = Vec::new();
    if let Ok(pe) = &pe {
        let mut m = 0.0;
        while m * pe.window - tau_bar <= t_end + TIME_EPS {
            marks.push(m * pe.window);
            marks.push(m * pe.window - tau_bar);
            m += 1.0;
        }
    }
    let step = cfg.step_size();
    let records = Records::build(history, step, stride, &marks);
    let running_max = records.running_max_dx();
    let sup_dx = running_max.last().copied().unwrap_or(0.0);
    let d_star_observed = offset + sup_dx;
    let first = records.first_nonnegative;
    let nonneg_t = &records.times[first..];

    let mut constants = ReportConstants {
        k,
        tau_bar,
        window: None,
        floor: None,
        c0v: consts.c0v,
        m0x: consts.m0x,
        d0: consts.d0,
        sup_dx,
        d_star_observed,
        d_star_rigorous: None,
        d_star_status: "unavailable".into(),
        infint: cfg.influence.satisfies_infint(),
        phi_hat: None,
        c_star_hat: None,
        c_hat: None,
        mu: None,
        mu_override: options.envelope_rate,
    };
    let mut sequences = Sequences::default();
    let mut resolution = None;
    let mut empirical = None;
    let mut checks: Vec<Verdict> = Vec::new();
    let mut series = Series {
        t: records.times.clone(),
        d_x: records.d_x.clone(),
        d_v: records.d_v.clone(),
        energy: vec![None; records.len()],
        lyapunov: vec![None; records.len()],
    };

    let ctx = RecordContext {
        cfg,
        history,
        records: &records,
        offset,
        running_max_dx: &running_max,
    };

    match &pe {
        Ok(pe) => {
            constants.window = Some(pe.window);
            constants.floor = Some(pe.floor);
            let n_max = ((t_end / pe.window) + 1e-9).floor() as usize;
            let w = window_sequences(cfg, &records, &running_max, *pe, &consts, n_max)?;

            let phi_hat = cfg.influence.min_on(d_star_observed)?;
            let (c_star_hat, c_hat) =
                contraction_constants(k, pe.window, tau_bar, pe.floor, phi_hat)?;
            let mu = decay_rate(c_hat, pe.window)?;
            constants.phi_hat = Some(phi_hat);
            constants.c_star_hat = Some(c_star_hat);
            constants.c_hat = Some(c_hat);
            constants.mu = Some(mu);
            empirical = empirical_rate(
                nonneg_t,
                &records.d_v[first..],
                (3.0 * pe.window).min(0.5 * t_end),
                consts.d0,
            );

            if options.resolution_check {
                let coarse = Records::build(history, step, 2 * stride, &marks);
                let coarse_max = coarse.running_max_dx();
                let cw = window_sequences(cfg, &coarse, &coarse_max, *pe, &consts, n_max)?;
                let scale = 1e-12 * consts.d0.max(f64::MIN_POSITIVE);
                let change = w
                    .diameter
                    .iter()
                    .zip(&cw.diameter)
                    .map(|(a, b)| (a - b).abs() / a.max(scale))
                    .fold(0.0, f64::max);
                resolution = Some(Resolution {
                    stride,
                    coarse_stride: 2 * stride,
                    max_relative_change: change,
                    flagged: change > 1e-3,
                });
            }

            checks.extend(checks::record_checks(
                &ctx,
                consts.c0v,
                vel_tol,
                Some((&w.diameter, pe.window)),
            ));
            checks.extend(check_sequence_properties(
                &w.diameter,
                &w.contraction,
                &w.d_v,
                k,
                pe.window,
                vel_tol,
            ));
            let rate = options.envelope_rate.unwrap_or(mu);
            checks.push(check_decay_envelope(
                nonneg_t,
                &records.d_v[first..],
                consts.d0,
                rate,
                pe.window,
                vel_tol,
            ));

            let inputs = LyapunovInputs {
                psi: &cfg.influence,
                k,
                window: pe.window,
                tau_bar,
                floor: pe.floor,
                offset,
                d0: consts.d0,
                diam: &w.diameter,
                contraction: &w.contraction,
            };
            let lyap = lyapunov_series(&inputs, nonneg_t, &records.times, &running_max, t_end);
            series.energy[first..].clone_from_slice(&lyap.energy);
            series.lyapunov[first..].clone_from_slice(&lyap.lyapunov);

            let evaluable = t_end >= 8.0 * pe.window - TIME_EPS;
            match (evaluable, lyap.w_at_2t) {
                (true, Some(w2)) => {
                    let mut tally = Tally::new("lyapunov", 1e-6 * w2.abs());
                    let mut prev: Option<f64> = None;
                    for (t, wv) in lyap.t.iter().zip(&lyap.lyapunov) {
                        if *t < 2.0 * pe.window - TIME_EPS {
                            continue;
                        }
                        if let Some(wv) = wv {
                            if let Some(p) = prev {
                                tally.observe(*t, p - wv);
                            }
                            prev = Some(*wv);
                        }
                    }
                    checks.push(tally.finish());
                    let u2 = offset + interpolate(&records.times, &running_max, 8.0 * pe.window);
                    match rigorous_position_bound(&inputs, w2, u2) {
                        Some(d) => {
                            constants.d_star_rigorous = Some(d);
                            constants.d_star_status = "rigorous".into();
                            checks.push(checks::position_bound(&records, d));
                        }
                        None => {
                            constants.d_star_status = "unbounded".into();
                            checks.push(Verdict::skipped(
                                "position_bound",
                                true,
                                "the integral of the influence floor stays below 3 W(2T)",
                            ));
                        }
                    }
                }
                _ => {
                    constants.d_star_status = "not_evaluable".into();
                    let note = "not evaluable: the run is shorter than 8T";
                    checks.push(Verdict::skipped("lyapunov", true, note));
                    checks.push(Verdict::skipped("position_bound", true, note));
                }
            }
            sequences = Sequences {
                diameter: w.diameter,
                d_v_at_windows: w.d_v,
                phi: w.phi,
                contraction: w.contraction,
            };
        }
        Err(reason) => {
            let note = format!("theory constants unavailable: {reason}");
            checks.extend(checks::record_checks(&ctx, consts.c0v, vel_tol, None));
            for kind in [
                CheckKind::WindowBound,
                CheckKind::MonotoneDiameter,
                CheckKind::OneStep,
                CheckKind::Contraction,
                CheckKind::Envelope,
                CheckKind::Lyapunov,
                CheckKind::PositionBound,
            ] {
                checks.push(Verdict::skipped(kind.name(), false, note.clone()));
            }
        }
    }

    if enabled(CheckKind::Invariance) {
        let dirs = checks::test_directions(cfg.dimension, options.random_directions, options.seed);
        checks.push(checks::invariance(history, &records, &dirs, vel_tol));
    }
    checks.push(checks::diameter_rate(&records, &running_max, k, consts.d0));

    let flocking = flocking_verdict(
        nonneg_t,
        &records.d_x[first..],
        &records.d_v[first..],
        consts.d0,
        &options.flocking,
    );
    checks.push(Verdict {
        name: CheckKind::Flocking.name().into(),
        pass: flocking.position_bounded && flocking.velocity_aligned,
        checked: 1,
        tolerance: flocking.align_tolerance,
        worst_margin: Some(flocking.align_tolerance - flocking.final_dv),
        worst_at: Some(t_end),
        first_violation: (!(flocking.position_bounded && flocking.velocity_aligned))
            .then_some(t_end),
        note: None,
    });

    // keep enabled checks, in canonical order
    let checks: Vec<Verdict> = CheckKind::ALL
        .into_iter()
        .filter(|c| enabled(*c))
        .filter_map(|c| checks.iter().find(|v| v.name == c.name()).cloned())
        .collect();
    let pass = checks.iter().all(|v| v.pass);

    Ok(DiagnosticsReport {
        model: if cfg.delay.is_distributed() {
            "distributed"
        } else {
            "pointwise"
        }
        .into(),
        agents: cfg.agents,
        dimension: cfg.dimension,
        t_end,
        constants,
        constants_unavailable: pe
            .err()
            .map(|r| format!("theory constants unavailable: {r}")),
        sequences,
        resolution,
        empirical_rate: empirical,
        checks,
        flocking,
        pass,
        series,
    })
}
