//! Piecewise-constant communication weights `alpha(t)` in `[0, 1]` and an
//! exact verifier of the persistence-of-excitation window condition.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

/// Slack on the declared floor when comparing window integrals.
pub const PE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchedulePattern {
    AlwaysOn,
    /// On for the first `duty * period` of every period, shifted by `phase`.
    SquareWave {
        period: f64,
        duty: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Off on each `[start, end)`.
    BlackoutList {
        intervals: Vec<[f64; 2]>,
    },
    /// One off-interval per period of random length at most
    /// `max_off_fraction * period`, placed at a random offset inside the period.
    RandomBlackouts {
        period: f64,
        max_off_fraction: f64,
        seed: u64,
    },
}

/// Declared window length `T` and floor `alpha_tilde` of the PE condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeDeclaration {
    pub window: f64,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSchedule {
    pub pattern: SchedulePattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe: Option<PeDeclaration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeReport {
    pub pass: bool,
    pub worst_window_integral: f64,
    pub worst_window_start: f64,
}

impl WeightSchedule {
    pub fn new(pattern: SchedulePattern, pe: Option<PeDeclaration>) -> Self {
        WeightSchedule { pattern, pe }
    }

    pub fn always_on() -> Self {
        WeightSchedule::new(SchedulePattern::AlwaysOn, None)
    }

    pub fn with_pe(mut self, window: f64, floor: f64) -> Self {
        self.pe = Some(PeDeclaration { window, floor });
        self
    }

    /// Structural validity of the pattern (not the PE declaration).
    pub fn validate_pattern(&self) -> Result<(), ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::Invalid(msg));
        match &self.pattern {
            SchedulePattern::AlwaysOn => {}
            SchedulePattern::SquareWave {
                period,
                duty,
                phase,
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return bad(format!("square wave period must be positive, got {period}"));
                }
                if !(*duty > 0.0 && *duty <= 1.0) {
                    return bad(format!("square wave duty must lie in (0, 1], got {duty}"));
                }
                if !phase.is_finite() {
                    return bad("square wave phase must be finite".into());
                }
            }
            SchedulePattern::BlackoutList { intervals } => {
                for [a, b] in intervals {
                    if !(a.is_finite() && b.is_finite() && *a >= 0.0 && a < b) {
                        return bad(format!("blackout [{a}, {b}] must satisfy 0 <= start < end"));
                    }
                }
                for w in intervals.windows(2) {
                    if !(w[0][1] < w[1][0]) {
                        return bad(format!(
                            "blackouts must be sorted and disjoint: [{}, {}] then [{}, {}]",
                            w[0][0], w[0][1], w[1][0], w[1][1]
                        ));
                    }
                }
            }
            SchedulePattern::RandomBlackouts {
                period,
                max_off_fraction,
                ..
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return bad(format!("blackout period must be positive, got {period}"));
                }
                if !(*max_off_fraction >= 0.0 && *max_off_fraction < 1.0) {
                    return bad(format!(
                        "max_off_fraction must lie in [0, 1), got {max_off_fraction}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Validates the pattern and, if present, the PE declaration against
    /// `tau_bar` and the exact window scan on `[0, horizon]`.
    pub fn validate(&self, tau_bar: f64, horizon: f64) -> Result<(), ScheduleError> {
        self.validate_pattern()?;
        if let Some(pe) = self.pe {
            check_declaration(pe, tau_bar)?;
            let report = self.verify_pe(pe.window, pe.floor, horizon.max(pe.window))?;
            if !report.pass {
                return Err(ScheduleError::PeViolated {
                    worst: report.worst_window_integral,
                    start: report.worst_window_start,
                    declared: pe.floor,
                });
            }
        }
        Ok(())
    }

    /// A declaration the pattern satisfies by construction, with `T >= tau_bar`.
    /// Blackout lists have no natural default.
    pub fn default_pe(&self, tau_bar: f64) -> Option<PeDeclaration> {
        match &self.pattern {
            SchedulePattern::AlwaysOn => {
                let window = tau_bar.max(1.0);
                Some(PeDeclaration {
                    window,
                    floor: window,
                })
            }
            SchedulePattern::SquareWave { period, duty, .. } => {
                let k = (tau_bar / period).ceil().max(1.0);
                Some(PeDeclaration {
                    window: k * period,
                    floor: k * duty * period,
                })
            }
            SchedulePattern::RandomBlackouts {
                period,
                max_off_fraction,
                ..
            } => {
                // a window of 2m periods contains at least 2m - 1 whole periods
                let m = (tau_bar / (2.0 * period)).ceil().max(1.0);
                Some(PeDeclaration {
                    window: 2.0 * m * period,
                    floor: (2.0 * m - 1.0) * (1.0 - max_off_fraction) * period,
                })
            }
            SchedulePattern::BlackoutList { .. } => None,
        }
    }

    /// `alpha(t)`, right-continuous at breakpoints.
    pub fn eval(&self, t: f64) -> Result<f64, ScheduleError> {
        if t < 0.0 || t.is_nan() {
            return Err(ScheduleError::NegativeTime(t));
        }
        Ok(self.value(t))
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        match &self.pattern {
            SchedulePattern::AlwaysOn => 1.0,
            SchedulePattern::SquareWave {
                period,
                duty,
                phase,
            } => {
                if *duty >= 1.0 {
                    return 1.0;
                }
                let u = ((t - phase) / period).rem_euclid(1.0);
                if u < *duty {
                    1.0
                } else {
                    0.0
                }
            }
            SchedulePattern::BlackoutList { intervals } => {
                let idx = intervals.partition_point(|iv| iv[0] <= t);
                if idx > 0 && t < intervals[idx - 1][1] {
                    0.0
                } else {
                    1.0
                }
            }
            SchedulePattern::RandomBlackouts {
                period,
                max_off_fraction,
                seed,
            } => {
                let k = (t / period).floor() as u64;
                let (a, b) = random_blackout(*period, *max_off_fraction, *seed, k);
                if a <= t && t < b {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Sorted, deduplicated discontinuities of `alpha` in `(0, horizon]`.
    pub fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let keep = |t: f64| t > 0.0 && t <= horizon;
        match &self.pattern {
            SchedulePattern::AlwaysOn => {}
            SchedulePattern::SquareWave {
                period,
                duty,
                phase,
            } => {
                if *duty < 1.0 {
                    let k0 = ((-phase) / period).floor() as i64 - 1;
                    let k1 = ((horizon - phase) / period).ceil() as i64 + 1;
                    for k in k0..=k1 {
                        let on = phase + k as f64 * period;
                        let off = phase + (k as f64 + duty) * period;
                        out.extend([on, off].into_iter().filter(|t| keep(*t)));
                    }
                }
            }
            SchedulePattern::BlackoutList { intervals } => {
                for [a, b] in intervals {
                    out.extend([*a, *b].into_iter().filter(|t| keep(*t)));
                }
            }
            SchedulePattern::RandomBlackouts {
                period,
                max_off_fraction,
                seed,
            } => {
                let last = (horizon / period).ceil() as u64;
                for k in 0..=last {
                    let (a, b) = random_blackout(*period, *max_off_fraction, *seed, k);
                    if b > a {
                        out.extend([a, b].into_iter().filter(|t| keep(*t)));
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Exact `int_a^b alpha(s) ds` for `0 <= a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let cumulative = Cumulative::new(self, b);
        cumulative.at(b) - cumulative.at(a)
    }

    /// Minimum of `int_t^{t+T} alpha` over window starts `t in [0, horizon - T]`.
    ///
    /// The window integral is piecewise linear in `t` with kinks where `t` or
    /// `t + T` crosses a breakpoint, so scanning those starts is exact.
    pub fn verify_pe(
        &self,
        window: f64,
        floor: f64,
        horizon: f64,
    ) -> Result<PeReport, ScheduleError> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(ScheduleError::Invalid(format!(
                "PE window must be positive, got {window}"
            )));
        }
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(ScheduleError::Invalid(format!(
                "PE floor must be positive, got {floor}"
            )));
        }
        if horizon < window {
            return Err(ScheduleError::HorizonTooShort { horizon, window });
        }
        let cumulative = Cumulative::new(self, horizon);
        let last_start = horizon - window;
        let mut starts = vec![0.0, last_start];
        for &b in &cumulative.breaks {
            for s in [b, b - window] {
                if (0.0..=last_start).contains(&s) {
                    starts.push(s);
                }
            }
        }
        let mut worst = f64::INFINITY;
        let mut worst_start = 0.0;
        for s in starts {
            let value = cumulative.at(s + window) - cumulative.at(s);
            if value < worst || (value == worst && s < worst_start) {
                worst = value;
                worst_start = s;
            }
        }
        Ok(PeReport {
            pass: worst >= floor - PE_TOLERANCE,
            worst_window_integral: worst,
            worst_window_start: worst_start,
        })
    }
}

fn check_declaration(pe: PeDeclaration, tau_bar: f64) -> Result<(), ScheduleError> {
    if !(pe.window > 0.0 && pe.window.is_finite()) {
        return Err(ScheduleError::Invalid(format!(
            "PE window must be positive, got {}",
            pe.window
        )));
    }
    if !(pe.floor > 0.0 && pe.floor <= pe.window) {
        return Err(ScheduleError::Invalid(format!(
            "PE floor must lie in (0, T = {}], got {}",
            pe.window, pe.floor
        )));
    }
    if pe.window < tau_bar {
        return Err(ScheduleError::Invalid(format!(
            "PE window T = {} must be at least tau_bar = {tau_bar}",
            pe.window
        )));
    }
    Ok(())
}

fn random_blackout(period: f64, max_off_fraction: f64, seed: u64, k: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let len = rng.random::<f64>() * max_off_fraction * period;
    let start = k as f64 * period + rng.random::<f64>() * (period - len);
    (start, start + len)
}

/// Piecewise-linear `A(t) = int_0^t alpha` on `[0, horizon]`.
struct Cumulative {
    breaks: Vec<f64>,
    /// segment start times, beginning at 0
    starts: Vec<f64>,
    values: Vec<f64>,
    prefix: Vec<f64>,
}

impl Cumulative {
    fn new(schedule: &WeightSchedule, horizon: f64) -> Self {
        let breaks = schedule.breakpoints(horizon);
        let mut starts = Vec::with_capacity(breaks.len() + 1);
        starts.push(0.0);
        starts.extend(breaks.iter().copied().filter(|&b| b < horizon));
        let mut values = Vec::with_capacity(starts.len());
        let mut prefix = Vec::with_capacity(starts.len());
        let mut acc = 0.0;
        for (k, &s) in starts.iter().enumerate() {
            let end = starts.get(k + 1).copied().unwrap_or(horizon);
            let value = schedule.value(0.5 * (s + end));
            prefix.push(acc);
            values.push(value);
            acc += value * (end - s);
        }
        Cumulative {
            breaks,
            starts,
            values,
            prefix,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let idx = self.starts.partition_point(|&s| s <= t).max(1) - 1;
        self.prefix[idx] + self.values[idx] * (t - self.starts[idx])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(period: f64, duty: f64) -> WeightSchedule {
        WeightSchedule::new(
            SchedulePattern::SquareWave {
                period,
                duty,
                phase: 0.0,
            },
            None,
        )
    }

    fn blackouts(intervals: Vec<[f64; 2]>) -> WeightSchedule {
        WeightSchedule::new(SchedulePattern::BlackoutList { intervals }, None)
    }

    #[test]
    fn point_values() {
        assert_eq!(WeightSchedule::always_on().eval(17.3).unwrap(), 1.0);
        let sq = square(2.0, 0.5);
        assert_eq!(sq.eval(0.5).unwrap(), 1.0);
        assert_eq!(sq.eval(1.5).unwrap(), 0.0);
        // right-continuous
        assert_eq!(sq.eval(1.0).unwrap(), 0.0);
        assert_eq!(sq.eval(2.0).unwrap(), 1.0);
        let bl = blackouts(vec![[5.0, 9.0]]);
        assert_eq!(bl.eval(7.0).unwrap(), 0.0);
        assert_eq!(bl.eval(5.0).unwrap(), 0.0);
        assert_eq!(bl.eval(9.0).unwrap(), 1.0);
        assert!(matches!(bl.eval(-1.0), Err(ScheduleError::NegativeTime(_))));
    }

    #[test]
    fn breakpoint_enumeration() {
        assert!(WeightSchedule::always_on().breakpoints(10.0).is_empty());
        assert_eq!(square(2.0, 0.5).breakpoints(4.0), vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            blackouts(vec![[5.0, 9.0]]).breakpoints(10.0),
            vec![5.0, 9.0]
        );
        assert!(square(2.0, 1.0).breakpoints(10.0).is_empty());
    }

    #[test]
    fn pe_known_windows() {
        let on = WeightSchedule::always_on()
            .verify_pe(2.0, 2.0, 10.0)
            .unwrap();
        assert!(on.pass);
        assert_eq!(on.worst_window_integral, 2.0);

        let sq = square(2.0, 0.5).verify_pe(2.0, 1.0, 20.0).unwrap();
        assert!(sq.pass);
        assert!((sq.worst_window_integral - 1.0).abs() < 1e-12);

        let bl = blackouts(vec![[5.0, 9.0]])
            .verify_pe(5.0, 1.0, 20.0)
            .unwrap();
        assert!(bl.pass);
        assert!((bl.worst_window_integral - 1.0).abs() < 1e-12);
        let bl = blackouts(vec![[5.0, 9.0]])
            .verify_pe(5.0, 1.5, 20.0)
            .unwrap();
        assert!(!bl.pass);

        let fail = square(1.0, 0.5).verify_pe(1.0, 0.9, 10.0).unwrap();
        assert!(!fail.pass);
        assert!((fail.worst_window_integral - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pe_argument_errors() {
        let on = WeightSchedule::always_on();
        assert!(matches!(
            on.verify_pe(2.0, 1.0, 1.0),
            Err(ScheduleError::HorizonTooShort { .. })
        ));
        assert!(on.verify_pe(0.0, 1.0, 5.0).is_err());
        assert!(on.verify_pe(1.0, 0.0, 5.0).is_err());
    }

    #[test]
    fn declaration_checks() {
        let sq = square(1.0, 0.5).with_pe(1.0, 0.9);
        assert!(matches!(
            sq.validate(0.5, 10.0),
            Err(ScheduleError::PeViolated { .. })
        ));
        let sq = square(1.0, 0.5).with_pe(1.0, 0.5);
        sq.validate(0.5, 10.0).unwrap();
        // T must dominate tau_bar
        assert!(sq.validate(2.0, 10.0).is_err());
        assert!(blackouts(vec![[2.0, 1.0]]).validate_pattern().is_err());
        assert!(blackouts(vec![[1.0, 3.0], [2.0, 4.0]])
            .validate_pattern()
            .is_err());
    }

    #[test]
    fn always_on_satisfies_every_floor_up_to_t() {
        for window in [0.5, 1.0, 3.7] {
            let r = WeightSchedule::always_on()
                .verify_pe(window, window, 20.0)
                .unwrap();
            assert!(r.pass);
        }
    }

    #[test]
    fn random_blackouts_are_deterministic_and_pe() {
        for seed in 0..40u64 {
            let schedule = WeightSchedule::new(
                SchedulePattern::RandomBlackouts {
                    period: 1.5,
                    max_off_fraction: 0.6,
                    seed,
                },
                None,
            );
            let r = schedule.verify_pe(3.0, 0.4 * 1.5, 60.0).unwrap();
            assert!(r.pass, "seed {seed}: {r:?}");
            assert_eq!(schedule.breakpoints(30.0), schedule.breakpoints(30.0));
        }
    }

    #[test]
    fn default_declarations_verify() {
        let patterns = [
            SchedulePattern::AlwaysOn,
            SchedulePattern::SquareWave {
                period: 0.7,
                duty: 0.3,
                phase: 0.2,
            },
            SchedulePattern::RandomBlackouts {
                period: 0.4,
                max_off_fraction: 0.5,
                seed: 9,
            },
        ];
        for pattern in patterns {
            let mut s = WeightSchedule::new(pattern, None);
            s.pe = s.default_pe(1.0);
            s.validate(1.0, 30.0).unwrap();
        }
    }

    #[test]
    fn exact_integral() {
        let sq = square(2.0, 0.25);
        assert!((sq.integral(0.0, 10.0) - 2.5).abs() < 1e-12);
        assert!((sq.integral(0.25, 0.75) - 0.25).abs() < 1e-12);
    }
}
