//! The piecewise functional `E` and the Lyapunov functional `W`, plus the
//! implicit position bound `d*` they yield.

use serde::{Deserialize, Serialize};

use crate::influence::Influence;
use crate::quadrature::adaptive_simpson;

use super::records::interpolate;

const SIMPSON_TOL: f64 = 1e-13;

/// Constants entering `E` and `W`.
#[derive(Debug, Clone)]
pub struct LyapunovInputs<'a> {
    pub psi: &'a Influence,
    pub k: f64,
    pub window: f64,
    pub tau_bar: f64,
    /// PE floor `alpha_tilde`.
    pub floor: f64,
    /// `tau_bar C0V + M0X`
    pub offset: f64,
    pub d0: f64,
    /// `D_n`, `n = 0, 1, ...`
    pub diam: &'a [f64],
    /// `C_n`, `n = 0, 1, ...`
    pub contraction: &'a [f64],
}

/// `g(r) = min { e^{-K(T + tau_bar)}, e^{-KT} alpha_tilde min_{[0, r]} psi }`.
#[derive(Debug, Clone)]
pub(crate) struct Integrand<'a> {
    psi: &'a Influence,
    cap: f64,
    scale: f64,
}

impl<'a> Integrand<'a> {
    pub fn new(inputs: &LyapunovInputs<'a>) -> Self {
        Integrand {
            psi: inputs.psi,
            cap: (-inputs.k * (inputs.window + inputs.tau_bar)).exp(),
            scale: (-inputs.k * inputs.window).exp() * inputs.floor,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.cap.min(self.scale * self.psi.min_on_unchecked(r))
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        adaptive_simpson(&|r| self.eval(r), a, b, SIMPSON_TOL * (1.0 + (b - a)))
    }
}

/// `int_0^U g` for nondecreasing `U`, accumulated incrementally.
struct Running<'a> {
    g: Integrand<'a>,
    upto: f64,
    value: f64,
}

impl Running<'_> {
    fn advance(&mut self, to: f64) -> f64 {
        if to > self.upto {
            self.value += self.g.integral(self.upto, to);
            self.upto = to;
        }
        self.value
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSeries {
    pub t: Vec<f64>,
    /// `E(t)`; `None` where the needed `D_{3n}` or `C_{3n+2}` lies past the run.
    pub energy: Vec<Option<f64>>,
    /// `W(t)`; `None` past `(t_end - 2T) / 3`.
    pub lyapunov: Vec<Option<f64>>,
    /// `W(2T)`, when evaluable.
    pub w_at_2t: Option<f64>,
}

/// `E(t) = D0` on `[-tau_bar, 2T)`, `D_{3n} (1 - C_{3n+2} (t - nT) / T)` on
/// `[nT, (n+1)T)` for `n >= 2`.
pub fn energy_at(inputs: &LyapunovInputs<'_>, t: f64) -> Option<f64> {
    let period = inputs.window;
    if t < 2.0 * period - 1e-9 {
        return Some(inputs.d0);
    }
    let n = ((t / period) + 1e-9).floor() as usize;
    let d = *inputs.diam.get(3 * n)?;
    let c = *inputs.contraction.get(3 * n + 2)?;
    Some(d * (1.0 - c / period * (t - n as f64 * period)))
}

/// `E` and `W` on the record times `times >= 0`.
///
/// `W(t) = T E(t) + (e^{-KT} / 3) int_0^{U(t)} g` with
/// `U(t) = tau_bar C0V + M0X + max_{s <= 3t + 2T} d_X(s)`; the running maximum
/// (`record_times`, `running_max`) is interpolated linearly between records.
pub fn lyapunov_series(
    inputs: &LyapunovInputs<'_>,
    times: &[f64],
    record_times: &[f64],
    running_max: &[f64],
    t_end: f64,
) -> LyapunovSeries {
    let period = inputs.window;
    let last = (t_end - 2.0 * period) / 3.0 + 1e-9;
    let decay = (-inputs.k * period).exp();
    let mut running = Running {
        g: Integrand::new(inputs),
        upto: 0.0,
        value: 0.0,
    };
    let mut out = LyapunovSeries::default();
    for &t in times {
        let energy = energy_at(inputs, t);
        let w = match energy {
            Some(e) if t <= last => {
                let u =
                    inputs.offset + interpolate(record_times, running_max, 3.0 * t + 2.0 * period);
                Some(period * e + decay / 3.0 * running.advance(u))
            }
            _ => None,
        };
        if (t - 2.0 * period).abs() <= 1e-9 {
            out.w_at_2t = w;
        }
        out.t.push(t);
        out.energy.push(energy);
        out.lyapunov.push(w);
    }
    out
}

/// Solves `int_0^{d*} e^{-KT} g = 3 W(2T)` for `d*`, starting from the known
/// lower bound `U(2T)`. `None` if the integral of `g` stays below the target
/// (possible when `psi` decays too fast).
pub fn rigorous_position_bound(
    inputs: &LyapunovInputs<'_>,
    w_at_2t: f64,
    u_at_2t: f64,
) -> Option<f64> {
    let g = Integrand::new(inputs);
    let target = 3.0 * w_at_2t / (-inputs.k * inputs.window).exp();
    let mut lo = u_at_2t;
    let mut at_lo = g.integral(0.0, lo);
    if at_lo >= target {
        return Some(lo);
    }
    let mut width = lo.max(1.0);
    let (hi, at_hi) = loop {
        let hi = lo + width;
        let at_hi = at_lo + g.integral(lo, hi);
        if at_hi >= target {
            break (hi, at_hi);
        }
        if !(hi < 1e15) {
            return None;
        }
        lo = hi;
        at_lo = at_hi;
        width *= 2.0;
    };
    let (mut a, mut b, mut fa) = (lo, hi, at_lo);
    debug_assert!(at_hi >= target);
    for _ in 0..200 {
        if b - a <= 1e-12 * b.max(1.0) {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = fa + g.integral(a, m);
        if fm >= target {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs<'a>(psi: &'a Influence, diam: &'a [f64], c: &'a [f64]) -> LyapunovInputs<'a> {
        LyapunovInputs {
            psi,
            k: psi.sup_norm(),
            window: 1.0,
            tau_bar: 0.5,
            floor: 1.0,
            offset: 0.25,
            d0: 1.0,
            diam,
            contraction: c,
        }
    }

    #[test]
    fn constant_influence_integral_is_linear() {
        let psi = Influence::Constant { k: 2.0 };
        let inp = inputs(&psi, &[], &[]);
        let g = Integrand::new(&inp);
        let constant = f64::min((-2.0f64 * 1.5).exp(), (-2.0f64).exp() * 2.0);
        for u in [0.3, 1.0, 17.0] {
            let exact = constant * u;
            assert!(((g.integral(0.0, u) - exact) / exact).abs() < 1e-8);
        }
    }

    #[test]
    fn kinked_integrand_matches_fine_trapezoid() {
        let psi = Influence::PowerLaw { k: 1.0, gamma: 0.4 };
        let inp = inputs(&psi, &[], &[]);
        let g = Integrand::new(&inp);
        let n = 400_000;
        let b = 40.0;
        let dx = b / n as f64;
        let trap: f64 = (0..n)
            .map(|k| 0.5 * dx * (g.eval(k as f64 * dx) + g.eval((k + 1) as f64 * dx)))
            .sum();
        assert!((g.integral(0.0, b) - trap).abs() < 1e-8);
    }

    #[test]
    fn energy_is_piecewise() {
        let psi = Influence::Constant { k: 1.0 };
        let diam: Vec<f64> = (0..12).map(|n| 0.9f64.powi(n)).collect();
        let c = vec![0.05; 12];
        let inp = inputs(&psi, &diam, &c);
        assert_eq!(energy_at(&inp, 1.5), Some(1.0));
        let e = energy_at(&inp, 2.5).unwrap();
        assert!((e - diam[6] * (1.0 - 0.05 * 0.5)).abs() < 1e-15);
        assert_eq!(energy_at(&inp, 3.0), Some(diam[9]));
        assert_eq!(energy_at(&inp, 4.0), None);
    }

    #[test]
    fn flat_velocities_give_constant_w() {
        let psi = Influence::Constant { k: 1.0 };
        let diam = vec![0.0; 40];
        let c = vec![0.05; 40];
        let mut inp = inputs(&psi, &diam, &c);
        inp.d0 = 0.0;
        let times: Vec<f64> = (0..100).map(|k| 2.0 + k as f64 * 0.02).collect();
        let s = lyapunov_series(&inp, &times, &[0.0, 40.0], &[3.0, 3.0], 40.0);
        let w: Vec<f64> = s.lyapunov.iter().map(|w| w.unwrap()).collect();
        assert!(w.windows(2).all(|p| (p[1] - p[0]).abs() < 1e-14));
        assert!(s.w_at_2t.is_some());
    }

    #[test]
    fn position_bound_inverts_the_integral() {
        let psi = Influence::Constant { k: 1.0 };
        let inp = inputs(&psi, &[], &[]);
        let g = Integrand::new(&inp);
        let gval = g.eval(0.0);
        let w = 2.0;
        let d = rigorous_position_bound(&inp, w, 0.5).unwrap();
        let exact = 3.0 * w / (-1.0f64).exp() / gval;
        assert!(((d - exact) / exact).abs() < 1e-10);

        // integrable psi: the integral saturates below large targets
        let fast = Influence::PowerLaw { k: 1.0, gamma: 2.0 };
        let inp = inputs(&fast, &[], &[]);
        assert!(rigorous_position_bound(&inp, 1e3, 0.5).is_none());
    }
}
