//! Closed-form constants: initial-data maxima, the influence floor, the
//! per-window contraction constants and the exponential rate.

use serde::{Deserialize, Serialize};

use crate::config::{InitialPath, SystemConfig};
use crate::error::BoundsError;
use crate::influence::Influence;
use crate::model::distance;

/// `C0V = max_j max_s |v_j(s)|`, `M0X = max_l max_{s,r} |x_l(s) - x_l(r)|`
/// and `D0 = max_{i,j} max_{s,t} |v_i(s) - v_j(t)|`, all over `[-tau_bar, 0]`.
/// For the distributed model these are `R0V`, `N0X` and `F0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConstants {
    pub c0v: f64,
    pub m0x: f64,
    pub d0: f64,
}

/// Points of `path` on `[-tau_bar, 0]` where the maxima above are attained:
/// exact for constant and linear paths, a dense scan for sampled ones.
fn probe(path: &InitialPath, tau_bar: f64) -> Vec<Vec<f64>> {
    path.probe_times(tau_bar)
        .into_iter()
        .map(|s| path.eval(s))
        .collect()
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for (a, p) in points.iter().enumerate() {
        for q in &points[a + 1..] {
            best = best.max(distance(p, q));
        }
    }
    best
}

pub fn initial_constants(cfg: &SystemConfig) -> InitialConstants {
    let tau_bar = cfg.tau_bar();
    let mut c0v: f64 = 0.0;
    let mut m0x: f64 = 0.0;
    let mut cloud = Vec::new();
    for agent in &cfg.initial.agents {
        let vs = probe(&agent.velocity, tau_bar);
        for v in &vs {
            c0v = c0v.max(v.iter().map(|c| c * c).sum::<f64>().sqrt());
        }
        cloud.extend(vs);
        m0x = m0x.max(diameter(&probe(&agent.position, tau_bar)));
    }
    InitialConstants {
        c0v,
        m0x,
        d0: diameter(&cloud),
    }
}

/// `min { psi(r) : r in [0, upper] }`.
pub fn phi_lower_bound(psi: &Influence, upper: f64) -> Result<f64, BoundsError> {
    Ok(psi.min_on(upper)?)
}

/// `(C*, C)` with `C* = min { e^{-K(T + tau_bar)}, e^{-KT} phi alpha_tilde }`
/// and `C = e^{-KT} C*`.
pub fn contraction_constants(
    k: f64,
    window: f64,
    tau_bar: f64,
    floor: f64,
    phi: f64,
) -> Result<(f64, f64), BoundsError> {
    let bad = |msg: String| Err(BoundsError::InvalidArgument(msg));
    if !(k.is_finite() && k > 0.0) {
        return bad(format!("K must be positive, got {k}"));
    }
    if !(window.is_finite() && window > 0.0) {
        return bad(format!("T must be positive, got {window}"));
    }
    if !(tau_bar.is_finite() && tau_bar >= 0.0) {
        return bad(format!("tau_bar must be nonnegative, got {tau_bar}"));
    }
    if !(floor > 0.0 && floor <= window) {
        return bad(format!("alpha_tilde must lie in (0, T], got {floor}"));
    }
    if !(phi.is_finite() && phi > 0.0) {
        return bad(format!("phi must be positive, got {phi}"));
    }
    let decay = (-k * window).exp();
    let c_star = (-k * (window + tau_bar)).exp().min(decay * phi * floor);
    Ok((c_star, decay * c_star))
}

/// `mu = ln(1 / (1 - C_hat)) / (3T)`.
pub fn decay_rate(c_hat: f64, window: f64) -> Result<f64, BoundsError> {
    if !(c_hat > 0.0 && c_hat < 1.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "C_hat must lie in (0, 1), got {c_hat}"
        )));
    }
    if !(window.is_finite() && window > 0.0) {
        return Err(BoundsError::InvalidArgument(format!(
            "T must be positive, got {window}"
        )));
    }
    Ok(-(-c_hat).ln_1p() / (3.0 * window))
}
