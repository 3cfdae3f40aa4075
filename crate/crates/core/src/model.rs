//! Right-hand sides of the pointwise-delay and distributed-delay
//! Cucker-Smale systems.
//!
//! States are flat vectors `[x_0 .. x_{N-1}, v_0 .. v_{N-1}]` with `x_i, v_i`
//! in `R^d`; derivatives share the layout.

use crate::config::{Coupling, SystemConfig};
use crate::delay::DelaySpec;
use crate::error::ModelError;
use crate::history::DelayedStates;
use crate::influence::Influence;
use crate::quadrature::GaussLegendre;

/// `psi(|x_self - x_other|) / (N - 1)`.
pub fn communication_rate(
    psi: &Influence,
    agents: usize,
    x_self: &[f64],
    x_other_delayed: &[f64],
) -> Result<f64, ModelError> {
    if agents < 2 {
        return Err(ModelError::TooFewAgents(agents));
    }
    Ok(psi.value(distance(x_self, x_other_delayed)) / (agents - 1) as f64)
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Evaluator of the right-hand side with reusable scratch space.
#[derive(Debug, Clone)]
pub struct Rhs {
    agents: usize,
    dim: usize,
    influence: Influence,
    delay: DelaySpec,
    coupling: Coupling,
    rule: Option<GaussLegendre>,
    delayed: Vec<f64>,
}

impl Rhs {
    pub fn new(cfg: &SystemConfig) -> Self {
        let rule = cfg.delay.kernel().map(|k| GaussLegendre::new(k.nodes));
        let copies = rule.as_ref().map_or(1, GaussLegendre::len);
        Rhs {
            agents: cfg.agents,
            dim: cfg.dimension,
            influence: cfg.influence.clone(),
            delay: cfg.delay.clone(),
            coupling: cfg.coupling,
            rule,
            delayed: vec![0.0; copies * cfg.state_width()],
        }
    }

    /// Derivative at time `t` with communication weight `alpha`.
    pub fn eval<L: DelayedStates + ?Sized>(
        &mut self,
        t: f64,
        alpha: f64,
        current: &[f64],
        lookup: &L,
        out: &mut [f64],
    ) -> Result<(), ModelError> {
        let nd = self.agents * self.dim;
        let (dx, dv) = out.split_at_mut(nd);
        dx.copy_from_slice(&current[nd..]);
        dv.fill(0.0);
        if alpha == 0.0 {
            return Ok(());
        }
        match &self.delay {
            DelaySpec::Pointwise { .. } => {
                let lag = self.delay.pointwise_lag(t).unwrap_or(0.0);
                let w = 2 * nd;
                if lag == 0.0 {
                    self.delayed[..w].copy_from_slice(current);
                } else {
                    lookup.state_at(t - lag, &mut self.delayed[..w])?;
                }
                pointwise_accel(
                    &self.influence,
                    self.coupling,
                    self.agents,
                    self.dim,
                    alpha,
                    current,
                    &self.delayed[..w],
                    dv,
                );
            }
            DelaySpec::Distributed(kernel) => {
                let rule = self.rule.as_ref().expect("distributed delay has a rule");
                let (lo, hi) = kernel.lags(t);
                let h = kernel.beta.integral(lo, hi);
                if !(h > 0.0) {
                    return Err(ModelError::NonPositiveNormalizer { t, value: h });
                }
                let w = 2 * nd;
                let nodes: Vec<(f64, f64)> = rule.nodes_on(lo, hi).collect();
                for (k, (sigma, _)) in nodes.iter().enumerate() {
                    lookup.state_at(t - sigma, &mut self.delayed[k * w..(k + 1) * w])?;
                }
                let n = self.agents;
                let d = self.dim;
                let inv = 1.0 / (n - 1) as f64;
                for (k, (sigma, weight)) in nodes.iter().enumerate() {
                    let past = &self.delayed[k * w..(k + 1) * w];
                    let wk = weight * kernel.beta.eval(*sigma) * alpha / h * inv;
                    for i in 0..n {
                        let xi = &current[i * d..(i + 1) * d];
                        let vi = &current[nd + i * d..nd + (i + 1) * d];
                        let acc = &mut dv[i * d..(i + 1) * d];
                        for j in (0..n).filter(|&j| j != i) {
                            let xj = &past[j * d..(j + 1) * d];
                            let vj = &past[nd + j * d..nd + (j + 1) * d];
                            let c = wk * self.influence.value(distance(xi, xj));
                            for m in 0..d {
                                acc[m] += c * (vj[m] - vi[m]);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn pointwise_accel(
    psi: &Influence,
    coupling: Coupling,
    n: usize,
    d: usize,
    alpha: f64,
    current: &[f64],
    delayed: &[f64],
    dv: &mut [f64],
) {
    let nd = n * d;
    let scale = alpha / (n - 1) as f64;
    for i in 0..n {
        let xi = &current[i * d..(i + 1) * d];
        let vi = &current[nd + i * d..nd + (i + 1) * d];
        let acc = &mut dv[i * d..(i + 1) * d];
        for j in (0..n).filter(|&j| j != i) {
            let xj = &delayed[j * d..(j + 1) * d];
            let b = scale * psi.value(distance(xi, xj));
            match coupling {
                Coupling::Velocity => {
                    let vj = &delayed[nd + j * d..nd + (j + 1) * d];
                    for m in 0..d {
                        acc[m] += b * (vj[m] - vi[m]);
                    }
                }
                Coupling::LiteralPosition => {
                    for m in 0..d {
                        acc[m] += b * (xj[m] - xi[m]);
                    }
                }
            }
        }
    }
}

fn checked_alpha(cfg: &SystemConfig, t: f64) -> Result<f64, ModelError> {
    cfg.schedule
        .eval(t)
        .map_err(|e| ModelError::InvalidConfig(e.to_string()))
}

/// Derivative of the pointwise-delay system at `t`, with delayed states from
/// `history` and `alpha(t)` from the configured schedule.
pub fn rhs_pointwise<L: DelayedStates + ?Sized>(
    t: f64,
    current: &[f64],
    history: &L,
    cfg: &SystemConfig,
) -> Result<Vec<f64>, ModelError> {
    if cfg.delay.is_distributed() {
        return Err(ModelError::InvalidConfig(
            "configuration uses a distributed delay".into(),
        ));
    }
    let alpha = checked_alpha(cfg, t)?;
    let mut out = vec![0.0; current.len()];
    Rhs::new(cfg).eval(t, alpha, current, history, &mut out)?;
    Ok(out)
}

/// Derivative of the distributed-delay system at `t`.
pub fn rhs_distributed<L: DelayedStates + ?Sized>(
    t: f64,
    current: &[f64],
    history: &L,
    cfg: &SystemConfig,
) -> Result<Vec<f64>, ModelError> {
    if !cfg.delay.is_distributed() {
        return Err(ModelError::InvalidConfig(
            "configuration uses a pointwise delay".into(),
        ));
    }
    let alpha = checked_alpha(cfg, t)?;
    let mut out = vec![0.0; current.len()];
    Rhs::new(cfg).eval(t, alpha, current, history, &mut out)?;
    Ok(out)
}
