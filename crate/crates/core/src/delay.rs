//! Time-delay specifications: a single pointwise lag `tau(t)` or a
//! distributed lag window `[tau1(t), tau2(t)]` weighted by `beta`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// A scalar function of time used for delays. Values are clamped to
/// `[0, tau_bar]` by the owning [`DelaySpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeFunction {
    Constant {
        value: f64,
    },
    /// `mean + amplitude * sin(2 pi t / period)`.
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        period: f64,
    },
}

impl TimeFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant { value } => *value,
            TimeFunction::Sinusoidal {
                mean,
                amplitude,
                period,
            } => mean + amplitude * (2.0 * PI * t / period).sin(),
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            TimeFunction::Constant { value } => (*value, *value),
            TimeFunction::Sinusoidal {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
        }
    }

    fn validate(&self, field: &str) -> Result<(), ModelError> {
        let finite = match self {
            TimeFunction::Constant { value } => value.is_finite(),
            TimeFunction::Sinusoidal {
                mean,
                amplitude,
                period,
            } => {
                if !(period.is_finite() && *period > 0.0) {
                    return Err(ModelError::InvalidDelay(format!(
                        "{field}: sinusoid period must be positive, got {period}"
                    )));
                }
                mean.is_finite() && amplitude.is_finite()
            }
        };
        if finite {
            Ok(())
        } else {
            Err(ModelError::InvalidDelay(format!(
                "{field}: parameters must be finite"
            )))
        }
    }
}

/// Strictly positive weight `beta(s)` on `[0, tau_bar]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelWeight {
    Constant {
        value: f64,
    },
    /// `slope * s + intercept`.
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `exp(-rate * s)`.
    Exponential {
        rate: f64,
    },
}

impl KernelWeight {
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            KernelWeight::Constant { value } => *value,
            KernelWeight::Linear { slope, intercept } => slope * s + intercept,
            KernelWeight::Exponential { rate } => (-rate * s).exp(),
        }
    }

    /// Closed-form `int_a^b beta(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            KernelWeight::Constant { value } => value * (b - a),
            KernelWeight::Linear { slope, intercept } => {
                0.5 * slope * (b * b - a * a) + intercept * (b - a)
            }
            KernelWeight::Exponential { rate } => {
                if *rate == 0.0 {
                    b - a
                } else {
                    ((-rate * a).exp() - (-rate * b).exp()) / rate
                }
            }
        }
    }

    fn validate(&self, tau_bar: f64) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidKernel(msg));
        match self {
            KernelWeight::Constant { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return bad(format!("beta constant must be positive, got {value}"));
                }
            }
            KernelWeight::Linear { slope, intercept } => {
                if !(slope.is_finite() && intercept.is_finite()) {
                    return bad("beta linear parameters must be finite".into());
                }
                // linear: the minimum over [0, tau_bar] sits at an endpoint
                let lo = intercept.min(intercept + slope * tau_bar);
                if lo <= 0.0 {
                    return bad(format!(
                        "beta must be positive on [0, {tau_bar}], minimum is {lo}"
                    ));
                }
            }
            KernelWeight::Exponential { rate } => {
                if !rate.is_finite() {
                    return bad(format!("beta rate must be finite, got {rate}"));
                }
            }
        }
        Ok(())
    }
}

fn default_nodes() -> usize {
    8
}

/// Lag window `[tau1(t), tau2(t)]`, weight `beta`, and the Gauss-Legendre
/// node count used on every window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributedKernel {
    pub tau_bar: f64,
    pub tau1: TimeFunction,
    pub tau2: TimeFunction,
    pub beta: KernelWeight,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl DistributedKernel {
    /// Clamped `(tau1(t), tau2(t))`.
    #[inline]
    pub fn lags(&self, t: f64) -> (f64, f64) {
        (
            self.tau1.eval(t).clamp(0.0, self.tau_bar),
            self.tau2.eval(t).clamp(0.0, self.tau_bar),
        )
    }

    /// `h(t) = int_{tau1(t)}^{tau2(t)} beta(s) ds`.
    pub fn normalizer(&self, t: f64) -> f64 {
        let (a, b) = self.lags(t);
        self.beta.integral(a, b)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.tau_bar.is_finite() && self.tau_bar > 0.0) {
            return Err(ModelError::InvalidDelay(format!(
                "distributed delay needs a positive tau_bar, got {}",
                self.tau_bar
            )));
        }
        self.tau1.validate("tau1")?;
        self.tau2.validate("tau2")?;
        if self.nodes == 0 {
            return Err(ModelError::InvalidKernel(
                "quadrature needs at least one node".into(),
            ));
        }
        let hi1 = self.tau1.range().1.clamp(0.0, self.tau_bar);
        let lo2 = self.tau2.range().0.clamp(0.0, self.tau_bar);
        // sufficient condition for tau1(t) < tau2(t) at every t
        if hi1 >= lo2 {
            return Err(ModelError::InvalidDelay(format!(
                "need tau1(t) < tau2(t) for all t: sup tau1 = {hi1} is not below inf tau2 = {lo2}"
            )));
        }
        self.beta.validate(self.tau_bar)
    }
}

/// Pointwise or distributed delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Pointwise { tau: TimeFunction, tau_bar: f64 },
    Distributed(DistributedKernel),
}

impl DelaySpec {
    pub fn pointwise(tau: TimeFunction, tau_bar: f64) -> Result<Self, ModelError> {
        let spec = DelaySpec::Pointwise { tau, tau_bar };
        spec.validate()?;
        Ok(spec)
    }

    pub fn distributed(kernel: DistributedKernel) -> Result<Self, ModelError> {
        let spec = DelaySpec::Distributed(kernel);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            DelaySpec::Pointwise { tau, tau_bar } => {
                if !(tau_bar.is_finite() && *tau_bar >= 0.0) {
                    return Err(ModelError::InvalidDelay(format!(
                        "tau_bar must be nonnegative and finite, got {tau_bar}"
                    )));
                }
                tau.validate("tau")
            }
            DelaySpec::Distributed(kernel) => kernel.validate(),
        }
    }

    pub fn tau_bar(&self) -> f64 {
        match self {
            DelaySpec::Pointwise { tau_bar, .. } => *tau_bar,
            DelaySpec::Distributed(kernel) => kernel.tau_bar,
        }
    }

    pub fn is_distributed(&self) -> bool {
        matches!(self, DelaySpec::Distributed(_))
    }

    /// The pointwise lag `tau(t)`, clamped to `[0, tau_bar]`.
    #[inline]
    pub fn pointwise_lag(&self, t: f64) -> Option<f64> {
        match self {
            DelaySpec::Pointwise { tau, tau_bar } => Some(tau.eval(t).clamp(0.0, *tau_bar)),
            DelaySpec::Distributed(_) => None,
        }
    }

    pub fn kernel(&self) -> Option<&DistributedKernel> {
        match self {
            DelaySpec::Distributed(kernel) => Some(kernel),
            DelaySpec::Pointwise { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel(tau1: f64, tau2: f64, beta: KernelWeight) -> DistributedKernel {
        DistributedKernel {
            tau_bar: 1.0,
            tau1: TimeFunction::Constant { value: tau1 },
            tau2: TimeFunction::Constant { value: tau2 },
            beta,
            nodes: 8,
        }
    }

    #[test]
    fn linear_kernel_normalizer() {
        let k = kernel(
            0.2,
            0.8,
            KernelWeight::Linear {
                slope: 1.0,
                intercept: 0.0,
            },
        );
        assert!((k.normalizer(3.0) - 0.3).abs() < 1e-15);
        // beta(0) = 0 is not strictly positive on [0, tau_bar]
        assert!(k.validate().is_err());
    }

    #[test]
    fn exponential_normalizer_matches_quadrature() {
        let beta = KernelWeight::Exponential { rate: 1.3 };
        let rule = crate::quadrature::GaussLegendre::new(8);
        let numeric = rule.integrate(0.1, 0.5, |s| beta.eval(s));
        assert!((beta.integral(0.1, 0.5) - numeric).abs() < 1e-15);
    }

    #[test]
    fn sinusoidal_delay_is_clamped() {
        let spec = DelaySpec::pointwise(
            TimeFunction::Sinusoidal {
                mean: 0.3,
                amplitude: 0.5,
                period: 1.0,
            },
            0.5,
        )
        .unwrap();
        for k in 0..1000 {
            let tau = spec.pointwise_lag(k as f64 * 0.013).unwrap();
            assert!((0.0..=0.5).contains(&tau));
        }
        assert_eq!(spec.pointwise_lag(0.25).unwrap(), 0.5);
        assert_eq!(spec.pointwise_lag(0.75).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(DelaySpec::pointwise(TimeFunction::Constant { value: 0.1 }, -1.0).is_err());
        assert!(
            DelaySpec::distributed(kernel(0.5, 0.5, KernelWeight::Constant { value: 1.0 }))
                .is_err()
        );
        assert!(
            DelaySpec::distributed(kernel(0.1, 0.5, KernelWeight::Constant { value: 0.0 }))
                .is_err()
        );
        assert!(
            DelaySpec::distributed(kernel(0.1, 0.5, KernelWeight::Exponential { rate: 1.0 }))
                .is_ok()
        );
    }

    #[test]
    fn scenario_syntax_round_trips() {
        let text = r#"
kind = "distributed"
tau_bar = 0.5
nodes = 8
tau1 = { kind = "constant", value = 0.1 }
tau2 = { kind = "constant", value = 0.5 }
beta = { kind = "exponential", rate = 1.0 }
"#;
        let spec: DelaySpec = toml::from_str(text).unwrap();
        spec.validate().unwrap();
        let back: DelaySpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(spec, back);
        let bad = text.replace("nodes = 8", "nodes = 8\nbogus = 1");
        assert!(toml::from_str::<DelaySpec>(&bad).is_err());
    }
}
