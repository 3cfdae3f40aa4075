//! Influence functions: positive, bounded, continuous weights of the
//! inter-agent distance.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// The supported influence-function families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Influence {
    /// `psi(r) = k`.
    Constant { k: f64 },
    /// `psi(r) = k / (1 + r^2)^gamma`.
    PowerLaw { k: f64, gamma: f64 },
    /// `psi(r) = a + b sin^2(omega r)`.
    OscillatingPositive { a: f64, b: f64, omega: f64 },
    /// Piecewise-linear through `(r, value)` knots, constant outside them.
    Tabulated { knots: Vec<[f64; 2]> },
}

impl Influence {
    pub fn constant(k: f64) -> Result<Self, ModelError> {
        let psi = Influence::Constant { k };
        psi.validate()?;
        Ok(psi)
    }

    pub fn power_law(k: f64, gamma: f64) -> Result<Self, ModelError> {
        let psi = Influence::PowerLaw { k, gamma };
        psi.validate()?;
        Ok(psi)
    }

    pub fn oscillating(a: f64, b: f64, omega: f64) -> Result<Self, ModelError> {
        let psi = Influence::OscillatingPositive { a, b, omega };
        psi.validate()?;
        Ok(psi)
    }

    pub fn tabulated(knots: Vec<[f64; 2]>) -> Result<Self, ModelError> {
        let psi = Influence::Tabulated { knots };
        psi.validate()?;
        Ok(psi)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidInfluence(msg));
        match self {
            Influence::Constant { k } => {
                if !(k.is_finite() && *k > 0.0) {
                    return bad(format!("constant k must be positive and finite, got {k}"));
                }
            }
            Influence::PowerLaw { k, gamma } => {
                if !(k.is_finite() && *k > 0.0) {
                    return bad(format!("power law k must be positive and finite, got {k}"));
                }
                if !(gamma.is_finite() && *gamma >= 0.0) {
                    return bad(format!("power law gamma must be nonnegative, got {gamma}"));
                }
            }
            Influence::OscillatingPositive { a, b, omega } => {
                if !(a.is_finite() && *a > 0.0) {
                    return bad(format!("oscillating a must be positive, got {a}"));
                }
                if !(b.is_finite() && *b >= 0.0) {
                    return bad(format!("oscillating b must be nonnegative, got {b}"));
                }
                if !omega.is_finite() {
                    return bad(format!("oscillating omega must be finite, got {omega}"));
                }
            }
            Influence::Tabulated { knots } => {
                if knots.is_empty() {
                    return bad("tabulated influence needs at least one knot".into());
                }
                if knots[0][0] < 0.0 {
                    return bad(format!("first knot at negative distance {}", knots[0][0]));
                }
                for w in knots.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return bad(format!(
                            "knot distances must be strictly increasing ({} then {})",
                            w[0][0], w[1][0]
                        ));
                    }
                }
                for [r, value] in knots {
                    if !(r.is_finite() && value.is_finite() && *value > 0.0) {
                        return bad(format!(
                            "knot ({r}, {value}) must be finite with positive value"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates `psi(r)`, rejecting negative distances.
    pub fn eval(&self, r: f64) -> Result<f64, ModelError> {
        if r < 0.0 || r.is_nan() {
            return Err(ModelError::NegativeDistance(r));
        }
        Ok(self.value(r))
    }

    /// Unchecked evaluation for `r >= 0`.
    #[inline]
    pub(crate) fn value(&self, r: f64) -> f64 {
        match self {
            Influence::Constant { k } => *k,
            Influence::PowerLaw { k, gamma } => {
                if *gamma == 0.0 {
                    *k
                } else if *gamma == 1.0 {
                    k / (1.0 + r * r)
                } else {
                    k * (1.0 + r * r).powf(-gamma)
                }
            }
            Influence::OscillatingPositive { a, b, omega } => {
                let s = (omega * r).sin();
                a + b * s * s
            }
            Influence::Tabulated { knots } => interpolate_knots(knots, r),
        }
    }

    /// `K = sup |psi|`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Influence::Constant { k } | Influence::PowerLaw { k, .. } => *k,
            Influence::OscillatingPositive { a, b, omega } => {
                if *omega == 0.0 {
                    *a
                } else {
                    a + b
                }
            }
            Influence::Tabulated { knots } => knots.iter().map(|k| k[1]).fold(f64::MIN, f64::max),
        }
    }

    /// Whether `int_0^inf min_{[0,x]} psi dx` diverges, decided per family.
    pub fn satisfies_infint(&self) -> bool {
        match self {
            Influence::Constant { .. } => true,
            // min over [0, x] is psi(x) and (1 + x^2)^(-gamma) ~ x^(-2 gamma).
            Influence::PowerLaw { gamma, .. } => *gamma <= 0.5,
            // bounded below by a > 0
            Influence::OscillatingPositive { .. } => true,
            // positive knots and positive constant extension
            Influence::Tabulated { .. } => true,
        }
    }

    /// `min { psi(r) : r in [0, upper] }`.
    pub fn min_on(&self, upper: f64) -> Result<f64, ModelError> {
        if upper < 0.0 || upper.is_nan() {
            return Err(ModelError::NegativeDistance(upper));
        }
        Ok(self.min_on_unchecked(upper))
    }

    pub(crate) fn min_on_unchecked(&self, upper: f64) -> f64 {
        match self {
            Influence::Constant { k } => *k,
            // nonincreasing for gamma >= 0
            Influence::PowerLaw { .. } => self.value(upper),
            // sin^2 vanishes at r = 0, the first critical point, so the floor a is attained
            Influence::OscillatingPositive { a, .. } => *a,
            Influence::Tabulated { knots } => {
                let mut m = self.value(0.0).min(self.value(upper));
                for [r, value] in knots {
                    if *r > upper {
                        break;
                    }
                    m = m.min(*value);
                }
                m
            }
        }
    }
}

fn interpolate_knots(knots: &[[f64; 2]], r: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if r <= first[0] {
        return first[1];
    }
    if r >= last[0] {
        return last[1];
    }
    // first knot with distance > r; guaranteed in 1..len
    let hi = knots.partition_point(|k| k[0] <= r);
    let [r0, y0] = knots[hi - 1];
    let [r1, y1] = knots[hi];
    y0 + (y1 - y0) * (r - r0) / (r1 - r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_point_values() {
        assert_eq!(Influence::constant(1.0).unwrap().eval(5.0).unwrap(), 1.0);
        assert_eq!(
            Influence::power_law(1.0, 1.0).unwrap().eval(1.0).unwrap(),
            0.5
        );
        let tab = Influence::tabulated(vec![[0.0, 1.0], [2.0, 3.0]]).unwrap();
        assert_eq!(tab.eval(1.0).unwrap(), 2.0);
        assert_eq!(tab.eval(10.0).unwrap(), 3.0);
    }

    #[test]
    fn negative_distance_is_rejected() {
        let psi = Influence::constant(1.0).unwrap();
        assert!(matches!(
            psi.eval(-0.1),
            Err(ModelError::NegativeDistance(_))
        ));
        assert!(psi.min_on(-1.0).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Influence::constant(0.0).is_err());
        assert!(Influence::power_law(1.0, -0.5).is_err());
        assert!(Influence::oscillating(0.0, 1.0, 1.0).is_err());
        assert!(Influence::tabulated(vec![]).is_err());
        assert!(Influence::tabulated(vec![[1.0, 1.0], [1.0, 2.0]]).is_err());
        assert!(Influence::tabulated(vec![[0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn infint_classification() {
        assert!(Influence::constant(1.0).unwrap().satisfies_infint());
        assert!(!Influence::power_law(1.0, 1.0).unwrap().satisfies_infint());
        assert!(Influence::power_law(1.0, 0.25).unwrap().satisfies_infint());
        assert!(Influence::power_law(1.0, 0.5).unwrap().satisfies_infint());
        assert!(Influence::oscillating(0.2, 1.0, 3.0)
            .unwrap()
            .satisfies_infint());
    }

    #[test]
    fn minimum_on_interval() {
        assert_eq!(Influence::constant(1.0).unwrap().min_on(7.0).unwrap(), 1.0);
        let p = Influence::power_law(1.0, 1.0).unwrap().min_on(3.0).unwrap();
        assert!((p - 0.1).abs() < 1e-15);
        let osc = Influence::oscillating(0.2, 1.0, 1.0).unwrap();
        assert_eq!(osc.min_on(std::f64::consts::PI).unwrap(), 0.2);
        let tab = Influence::tabulated(vec![[0.0, 2.0], [1.0, 0.5], [2.0, 3.0]]).unwrap();
        assert_eq!(tab.min_on(0.5).unwrap(), 1.25);
        assert_eq!(tab.min_on(5.0).unwrap(), 0.5);
    }

    fn any_influence() -> impl Strategy<Value = Influence> {
        prop_oneof![
            (0.1f64..5.0).prop_map(|k| Influence::Constant { k }),
            (0.1f64..5.0, 0.0f64..3.0).prop_map(|(k, gamma)| Influence::PowerLaw { k, gamma }),
            (0.01f64..2.0, 0.0f64..3.0, -4.0f64..4.0)
                .prop_map(|(a, b, omega)| Influence::OscillatingPositive { a, b, omega }),
            prop::collection::vec((0.01f64..2.0, 0.01f64..5.0), 1..6).prop_map(|steps| {
                let mut r = 0.0;
                let knots = steps
                    .into_iter()
                    .map(|(dr, y)| {
                        r += dr;
                        [r, y]
                    })
                    .collect();
                Influence::Tabulated { knots }
            }),
        ]
    }

    proptest! {
        #[test]
        fn positive_and_bounded(psi in any_influence(), r in 0.0f64..1e4) {
            psi.validate().unwrap();
            let value = psi.eval(r).unwrap();
            prop_assert!(value > 0.0);
            prop_assert!(value <= psi.sup_norm() * (1.0 + 1e-14));
        }

        #[test]
        fn min_on_is_a_lower_bound(psi in any_influence(), upper in 0.0f64..20.0, frac in 0.0f64..=1.0) {
            let m = psi.min_on(upper).unwrap();
            prop_assert!(m > 0.0);
            prop_assert!(m <= psi.eval(upper * frac).unwrap() + 1e-14);
        }
    }
}
