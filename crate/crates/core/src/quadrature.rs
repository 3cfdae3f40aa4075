//! Gauss-Legendre rules for the distributed-delay integral and an adaptive
//! Simpson integrator for the Lyapunov functional.

use std::f64::consts::PI;

/// An `m`-point Gauss-Legendre rule on `[-1, 1]`, exact for polynomials of
/// degree `2m - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of `P_m`, found by Newton iteration from the
    /// Chebyshev-like initial guess. Panics if `m == 0`.
    pub fn new(m: usize) -> Self {
        assert!(m > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let half = m.div_ceil(2);
        let mf = m as f64;
        for i in 0..half {
            let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[m - 1 - i] = z;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn reference_nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn reference_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn nodes_on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.nodes_on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let pm1 = if m == 0 { 0.0 } else { p0 };
    let d = m as f64 * (z * p - pm1) / (z * z - 1.0);
    (p, d)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_interval_length() {
        for m in 1..=20 {
            let rule = GaussLegendre::new(m);
            let s: f64 = rule.reference_weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "m = {m}: {s}");
        }
    }

    #[test]
    fn exact_for_degree_2m_minus_1() {
        for m in 1..=12 {
            let rule = GaussLegendre::new(m);
            for deg in 0..(2 * m) {
                let got = rule.integrate(0.2, 1.7, |x| x.powi(deg as i32));
                let exact = (1.7f64.powi(deg as i32 + 1) - 0.2f64.powi(deg as i32 + 1))
                    / (deg as f64 + 1.0);
                assert!(
                    (got - exact).abs() < 1e-12 * exact.abs().max(1.0),
                    "m={m} deg={deg}"
                );
            }
        }
    }

    #[test]
    fn known_two_point_rule() {
        let rule = GaussLegendre::new(2);
        let x = 1.0 / 3f64.sqrt();
        assert!((rule.reference_nodes()[0] + x).abs() < 1e-15);
        assert!((rule.reference_nodes()[1] - x).abs() < 1e-15);
    }

    #[test]
    fn simpson_handles_kinks() {
        let f = |x: f64| (x - 1.0).abs().min(0.5);
        let got = adaptive_simpson(&f, 0.0, 3.0, 1e-12);
        // 0.25 on [0.5, 1.5] plus 0.5 * 2 elsewhere
        assert!((got - 1.25).abs() < 1e-9, "{got}");
        assert_eq!(adaptive_simpson(&f, 1.0, 1.0, 1e-9), 0.0);
    }
}
