use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::checks::Verdict;

/// Constants of the run. For the distributed model `c0v`, `m0x`, `d0`,
/// `phi_hat`, `c_hat` and `mu` play the roles of `R0V`, `N0X`, `F0`,
/// `eta_hat`, `gamma_hat` and `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConstants {
    /// `K = sup psi`
    pub k: f64,
    pub tau_bar: f64,
    /// PE window `T`
    pub window: Option<f64>,
    /// PE floor `alpha_tilde`
    pub floor: Option<f64>,
    pub c0v: f64,
    pub m0x: f64,
    pub d0: f64,
    pub sup_dx: f64,
    /// `tau_bar C0V + M0X + sup d_X`, the proxy for `d*` behind `phi_hat`.
    pub d_star_observed: f64,
    pub d_star_rigorous: Option<f64>,
    pub d_star_status: String,
    pub infint: bool,
    pub phi_hat: Option<f64>,
    pub c_star_hat: Option<f64>,
    pub c_hat: Option<f64>,
    pub mu: Option<f64>,
    /// Rate forced by the caller for the envelope check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_override: Option<f64>,
}

/// Per-window sequences indexed by `n = 0 ..= floor(t_end / T)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sequences {
    /// `D_n` (or `F_n`)
    pub diameter: Vec<f64>,
    /// `d_V(nT)`
    pub d_v_at_windows: Vec<f64>,
    /// `phi(nT)` (or `eta(nT)`)
    pub phi: Vec<f64>,
    /// `C_n` (or `gamma_n`)
    pub contraction: Vec<f64>,
}

/// `D_n` recomputed on a record grid twice as coarse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub stride: usize,
    pub coarse_stride: usize,
    pub max_relative_change: f64,
    /// Set when the change exceeds `1e-3`.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlockingThresholds {
    /// Upper bound on `sup d_X`; unchecked when absent.
    #[serde(default)]
    pub position: Option<f64>,
    /// `d_V(t_end) <= align_relative * D0`.
    #[serde(default = "default_align")]
    pub align_relative: f64,
}

fn default_align() -> f64 {
    1e-6
}

impl Default for FlockingThresholds {
    fn default() -> Self {
        FlockingThresholds {
            position: None,
            align_relative: default_align(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockingVerdict {
    pub position_bounded: bool,
    pub velocity_aligned: bool,
    pub max_dx: f64,
    /// Growth of `max d_X` over the last quarter of the run beyond its
    /// earlier maximum.
    pub tail_growth: f64,
    pub final_dv: f64,
    pub align_tolerance: f64,
}

/// Record-grid time series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub d_x: Vec<f64>,
    pub d_v: Vec<f64>,
    pub energy: Vec<Option<f64>>,
    pub lyapunov: Vec<Option<f64>>,
}

impl Series {
    /// CSV with columns `t, d_x, d_v, energy, lyapunov`; missing values are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,d_x,d_v,energy,lyapunov")?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for k in 0..self.t.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.t[k],
                self.d_x[k],
                self.d_v[k],
                opt(self.energy[k]),
                opt(self.lyapunov[k])
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// `"pointwise"` or `"distributed"`.
    pub model: String,
    pub agents: usize,
    pub dimension: usize,
    pub t_end: f64,
    pub constants: ReportConstants,
    /// Why the PE-dependent constants could not be formed, if they could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants_unavailable: Option<String>,
    pub sequences: Sequences,
    pub resolution: Option<Resolution>,
    /// Least-squares rate of `ln d_V` after `3T`; informational.
    pub empirical_rate: Option<f64>,
    pub checks: Vec<Verdict>,
    pub flocking: FlockingVerdict,
    /// All enabled checks passed.
    pub pass: bool,
    #[serde(skip)]
    pub series: Series,
}

impl DiagnosticsReport {
    pub fn check(&self, name: &str) -> Option<&Verdict> {
        self.checks.iter().find(|v| v.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
