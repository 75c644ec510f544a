//! Run configuration.
//!
//! The file is TOML restricted to dotted keys and scalar or array values:
//!
//! ```text
//! seed = 1
//! grid.N = 64
//! grid.L = 16.0
//! charge.kind = "smooth-bump"        # smooth-bump | truncated-gaussian | uniform-ball
//! charge.radius = 1.0
//! charge.total_charge = 6.0          # or charge.amplitude, not both
//! potential.kind = "isotropic-quadratic"   # or user-polynomial
//! potential.omega0 = 3.0
//! potential.terms = [[0.5, 2, 0, 0]] # user-polynomial: [coef, e1, e2, e3] rows
//! dynamics.dt = 0.02
//! dynamics.sigma = 1.5
//! dynamics.d0 = 0.01
//! ```
//!
//! Every key is optional. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wavepart_core::charge::{ProfileKind, DEFAULT_TOTAL_CHARGE};
use wavepart_core::free_wave::{CausalWindow, FIT_START};
use wavepart_core::particle::Scheme;
use wavepart_core::potential::DEFAULT_OMEGA0;
use wavepart_core::scattering::TMAX_FRACTION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    WienerScan,
    StabilityScan,
    FreeDecay,
    LinearDecay,
    NonlinearDecay,
    Scattering,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::WienerScan,
        Experiment::StabilityScan,
        Experiment::FreeDecay,
        Experiment::LinearDecay,
        Experiment::NonlinearDecay,
        Experiment::Scattering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::WienerScan => "wiener-scan",
            Experiment::StabilityScan => "stability-scan",
            Experiment::FreeDecay => "free-decay",
            Experiment::LinearDecay => "linear-decay",
            Experiment::NonlinearDecay => "nonlinear-decay",
            Experiment::Scattering => "scattering",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s)
    }

    fn is_dynamic(self) -> bool {
        matches!(
            self,
            Experiment::FreeDecay | Experiment::LinearDecay | Experiment::NonlinearDecay | Experiment::Scattering
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<String>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub grid: GridConfig,
    pub charge: ChargeConfig,
    pub potential: PotentialConfig,
    pub dynamics: DynamicsConfig,
    pub data: DataConfig,
    pub wiener: WienerConfig,
    pub stability: StabilityConfig,
    pub scattering: ScatteringConfig,
}

/// Absent values fall back to `N = 64, L = 16`, or `N = 128, L = 32` for
/// scattering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChargeConfig {
    pub kind: String,
    pub radius: f64,
    pub total_charge: Option<f64>,
    pub amplitude: Option<f64>,
}

impl Default for ChargeConfig {
    fn default() -> Self {
        ChargeConfig {
            kind: "smooth-bump".into(),
            radius: 1.0,
            total_charge: None,
            amplitude: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    pub omega0: f64,
    /// Rows `[coef, e1, e2, e3]`.
    pub terms: Vec<[f64; 4]>,
    pub lower_bound: Option<f64>,
    /// Reference critical point; the isotropic quadratic always uses the origin.
    pub q_star: [f64; 3],
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            kind: "isotropic-quadratic".into(),
            omega0: DEFAULT_OMEGA0,
            terms: Vec::new(),
            lower_bound: None,
            q_star: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub dt: f64,
    /// Defaults to the causal window, or its `TMAX_FRACTION` for scattering.
    pub t_final: Option<f64>,
    pub d0: f64,
    pub sigma: f64,
    pub scheme: String,
    pub sample_every: usize,
    /// Majorant threshold; defaults to `10·d0`.
    pub epsilon: Option<f64>,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            dt: 0.02,
            t_final: None,
            d0: 1e-2,
            sigma: 1.5,
            scheme: "strang".into(),
            sample_every: 25,
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub radius: f64,
    pub center: [f64; 3],
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            radius: 2.0,
            center: [0.5, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WienerConfig {
    pub k_max: f64,
    pub samples: usize,
}

impl Default for WienerConfig {
    fn default() -> Self {
        WienerConfig {
            k_max: 6.0,
            samples: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub nu_max: f64,
    pub samples: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            nu_max: 40.0,
            samples: 801,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatteringConfig {
    /// Times of the recorded partial integrals; those beyond `T_max` are dropped.
    pub checkpoints: Vec<f64>,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        ScatteringConfig {
            checkpoints: vec![4.0, 8.0, 12.0, 16.0, 20.0],
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn grid_for(&self, exp: Experiment) -> (usize, f64) {
        let (n, l) = if exp == Experiment::Scattering { (128, 32.0) } else { (64, 16.0) };
        (self.grid.n.unwrap_or(n), self.grid.l.unwrap_or(l))
    }

    pub fn profile(&self) -> Option<ProfileKind> {
        ProfileKind::parse(&self.charge.kind).ok()
    }

    pub fn total_charge(&self) -> f64 {
        self.charge.total_charge.unwrap_or(DEFAULT_TOTAL_CHARGE)
    }

    pub fn data_extent(&self) -> f64 {
        let c = self.data.center;
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() + self.data.radius
    }

    pub fn window_for(&self, exp: Experiment) -> CausalWindow {
        CausalWindow::new(self.grid_for(exp).1, self.data_extent(), 0.0)
    }

    /// Final time of a time-domain run, snapped down to a whole number of steps.
    pub fn t_final_for(&self, exp: Experiment) -> f64 {
        if let Some(t) = self.dynamics.t_final {
            return t;
        }
        let w = self.window_for(exp).t_window();
        let t = if exp == Experiment::Scattering { TMAX_FRACTION * w } else { w };
        let dt = self.dynamics.dt;
        if dt > 0.0 {
            (t / dt + 1e-9).floor() * dt
        } else {
            t
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.dynamics.epsilon.unwrap_or(10.0 * self.dynamics.d0)
    }
}

/// Violations of the configuration for `exp`; empty iff it can run.
pub fn validate_config(cfg: &RunConfig, exp: Experiment) -> Vec<String> {
    let mut v = Vec::new();
    let (n, l) = cfg.grid_for(exp);
    if !n.is_power_of_two() || n < 8 {
        v.push(format!("grid.N must be a power of two and at least 8, got {n}"));
    }
    if !(l > 0.0 && l.is_finite()) {
        v.push(format!("grid.L must be positive, got {l}"));
    }
    if cfg.profile().is_none() {
        v.push(format!(
            "charge.kind must be smooth-bump, truncated-gaussian or uniform-ball, got {:?}",
            cfg.charge.kind
        ));
    }
    if !(cfg.charge.radius > 0.0 && cfg.charge.radius.is_finite()) {
        v.push(format!("charge.radius must be positive, got {}", cfg.charge.radius));
    }
    if cfg.charge.total_charge.is_some() && cfg.charge.amplitude.is_some() {
        v.push("set at most one of charge.total_charge and charge.amplitude".into());
    }
    if !cfg.total_charge().is_finite() || cfg.charge.amplitude.is_some_and(|a| !a.is_finite()) {
        v.push("charge strength must be finite".into());
    }
    match cfg.potential.kind.as_str() {
        "isotropic-quadratic" => {
            if !(cfg.potential.omega0 > 0.0 && cfg.potential.omega0.is_finite()) {
                v.push(format!("potential.omega0 must be positive, got {}", cfg.potential.omega0));
            }
        }
        "user-polynomial" => {
            if cfg.potential.terms.is_empty() {
                v.push("potential.terms must list at least one [coef, e1, e2, e3] row".into());
            }
            for row in &cfg.potential.terms {
                if row[1..].iter().any(|e| *e < 0.0 || e.fract() != 0.0) {
                    v.push(format!("potential.terms exponents must be non-negative integers, got {row:?}"));
                }
            }
        }
        other => v.push(format!(
            "potential.kind must be isotropic-quadratic or user-polynomial, got {other:?}"
        )),
    }
    let d = &cfg.dynamics;
    if !(d.sigma > 1.0) {
        v.push(format!("sigma must exceed 1, got {}", d.sigma));
    }
    if !(d.dt > 0.0 && d.dt.is_finite()) {
        v.push(format!("dynamics.dt must be positive, got {}", d.dt));
    }
    if !(d.d0 >= 0.0 && d.d0.is_finite()) {
        v.push(format!("dynamics.d0 must be non-negative, got {}", d.d0));
    }
    if Scheme::parse(&d.scheme).is_err() {
        v.push(format!("dynamics.scheme must be strang or suzuki4, got {:?}", d.scheme));
    }
    if d.sample_every == 0 {
        v.push("dynamics.sample_every must be at least 1".into());
    }
    if !(cfg.data.radius > 0.0) {
        v.push(format!("data.radius must be positive, got {}", cfg.data.radius));
    }
    match exp {
        Experiment::WienerScan => {
            if !(cfg.wiener.k_max > 0.0) {
                v.push(format!("wiener.k_max must be positive, got {}", cfg.wiener.k_max));
            }
            if cfg.wiener.samples < 2 {
                v.push("wiener.samples must be at least 2".into());
            }
        }
        Experiment::StabilityScan => {
            if !(cfg.stability.nu_max > 0.0) {
                v.push(format!("stability.nu_max must be positive, got {}", cfg.stability.nu_max));
            }
            if cfg.stability.samples < 3 {
                v.push("stability.samples must be at least 3".into());
            }
        }
        _ => {}
    }
    if exp.is_dynamic() && v.is_empty() {
        let w = cfg.window_for(exp).t_window();
        let t = cfg.t_final_for(exp);
        if w <= 0.0 {
            v.push(format!("data extent {} does not fit in grid.L = {l}", cfg.data_extent()));
        } else if !(t > 0.0) || t > w {
            v.push(format!("dynamics.t_final = {t} lies outside the causal window T_window = {w}"));
        } else if t < FIT_START + 2.0 && exp != Experiment::Scattering {
            v.push(format!("dynamics.t_final = {t} leaves no room for a decay fit after t = {FIT_START}"));
        } else if exp == Experiment::Scattering && 0.5 * t < FIT_START + 2.0 {
            v.push(format!(
                "scattering T_max = {t} is too short for a remainder fit on [{FIT_START}, T_max/2]; enlarge grid.L"
            ));
        }
    }
    v
}
