//! Exact flow of the particle oscillator `d̈ = −K d` for a symmetric
//! positive-definite stiffness `K`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

/// Largest admissible `|dt|·ω_max` for the split-step integrators.
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

/// Symmetric composition of kick–rotate–kick steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Second order: one rotation per step.
    #[default]
    Strang,
    /// Fourth order: Suzuki's five-stage composition.
    Suzuki4,
}

impl Scheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "strang" => Ok(Scheme::Strang),
            "suzuki4" => Ok(Scheme::Suzuki4),
            _ => Err(Error::InvalidArgument(format!("unknown scheme {s:?}; expected strang or suzuki4"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Strang => "strang",
            Scheme::Suzuki4 => "suzuki4",
        }
    }

    /// Rotation fractions `c_1 … c_m` and kick fractions `d_0 … d_m` of one
    /// step: `kick(d_0) rot(c_1) kick(d_1) … rot(c_m) kick(d_m)`.
    pub fn stages(self) -> (Vec<f64>, Vec<f64>) {
        let rot = match self {
            Scheme::Strang => vec![1.0],
            Scheme::Suzuki4 => {
                let p = 1.0 / (4.0 - 4f64.cbrt());
                vec![p, p, 1.0 - 4.0 * p, p, p]
            }
        };
        let m = rot.len();
        let mut kick = vec![0.5 * rot[0]];
        for i in 1..m {
            kick.push(0.5 * (rot[i - 1] + rot[i]));
        }
        kick.push(0.5 * rot[m - 1]);
        (rot, kick)
    }

    /// Largest `|c_i|`, which sets the particle phase per rotation.
    pub fn max_fraction(self) -> f64 {
        self.stages().0.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicFlow {
    basis: Matrix3<f64>,
    omega: [f64; 3],
    stiffness: Matrix3<f64>,
}

impl HarmonicFlow {
    pub fn new(stiffness: Matrix3<f64>) -> Result<Self> {
        let sym = (stiffness + stiffness.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut omega = [0.0; 3];
        for (i, &ev) in eig.eigenvalues.iter().enumerate() {
            if !(ev > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "particle stiffness must be positive definite, eigenvalue {ev:e}"
                )));
            }
            omega[i] = ev.sqrt();
        }
        Ok(HarmonicFlow {
            basis: eig.eigenvectors,
            omega,
            stiffness: sym,
        })
    }

    pub fn isotropic(omega_sq: f64) -> Result<Self> {
        Self::new(Matrix3::identity() * omega_sq)
    }

    pub fn stiffness(&self) -> &Matrix3<f64> {
        &self.stiffness
    }

    pub fn omega_max(&self) -> f64 {
        self.omega.iter().cloned().fold(0.0, f64::max)
    }

    /// `UnstableStep` unless `|dt|·ω_max < MAX_PHASE_PER_STEP`.
    pub fn check_step(&self, dt: f64) -> Result<()> {
        if !(dt != 0.0 && dt.is_finite()) {
            return Err(Error::UnstableStep {
                dt,
                reason: "time step must be finite and nonzero".into(),
            });
        }
        let phase = dt.abs() * self.omega_max();
        if phase >= MAX_PHASE_PER_STEP {
            return Err(Error::UnstableStep {
                dt,
                reason: format!("dt·ω_max = {phase:.3} must stay below {MAX_PHASE_PER_STEP}"),
            });
        }
        Ok(())
    }

    /// `K d`.
    pub fn apply(&self, d: [f64; 3]) -> [f64; 3] {
        let v = self.stiffness * Vector3::from(d);
        [v[0], v[1], v[2]]
    }

    /// `½ d·K d`.
    pub fn potential(&self, d: [f64; 3]) -> f64 {
        let kd = self.apply(d);
        0.5 * (d[0] * kd[0] + d[1] * kd[1] + d[2] * kd[2])
    }

    /// Advances `(d, p)` by `t` under `ḋ = p`, `ṗ = −K d`.
    pub fn rotate(&self, d: &mut [f64; 3], p: &mut [f64; 3], t: f64) {
        let a = self.basis.transpose() * Vector3::from(*d);
        let b = self.basis.transpose() * Vector3::from(*p);
        let mut a2 = Vector3::zeros();
        let mut b2 = Vector3::zeros();
        for i in 0..3 {
            let w = self.omega[i];
            let (s, c) = (w * t).sin_cos();
            a2[i] = c * a[i] + s / w * b[i];
            b2[i] = c * b[i] - w * s * a[i];
        }
        let d2 = self.basis * a2;
        let p2 = self.basis * b2;
        *d = [d2[0], d2[1], d2[2]];
        *p = [p2[0], p2[1], p2[2]];
    }
}
