//! External confining potential `V(q)`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::charge::ChargeDensity;
use crate::error::{Error, Result};

/// `|∇V| < CRITICAL_TOL` marks a critical point.
pub const CRITICAL_TOL: f64 = 1e-10;
/// Hessian eigenvalues must exceed `HESSIAN_REL_TOL · scale`.
pub const HESSIAN_REL_TOL: f64 = 1e-8;

/// Default frequency of the isotropic quadratic potential.
pub const DEFAULT_OMEGA0: f64 = 3.0;

/// Monomial `coef · q₁^e₁ q₂^e₂ q₃^e₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub exps: [u32; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `½ω₀²|q|²`.
    IsotropicQuadratic { omega0: f64 },
    /// Sum of monomials.
    Polynomial { terms: Vec<Monomial> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPotential {
    kind: PotentialKind,
    lower_bound: f64,
}

impl ExternalPotential {
    pub fn isotropic_quadratic(omega0: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::InvalidArgument(format!("omega0 must be positive, got {omega0}")));
        }
        Ok(ExternalPotential {
            kind: PotentialKind::IsotropicQuadratic { omega0 },
            lower_bound: 0.0,
        })
    }

    /// Polynomial potential. `lower_bound` is `inf V`; when absent it is
    /// estimated by multistart local minimization from `seed`.
    pub fn polynomial(terms: Vec<Monomial>, lower_bound: Option<f64>, seed: u64) -> Result<Self> {
        let mut v = ExternalPotential {
            kind: PotentialKind::Polynomial { terms },
            lower_bound: f64::NEG_INFINITY,
        };
        v.lower_bound = match lower_bound {
            Some(b) => b,
            None => v.estimate_infimum(seed, 64)?,
        };
        Ok(v)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    /// `V₀ = inf V`.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    pub fn value(&self, q: [f64; 3]) -> f64 {
        match &self.kind {
            PotentialKind::IsotropicQuadratic { omega0 } => 0.5 * omega0 * omega0 * dot(q, q),
            PotentialKind::Polynomial { terms } => terms.iter().map(|m| m.coef * mono(q, m.exps)).sum(),
        }
    }

    pub fn gradient(&self, q: [f64; 3]) -> [f64; 3] {
        match &self.kind {
            PotentialKind::IsotropicQuadratic { omega0 } => {
                let w = omega0 * omega0;
                [w * q[0], w * q[1], w * q[2]]
            }
            PotentialKind::Polynomial { terms } => {
                let mut g = [0.0; 3];
                for m in terms {
                    for (i, gi) in g.iter_mut().enumerate() {
                        if m.exps[i] > 0 {
                            let mut e = m.exps;
                            e[i] -= 1;
                            *gi += m.coef * m.exps[i] as f64 * mono(q, e);
                        }
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, q: [f64; 3]) -> Matrix3<f64> {
        match &self.kind {
            PotentialKind::IsotropicQuadratic { omega0 } => Matrix3::identity() * (omega0 * omega0),
            PotentialKind::Polynomial { terms } => {
                let mut h = Matrix3::zeros();
                for m in terms {
                    for i in 0..3 {
                        for j in 0..3 {
                            let mut e = m.exps;
                            let fi = e[i] as f64;
                            if e[i] == 0 {
                                continue;
                            }
                            e[i] -= 1;
                            let fj = e[j] as f64;
                            if e[j] == 0 {
                                continue;
                            }
                            e[j] -= 1;
                            h[(i, j)] += m.coef * fi * fj * mono(q, e);
                        }
                    }
                }
                h
            }
        }
    }

    /// `ω₀` at a critical point with isotropic Hessian `ω₀²·E`.
    pub fn omega0_at(&self, q: [f64; 3]) -> Result<f64> {
        if let PotentialKind::IsotropicQuadratic { omega0 } = self.kind {
            return Ok(omega0);
        }
        let h = self.hessian(q);
        let w = h.trace() / 3.0;
        let dev = (h - Matrix3::identity() * w).abs().max();
        if dev > 1e-10 * w.abs().max(1.0) {
            return Err(Error::Anisotropic(format!(
                "Hessian deviates from a multiple of the identity by {dev:e}"
            )));
        }
        if w <= 0.0 {
            return Err(Error::InvalidArgument(format!("Hessian is not positive: {w}")));
        }
        Ok(w.sqrt())
    }

    /// Whether `q` is a stable critical point: `d²V(q) > 0`.
    pub fn is_stable_point(&self, q: [f64; 3]) -> Result<bool> {
        let g = self.gradient(q);
        let gn = dot(g, g).sqrt();
        if gn >= CRITICAL_TOL {
            return Err(Error::NotCritical {
                grad_norm: gn,
                tolerance: CRITICAL_TOL,
            });
        }
        let eig = SymmetricEigen::new(self.hessian(q)).eigenvalues;
        let scale = match self.kind {
            PotentialKind::IsotropicQuadratic { omega0 } => omega0 * omega0,
            PotentialKind::Polynomial { .. } => eig.amax().max(f64::MIN_POSITIVE),
        };
        Ok(eig.iter().all(|&e| e > HESSIAN_REL_TOL * scale))
    }

    fn estimate_infimum(&self, seed: u64, starts: usize) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        for _ in 0..starts {
            let q0 = [
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ];
            best = best.min(self.descend(q0));
        }
        if !best.is_finite() {
            return Err(Error::InvalidArgument("potential is not bounded below on the sampled region".into()));
        }
        Ok(best)
    }

    /// Damped Newton descent with backtracking; returns the final value.
    fn descend(&self, mut q: [f64; 3]) -> f64 {
        let mut v = self.value(q);
        for _ in 0..500 {
            let g = Vector3::from(self.gradient(q));
            if g.norm() < 1e-13 {
                break;
            }
            let h = self.hessian(q);
            let eig = SymmetricEigen::new(h);
            let mut step = Vector3::zeros();
            for i in 0..3 {
                let lam = eig.eigenvalues[i].abs().max(1e-6);
                let u = eig.eigenvectors.column(i);
                step -= u * (u.dot(&g) / lam);
            }
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-12 {
                let trial = [q[0] + t * step[0], q[1] + t * step[1], q[2] + t * step[2]];
                let vt = self.value(trial);
                if vt < v {
                    q = trial;
                    v = vt;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved || v < -1e12 {
                break;
            }
        }
        v
    }
}

/// `inf 𝓗 = V₀ + ½(ρ, Δ⁻¹ρ)`.
pub fn energy_lower_bound(rho: &ChargeDensity, v: &ExternalPotential) -> Result<f64> {
    Ok(v.lower_bound() + 0.5 * rho.coulomb_self_pairing()?)
}

fn mono(q: [f64; 3], e: [u32; 3]) -> f64 {
    q[0].powi(e[0] as i32) * q[1].powi(e[1] as i32) * q[2].powi(e[2] as i32)
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_well() -> ExternalPotential {
        // (q1² − 1)² + q2² + q3²
        let t = |coef, exps| Monomial { coef, exps };
        ExternalPotential::polynomial(
            vec![
                t(1.0, [4, 0, 0]),
                t(-2.0, [2, 0, 0]),
                t(1.0, [0, 0, 0]),
                t(1.0, [0, 2, 0]),
                t(1.0, [0, 0, 2]),
            ],
            None,
            7,
        )
        .unwrap()
    }

    #[test]
    fn polynomial_derivatives_match_finite_differences() {
        let v = double_well();
        let q = [0.3, -0.7, 1.1];
        let d = 1e-5;
        let g = v.gradient(q);
        let h = v.hessian(q);
        for i in 0..3 {
            let mut qp = q;
            let mut qm = q;
            qp[i] += d;
            qm[i] -= d;
            let fd = (v.value(qp) - v.value(qm)) / (2.0 * d);
            assert!((fd - g[i]).abs() < 1e-8);
            let gp = v.gradient(qp);
            let gm = v.gradient(qm);
            for j in 0..3 {
                assert!(((gp[j] - gm[j]) / (2.0 * d) - h[(i, j)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn multistart_finds_double_well_minimum() {
        assert!(double_well().lower_bound().abs() < 1e-12);
    }

    #[test]
    fn double_well_saddle_is_unstable_and_minima_stable() {
        let v = double_well();
        assert!(!v.is_stable_point([0.0, 0.0, 0.0]).unwrap());
        assert!(v.is_stable_point([1.0, 0.0, 0.0]).unwrap());
    }

    #[test]
    fn non_critical_point_is_rejected() {
        let v = ExternalPotential::isotropic_quadratic(1.0).unwrap();
        assert!(matches!(v.is_stable_point([0.1, 0.0, 0.0]), Err(Error::NotCritical { .. })));
    }

    #[test]
    fn anisotropic_hessian_has_no_scalar_frequency() {
        let v = double_well();
        assert!(matches!(v.omega0_at([1.0, 0.0, 0.0]), Err(Error::Anisotropic(_))));
    }
}
