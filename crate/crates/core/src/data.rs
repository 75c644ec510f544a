//! Seeded initial perturbations for the decay and scattering experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{FieldPair, GridOps};
use crate::grid::SpectralGrid;
use crate::linear::LinearizedState;
use crate::norms::closeness;

/// Smooth fields supported in `|x − center| < radius`: a polynomial radial
/// envelope times random monopole, dipole and quadrupole parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipoleData {
    pub radius: f64,
    pub center: [f64; 3],
    /// Harmonic coefficients for `ψ` and `π`: 1 monopole, 3 dipole, 6 quadrupole.
    pub psi: [f64; 10],
    pub pi: [f64; 10],
    pub d: [f64; 3],
    pub p: [f64; 3],
}

impl MultipoleData {
    /// Coefficients uniform in `[−1, 1]`; `d` and `p` uniform in the unit cube.
    pub fn random(radius: f64, center: [f64; 3], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.random_range(-1.0..=1.0);
        MultipoleData {
            radius,
            center,
            psi: std::array::from_fn(|_| draw()),
            pi: std::array::from_fn(|_| draw()),
            d: std::array::from_fn(|_| draw()),
            p: std::array::from_fn(|_| draw()),
        }
    }

    fn value(&self, c: &[f64; 10], x: [f64; 3]) -> f64 {
        let y = [0, 1, 2].map(|a| (x[a] - self.center[a]) / self.radius);
        let s2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        if s2 >= 1.0 {
            return 0.0;
        }
        let env = (1.0 - s2).powi(4);
        let quad = [y[0] * y[0] - y[1] * y[1], y[0] * y[1], y[0] * y[2], y[1] * y[2], y[1] * y[1] - y[2] * y[2], s2];
        let mut v = c[0];
        for a in 0..3 {
            v += c[1 + a] * y[a];
        }
        for (i, q) in quad.iter().enumerate() {
            v += c[4 + i] * q;
        }
        env * v
    }

    /// The field part sampled on `grid`.
    pub fn fields(&self, grid: &SpectralGrid) -> FieldPair {
        FieldPair {
            psi: grid.sample(|x| self.value(&self.psi, x)),
            pi: grid.sample(|x| self.value(&self.pi, x)),
        }
    }

    /// The deviation `(ψ, π, d, p)` rescaled so that its closeness
    /// `‖∇ψ‖_{L²_σ} + ‖π‖_{L²_σ} + |d| + |p|` equals `target`.
    pub fn deviation_with_closeness(&self, ops: &GridOps, sigma: f64, target: f64) -> LinearizedState {
        let z = LinearizedState::from_real(ops, &self.fields(ops.grid()), self.d, self.p);
        let c = target / closeness(ops, &z.fields, z.q, z.p, sigma);
        z.combine(c, &z, 0.0)
    }

    /// Distance from the center to the far edge of the support.
    pub fn extent(&self) -> f64 {
        let c = self.center;
        (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() + self.radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_supported() {
        let a = MultipoleData::random(2.0, [0.5, 0.0, 0.0], 42);
        assert_eq!(a, MultipoleData::random(2.0, [0.5, 0.0, 0.0], 42));
        assert_ne!(a, MultipoleData::random(2.0, [0.5, 0.0, 0.0], 43));
        let grid = SpectralGrid::new(16, 4.0).unwrap();
        let f = a.fields(&grid);
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            let r = ((x[0] - 0.5).powi(2) + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r >= 2.0 {
                assert_eq!(f.psi[idx], 0.0);
                assert_eq!(f.pi[idx], 0.0);
            }
        }
        assert!(f.psi.iter().any(|v| *v != 0.0));
        assert_eq!(a.extent(), 2.5);
    }
}
