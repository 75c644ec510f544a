//! Field containers and the per-grid spectral workspace.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;

use crate::error::Result;
use crate::grid::{gradient_spectral, Fft3, SpectralGrid};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Pair `(ψ, π)` of real fields sampled on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub psi: Vec<f64>,
    pub pi: Vec<f64>,
}

impl FieldPair {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        FieldPair {
            psi: vec![0.0; grid.len()],
            pi: vec![0.0; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        FieldPair {
            psi: self.psi.iter().map(|v| v * c).collect(),
            pi: self.pi.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &FieldPair) -> Self {
        FieldPair {
            psi: self.psi.iter().zip(&other.psi).map(|(a, b)| a + b).collect(),
            pi: self.pi.iter().zip(&other.pi).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &FieldPair) -> Self {
        self.add(&other.scaled(-1.0))
    }
}

/// Fourier coefficients of a field pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub psi: Vec<C64>,
    pub pi: Vec<C64>,
}

impl SpectralPair {
    pub fn zeros(len: usize) -> Self {
        SpectralPair {
            psi: vec![ZERO; len],
            pi: vec![ZERO; len],
        }
    }

    pub fn axpy(&mut self, a: f64, x: &SpectralPair) {
        for (y, v) in self.psi.iter_mut().zip(&x.psi) {
            *y += v * a;
        }
        for (y, v) in self.pi.iter_mut().zip(&x.pi) {
            *y += v * a;
        }
    }

    pub fn difference(&self, other: &SpectralPair) -> SpectralPair {
        SpectralPair {
            psi: self.psi.iter().zip(&other.psi).map(|(a, b)| a - b).collect(),
            pi: self.pi.iter().zip(&other.pi).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Radial weight `(1+|x|)^α` and its radial derivative on the grid.
#[derive(Debug)]
pub struct Weight {
    pub alpha: f64,
    pub w: Vec<f64>,
    /// `α(1+r)^{α−1}/r` (zero at the origin), so `∇w = dw_over_r · x`.
    pub dw_over_r: Vec<f64>,
}

/// Grid, FFT plans, shell labels and weight cache.
#[derive(Debug)]
pub struct GridOps {
    grid: SpectralGrid,
    fft: Fft3,
    shell_of: Vec<u32>,
    weights: Mutex<HashMap<u64, Arc<Weight>>>,
}

impl GridOps {
    pub fn new(grid: SpectralGrid) -> Self {
        let shell_of = (0..grid.len()).map(|idx| grid.shell(idx) as u32).collect();
        GridOps {
            grid,
            fft: Fft3::new(grid),
            shell_of,
            weights: Mutex::new(HashMap::new()),
        }
    }

    pub fn from_params(n: usize, l: f64) -> Result<Self> {
        Ok(GridOps::new(SpectralGrid::new(n, l)?))
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    pub fn shell_of(&self) -> &[u32] {
        &self.shell_of
    }

    pub fn to_spectral(&self, f: &[f64]) -> Vec<C64> {
        self.fft.to_spectral(f)
    }

    pub fn to_real(&self, fh: &[C64]) -> Vec<f64> {
        self.fft.to_real(fh)
    }

    pub fn pair_to_spectral(&self, f: &FieldPair) -> SpectralPair {
        SpectralPair {
            psi: self.to_spectral(&f.psi),
            pi: self.to_spectral(&f.pi),
        }
    }

    pub fn pair_to_real(&self, f: &SpectralPair) -> FieldPair {
        FieldPair {
            psi: self.to_real(&f.psi),
            pi: self.to_real(&f.pi),
        }
    }

    /// Real-space gradient components of a field given by its coefficients.
    pub fn gradient_real(&self, fh: &[C64]) -> [Vec<f64>; 3] {
        [0, 1, 2].map(|a| self.to_real(&gradient_spectral(&self.grid, fh, a)))
    }

    /// `∫ f g` for real fields given by coefficients: `Vol⁻¹ Σ f̂ conj(ĝ)`.
    pub fn inner_spectral(&self, fh: &[C64], gh: &[C64]) -> f64 {
        let s: f64 = fh.iter().zip(gh).map(|(a, b)| (a * b.conj()).re).sum();
        s / self.grid.volume()
    }

    /// `‖f‖²_{L²}` from coefficients.
    pub fn l2_sq_spectral(&self, fh: &[C64]) -> f64 {
        fh.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.grid.volume()
    }

    /// `‖∇f‖²_{L²}` from coefficients, gradient with Nyquist planes zeroed.
    pub fn grad_sq_spectral(&self, fh: &[C64]) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let kk: Vec<f64> = (0..n)
            .map(|j| if g.is_nyquist(j) { 0.0 } else { g.wavenumber(j).powi(2) })
            .collect();
        let mut s = 0.0;
        for (idx, z) in fh.iter().enumerate() {
            let (i, j, l) = g.unflatten(idx);
            s += (kk[i] + kk[j] + kk[l]) * z.norm_sqr();
        }
        s / g.volume()
    }

    /// Cached weight `(1+|x|)^α`.
    pub fn weight(&self, alpha: f64) -> Arc<Weight> {
        let mut cache = self.weights.lock().expect("weight cache");
        cache
            .entry(alpha.to_bits())
            .or_insert_with(|| {
                let mut w = Vec::with_capacity(self.grid.len());
                let mut d = Vec::with_capacity(self.grid.len());
                for idx in 0..self.grid.len() {
                    let x = self.grid.point(idx);
                    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                    let base = 1.0 + r;
                    w.push(base.powf(alpha));
                    d.push(if r > 0.0 { alpha * base.powf(alpha - 1.0) / r } else { 0.0 });
                }
                Arc::new(Weight { alpha, w, dw_over_r: d })
            })
            .clone()
    }
}
