//! Periodic spectral grid on `[−L, L)³` and its continuous-normalized FFT.
//!
//! Arrays are stored in FFT order along every axis: index `j` holds the
//! coordinate `x = m·h` with `m = j` for `j < N/2` and `m = j − N` otherwise,
//! so the origin sits at index 0. Flat index is `(i·N + j)·N + l`.
//!
//! Transforms follow the continuum convention
//! `f̂(k) = ∫ e^{ik·x} f(x) d³x ≈ h³ Σ f(x) e^{ik·x}` and
//! `f(x) = Vol⁻¹ Σ f̂(k) e^{−ik·x}`, so `∫ f g = Vol⁻¹ Σ f̂ conj(ĝ)` for real fields.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Grid geometry: box half-length `L`, `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    n: usize,
    l: f64,
}

impl SpectralGrid {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("N must be a power of two >= 4, got {n}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("L must be positive, got {l}")));
        }
        Ok(SpectralGrid { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.l).powi(3)
    }

    /// Signed mode/offset number of index `j` along one axis.
    pub fn signed(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        self.signed(j) as f64 * self.spacing()
    }

    /// Wavenumber `πm/L` of index `j` along one axis.
    pub fn wavenumber(&self, j: usize) -> f64 {
        PI * self.signed(j) as f64 / self.l
    }

    pub fn is_nyquist(&self, j: usize) -> bool {
        j == self.n / 2
    }

    /// Position of a flat index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let (i, j, l) = self.unflatten(idx);
        [self.coordinate(i), self.coordinate(j), self.coordinate(l)]
    }

    pub fn unflatten(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    pub fn flatten(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n + j) * self.n + l
    }

    /// Samples `f` at every grid point.
    pub fn sample<F: Fn([f64; 3]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len()).map(|idx| f(self.point(idx))).collect()
    }

    /// Integer shell label `m₁²+m₂²+m₃²` of a flat index.
    pub fn shell(&self, idx: usize) -> usize {
        let (i, j, l) = self.unflatten(idx);
        let (a, b, c) = (self.signed(i), self.signed(j), self.signed(l));
        (a * a + b * b + c * c) as usize
    }

    pub fn shell_count(&self) -> usize {
        3 * (self.n / 2) * (self.n / 2) + 1
    }

    /// `|k|` of a shell label.
    pub fn shell_wavenumber(&self, s: usize) -> f64 {
        PI * (s as f64).sqrt() / self.l
    }

    /// Natural (row-major, `x` ascending from `−L`) index of FFT-order index `j`.
    pub fn natural_index(&self, j: usize) -> usize {
        (j + self.n / 2) % self.n
    }

    pub fn same_as(&self, other: &SpectralGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "N = {}, L = {} vs N = {}, L = {}",
                self.n, self.l, other.n, other.l
            )));
        }
        Ok(())
    }
}

/// Plans and scratch for 3D transforms on one grid.
pub struct Fft3 {
    grid: SpectralGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Mutex<Vec<Complex64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("grid", &self.grid).finish()
    }
}

impl Fft3 {
    pub fn new(grid: SpectralGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n());
        let inverse = planner.plan_fft_inverse(grid.n());
        Fft3 {
            grid,
            forward,
            inverse,
            scratch: Mutex::new(Vec::new()),
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// `f̂ = h³ Σ f e^{ik·x}`.
    pub fn to_spectral(&self, f: &[f64]) -> Vec<Complex64> {
        assert_eq!(f.len(), self.grid.len());
        let mut data: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        let c = self.grid.cell_volume();
        data.iter_mut().for_each(|z| *z *= c);
        data
    }

    /// `f = Vol⁻¹ Σ f̂ e^{−ik·x}`, real part.
    pub fn to_real(&self, fh: &[Complex64]) -> Vec<f64> {
        let mut data = fh.to_vec();
        self.to_real_in_place(&mut data);
        data.iter().map(|z| z.re).collect()
    }

    /// Backward transform in place (complex result).
    pub fn to_real_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.grid.len());
        self.transform(data, false);
        let c = 1.0 / self.grid.volume();
        data.iter_mut().for_each(|z| *z *= c);
    }

    fn transform(&self, data: &mut [Complex64], to_spectral: bool) {
        let n = self.grid.n();
        let plan = if to_spectral { &self.inverse } else { &self.forward };
        let mut scratch = self.scratch.lock().expect("fft scratch");
        let need = plan.get_inplace_scratch_len().max(n * n);
        if scratch.len() < need + n * n {
            scratch.resize(need + n * n, Complex64::new(0.0, 0.0));
        }
        let (fft_scratch, lines) = scratch.split_at_mut(need);
        let fft_scratch = &mut fft_scratch[..plan.get_inplace_scratch_len()];
        // contiguous and middle axes, one (j, l) slab per task
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(n * n).for_each_init(
            || (vec![Complex64::new(0.0, 0.0); scratch_len], vec![Complex64::new(0.0, 0.0); n * n]),
            |(s, t), slab| {
                plan.process_with_scratch(slab, s);
                transpose_square(slab, t, n);
                plan.process_with_scratch(slab, s);
                transpose_square(slab, t, n);
            },
        );
        // outer axis: gather blocks of columns
        let block = n;
        for j in 0..n {
            for l0 in (0..n).step_by(block) {
                let w = block.min(n - l0);
                for i in 0..n {
                    let base = (i * n + j) * n + l0;
                    for b in 0..w {
                        lines[b * n + i] = data[base + b];
                    }
                }
                plan.process_with_scratch(&mut lines[..w * n], fft_scratch);
                for i in 0..n {
                    let base = (i * n + j) * n + l0;
                    for b in 0..w {
                        data[base + b] = lines[b * n + i];
                    }
                }
            }
        }
    }
}

fn transpose_square(a: &mut [Complex64], tmp: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            tmp[c * n + r] = a[r * n + c];
        }
    }
    a.copy_from_slice(&tmp[..n * n]);
}

/// Spectral gradient component `∂_axis f ↔ −i k_axis f̂`, Nyquist plane zeroed.
pub fn gradient_spectral(grid: &SpectralGrid, fh: &[Complex64], axis: usize) -> Vec<Complex64> {
    let n = grid.n();
    let mut out = vec![Complex64::new(0.0, 0.0); fh.len()];
    for (idx, (o, &v)) in out.iter_mut().zip(fh).enumerate() {
        let (i, j, l) = grid.unflatten(idx);
        let a = [i, j, l][axis];
        if a == n / 2 {
            continue;
        }
        let k = grid.wavenumber(a);
        *o = Complex64::new(0.0, -k) * v;
    }
    out
}
