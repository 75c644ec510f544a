//! Free wave group `W₀(t)` on the periodic grid, its radial closed-form
//! counterpart, and dispersive-decay measurement.

use crate::error::{Error, Result};
use crate::field::{FieldPair, GridOps, SpectralPair};
use crate::fit::DecayFit;
use crate::norms::field_norm_f_alpha_spectral;

/// Decay fits start here, past the initial transient.
pub const FIT_START: f64 = 5.0;

/// Per-shell coefficients of the exact mode rotation over a time `t`:
/// `ψ̂' = c ψ̂ + (s/κ) π̂`, `π̂' = −κ s ψ̂ + c π̂`.
#[derive(Debug, Clone)]
pub struct ShellRotation {
    pub t: f64,
    pub cos: Vec<f64>,
    pub sin_over_k: Vec<f64>,
    pub k_sin: Vec<f64>,
}

impl ShellRotation {
    pub fn new(ops: &GridOps, t: f64) -> Self {
        let g = ops.grid();
        let m = g.shell_count();
        let mut cos = vec![1.0; m];
        let mut sin_over_k = vec![t; m];
        let mut k_sin = vec![0.0; m];
        for s in 1..m {
            let k = g.shell_wavenumber(s);
            let (sn, cs) = (k * t).sin_cos();
            cos[s] = cs;
            sin_over_k[s] = sn / k;
            k_sin[s] = k * sn;
        }
        ShellRotation {
            t,
            cos,
            sin_over_k,
            k_sin,
        }
    }

    pub fn apply(&self, ops: &GridOps, f: &mut SpectralPair) {
        for ((psi, pi), &s) in f.psi.iter_mut().zip(f.pi.iter_mut()).zip(ops.shell_of()) {
            let s = s as usize;
            let (a, b) = (*psi, *pi);
            *psi = a * self.cos[s] + b * self.sin_over_k[s];
            *pi = b * self.cos[s] - a * self.k_sin[s];
        }
    }
}

/// `W₀(t)` on coefficients, in place. Any real `t`.
pub fn evolve_free_spectral(ops: &GridOps, f: &mut SpectralPair, t: f64) {
    if t == 0.0 {
        return;
    }
    ShellRotation::new(ops, t).apply(ops, f);
}

/// `W₀(t) F₀` for real-space data.
pub fn evolve_free(ops: &GridOps, f0: &FieldPair, t: f64) -> FieldPair {
    if t == 0.0 {
        return f0.clone();
    }
    let mut fh = ops.pair_to_spectral(f0);
    evolve_free_spectral(ops, &mut fh, t);
    ops.pair_to_real(&fh)
}

/// `‖∇ψ‖² + ‖π‖²` with the propagator's `|k|`, conserved exactly by
/// [`evolve_free_spectral`].
pub fn free_energy_spectral(ops: &GridOps, f: &SpectralPair) -> f64 {
    let g = ops.grid();
    let mut s = 0.0;
    for ((psi, pi), &sh) in f.psi.iter().zip(&f.pi).zip(ops.shell_of()) {
        let k2 = g.shell_wavenumber(sh as usize).powi(2);
        s += k2 * psi.norm_sqr() + pi.norm_sqr();
    }
    s / g.volume()
}

/// Radial solution of the free wave equation with data `(ψ₀(|x|), 0)`:
/// `u(r,t) = [(r+t)ψ̄₀(r+t) + (r−t)ψ̄₀(r−t)]/(2r)`, `ψ̄₀` the even extension.
pub fn radial_wave_solution<F: Fn(f64) -> f64>(psi0: F, r: f64, t: f64) -> f64 {
    let g = |s: f64| s * psi0(s.abs());
    if r < 1e-5 {
        // limit r → 0: d/ds [s ψ̄₀(s)] at s = t
        let d = 1e-5;
        return (g(t + d) - g(t - d)) / (2.0 * d);
    }
    (g(r + t) + g(r - t)) / (2.0 * r)
}

/// Time span during which the periodic solution equals the whole-space one
/// at the observed points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CausalWindow {
    pub half_length: f64,
    pub r_data: f64,
    pub r_obs: f64,
}

impl CausalWindow {
    pub fn new(half_length: f64, r_data: f64, r_obs: f64) -> Self {
        CausalWindow {
            half_length,
            r_data,
            r_obs,
        }
    }

    /// `T_window = L − R_data − R_obs`.
    pub fn t_window(&self) -> f64 {
        self.half_length - self.r_data - self.r_obs
    }

    pub fn check(&self, t: f64) -> Result<()> {
        let w = self.t_window();
        if t.abs() > w {
            return Err(Error::CausalWindow { time: t, window: w });
        }
        Ok(())
    }
}

/// Samples `‖W₀(t)F₀‖_{𝓕_{−σ}}` at `times` and fits the decay on
/// `[FIT_START, max(times)]`.
pub fn measure_dispersive_decay(
    ops: &GridOps,
    f0: &FieldPair,
    sigma: f64,
    times: &[f64],
    window: CausalWindow,
) -> Result<DecayFit> {
    if !(sigma > 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must exceed 1, got {sigma}")));
    }
    for &t in times {
        window.check(t)?;
    }
    let fh0 = ops.pair_to_spectral(f0);
    let values: Vec<f64> = times
        .iter()
        .map(|&t| {
            let mut fh = fh0.clone();
            evolve_free_spectral(ops, &mut fh, t);
            field_norm_f_alpha_spectral(ops, &fh, -sigma)
        })
        .collect();
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    DecayFit::fit(times, &values, FIT_START, t_max)
}
