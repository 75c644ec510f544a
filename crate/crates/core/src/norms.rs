//! Weighted norms `L²_α`, `Ḣ¹_α`, `𝓕_α`, `𝓔_α` with weight `(1+|x|)^α`,
//! `|x|` measured in the fundamental cell.
//!
//! `‖ψ‖_{Ḣ¹_α} = ‖∇((1+|x|)^α ψ)‖_{L²}`: the weight is applied before
//! differentiating. The gradient of the weighted field is assembled by the
//! product rule `w∇ψ + ψ∇w` with the spectral `∇ψ` and the analytic `∇w`.

use crate::field::{FieldPair, GridOps, SpectralPair, C64};
use crate::grid::gradient_spectral;

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `‖(1+|x|)^α f‖_{L²}` as an `h³`-weighted Riemann sum.
pub fn l2_alpha_norm(ops: &GridOps, f: &[f64], alpha: f64) -> f64 {
    let w = ops.weight(alpha);
    let s: f64 = f.iter().zip(&w.w).map(|(v, w)| (v * w) * (v * w)).sum();
    (s * ops.grid().cell_volume()).sqrt()
}

/// `‖∇((1+|x|)^α f)‖_{L²}` for a real-space field.
pub fn h1dot_alpha_norm(ops: &GridOps, f: &[f64], alpha: f64) -> f64 {
    let fh = ops.to_spectral(f);
    h1dot_weighted(ops, f, &fh, alpha)
}

/// [`h1dot_alpha_norm`] for a field given by its coefficients.
pub fn h1dot_alpha_norm_spectral(ops: &GridOps, fh: &[C64], alpha: f64) -> f64 {
    let f = ops.to_real(fh);
    h1dot_weighted(ops, &f, fh, alpha)
}

fn h1dot_weighted(ops: &GridOps, f: &[f64], fh: &[C64], alpha: f64) -> f64 {
    let grid = ops.grid();
    let w = ops.weight(alpha);
    let g = ops.gradient_real(fh);
    let mut s = 0.0;
    for idx in 0..f.len() {
        let x = grid.point(idx);
        let c = f[idx] * w.dw_over_r[idx];
        let wi = w.w[idx];
        for a in 0..3 {
            let d = wi * g[a][idx] + c * x[a];
            s += d * d;
        }
    }
    // |∇w| → |α| at the origin from every direction
    s += (alpha * f[0]).powi(2);
    (s * grid.cell_volume()).sqrt()
}

/// `‖(1+|x|)^α ∇f‖_{L²}`: differentiate, then weight.
pub fn grad_l2_alpha_norm_spectral(ops: &GridOps, fh: &[C64], alpha: f64) -> f64 {
    let w = ops.weight(alpha);
    let g = ops.gradient_real(fh);
    let mut s = 0.0;
    for idx in 0..w.w.len() {
        let wi = w.w[idx];
        for ga in &g {
            let d = wi * ga[idx];
            s += d * d;
        }
    }
    (s * ops.grid().cell_volume()).sqrt()
}

/// `‖F‖_{𝓕_α} = ‖ψ‖_{Ḣ¹_α} + ‖π‖_{L²_α}`.
pub fn field_norm_f_alpha(ops: &GridOps, f: &FieldPair, alpha: f64) -> f64 {
    h1dot_alpha_norm(ops, &f.psi, alpha) + l2_alpha_norm(ops, &f.pi, alpha)
}

/// [`field_norm_f_alpha`] for coefficients of real fields. Two real fields
/// share each inverse transform.
pub fn field_norm_f_alpha_spectral(ops: &GridOps, f: &SpectralPair, alpha: f64) -> f64 {
    let grid = ops.grid();
    let i = C64::new(0.0, 1.0);
    let mut a: Vec<C64> = f.psi.iter().zip(&f.pi).map(|(u, v)| u + i * v).collect();
    ops.fft().to_real_in_place(&mut a);
    let d0 = gradient_spectral(grid, &f.psi, 0);
    let d1 = gradient_spectral(grid, &f.psi, 1);
    let mut b: Vec<C64> = d0.iter().zip(&d1).map(|(u, v)| u + i * v).collect();
    drop((d0, d1));
    ops.fft().to_real_in_place(&mut b);
    let mut c = gradient_spectral(grid, &f.psi, 2);
    ops.fft().to_real_in_place(&mut c);
    let w = ops.weight(alpha);
    let (mut sg, mut sp) = (0.0, 0.0);
    for idx in 0..a.len() {
        let x = grid.point(idx);
        let wi = w.w[idx];
        let cf = a[idx].re * w.dw_over_r[idx];
        let g = [b[idx].re, b[idx].im, c[idx].re];
        for k in 0..3 {
            let d = wi * g[k] + cf * x[k];
            sg += d * d;
        }
        let v = wi * a[idx].im;
        sp += v * v;
    }
    sg += (alpha * a[0].re).powi(2);
    let h3 = grid.cell_volume();
    (sg * h3).sqrt() + (sp * h3).sqrt()
}

/// `‖Y‖_{𝓔_α} = ‖ψ‖_{Ḣ¹_α} + ‖π‖_{L²_α} + |q| + |p|`.
pub fn state_norm_e_alpha(ops: &GridOps, f: &FieldPair, q: [f64; 3], p: [f64; 3], alpha: f64) -> f64 {
    field_norm_f_alpha(ops, f, alpha) + norm3(q) + norm3(p)
}

/// [`state_norm_e_alpha`] for coefficients.
pub fn state_norm_e_alpha_spectral(
    ops: &GridOps,
    f: &SpectralPair,
    q: [f64; 3],
    p: [f64; 3],
    alpha: f64,
) -> f64 {
    field_norm_f_alpha_spectral(ops, f, alpha) + norm3(q) + norm3(p)
}

/// Closeness measure `‖∇ψ‖_{L²_σ} + ‖π‖_{L²_σ} + |q| + |p|` of a deviation.
pub fn closeness(ops: &GridOps, f: &SpectralPair, q: [f64; 3], p: [f64; 3], sigma: f64) -> f64 {
    let pi = ops.to_real(&f.pi);
    grad_l2_alpha_norm_spectral(ops, &f.psi, sigma) + l2_alpha_norm(ops, &pi, sigma) + norm3(q) + norm3(p)
}

/// Energy norm `‖∇ψ‖ + ‖π‖` of `Ḣ¹ ⊕ L²`, evaluated in Fourier space.
pub fn energy_norm_spectral(ops: &GridOps, f: &SpectralPair) -> f64 {
    ops.grad_sq_spectral(&f.psi).sqrt() + ops.l2_sq_spectral(&f.pi).sqrt()
}
