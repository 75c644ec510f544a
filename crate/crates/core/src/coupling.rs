//! The charge on the spectral grid: shifted densities `ρ(x − q)` realized by
//! the phase `e^{ik·q}ρ̂(k)`, the periodic stationary field, and the fused
//! mode loops used by the split-step integrators.
//!
//! The gridded charge is the continuum transform `ρ̂(|k|)` sampled on the
//! wavenumber lattice, with every mode on a Nyquist plane set to zero.

use std::f64::consts::PI;

use crate::charge::ChargeDensity;
use crate::field::{GridOps, SpectralPair, C64, ZERO};
use crate::free_wave::ShellRotation;

#[derive(Debug, Clone)]
pub struct GridCharge {
    /// `ρ̂` per shell label.
    rho_shell: Vec<f64>,
    /// Periodic stationary field `ŝ = −ρ̂/|k|²` per shell, zero mean.
    s_shell: Vec<f64>,
    /// Per-axis wavenumbers, zero on the Nyquist index.
    k_axis: Vec<f64>,
    q_star: [f64; 3],
    omega1_sq: f64,
    self_pairing: f64,
    volume: f64,
    n: usize,
}

impl GridCharge {
    pub fn new(ops: &GridOps, rho: &ChargeDensity, q_star: [f64; 3]) -> Self {
        let g = ops.grid();
        let m = g.shell_count();
        let mut rho_shell = vec![0.0; m];
        let mut s_shell = vec![0.0; m];
        for s in 0..m {
            let k = g.shell_wavenumber(s);
            rho_shell[s] = rho.rho_hat(k);
            if s > 0 {
                s_shell[s] = -rho_shell[s] / (k * k);
            }
        }
        let n = g.n();
        let k_axis: Vec<f64> = (0..n)
            .map(|j| if g.is_nyquist(j) { 0.0 } else { g.wavenumber(j) })
            .collect();
        let mut gc = GridCharge {
            rho_shell,
            s_shell,
            k_axis,
            q_star,
            omega1_sq: 0.0,
            self_pairing: 0.0,
            volume: g.volume(),
            n,
        };
        let (mut w1, mut sp) = (0.0, 0.0);
        gc.for_coupled_modes(ops, |_, s, _| {
            let r = gc.rho_shell[s];
            if s > 0 {
                w1 += r * r / 3.0;
                sp += gc.s_shell[s] * r;
            }
        });
        gc.omega1_sq = w1 / gc.volume;
        gc.self_pairing = sp / gc.volume;
        gc
    }

    pub fn q_star(&self) -> [f64; 3] {
        self.q_star
    }

    /// `ω₁²` of the gridded charge, `Vol⁻¹ Σ_{k≠0} k₁²ρ̂²/|k|²`.
    pub fn omega1_sq(&self) -> f64 {
        self.omega1_sq
    }

    /// `(ρ, s_T)` of the gridded charge, `Vol⁻¹ Σ_{k≠0} ŝρ̂`.
    pub fn self_pairing(&self) -> f64 {
        self.self_pairing
    }

    pub fn rho_shell(&self) -> &[f64] {
        &self.rho_shell
    }

    /// Visits every mode off the Nyquist planes: `(flat index, shell, [i, j, l])`.
    fn for_coupled_modes<F: FnMut(usize, usize, [usize; 3])>(&self, ops: &GridOps, mut f: F) {
        let n = self.n;
        let shells = ops.shell_of();
        for i in 0..n {
            if i == n / 2 {
                continue;
            }
            for j in 0..n {
                if j == n / 2 {
                    continue;
                }
                let row = (i * n + j) * n;
                for l in 0..n {
                    if l == n / 2 {
                        continue;
                    }
                    f(row + l, shells[row + l] as usize, [i, j, l]);
                }
            }
        }
    }

    fn axis_phases(&self, q: [f64; 3]) -> [Vec<C64>; 3] {
        [0, 1, 2].map(|a| self.k_axis.iter().map(|&k| C64::from_polar(1.0, k * q[a])).collect())
    }

    /// `e^{ik·q}ρ̂`, the coefficients of `ρ(x − q)`.
    pub fn shifted(&self, ops: &GridOps, q: [f64; 3]) -> Vec<C64> {
        let ph = self.axis_phases(q);
        let mut out = vec![ZERO; ops.grid().len()];
        self.for_coupled_modes(ops, |idx, s, [i, j, l]| {
            out[idx] = ph[0][i] * ph[1][j] * ph[2][l] * self.rho_shell[s];
        });
        out
    }

    /// `−i k_axis e^{ik·q}ρ̂`, the coefficients of `∂_axis ρ(x − q)`.
    pub fn grad_shifted(&self, ops: &GridOps, q: [f64; 3], axis: usize) -> Vec<C64> {
        let ph = self.axis_phases(q);
        let mut out = vec![ZERO; ops.grid().len()];
        self.for_coupled_modes(ops, |idx, s, ijl| {
            let k = self.k_axis[ijl[axis]];
            out[idx] = ph[0][ijl[0]] * ph[1][ijl[1]] * ph[2][ijl[2]] * C64::new(0.0, -k * self.rho_shell[s]);
        });
        out
    }

    /// `ŝ e^{ik·q}`, the periodic stationary field centered at `q`.
    pub fn stationary(&self, ops: &GridOps, q: [f64; 3]) -> Vec<C64> {
        let ph = self.axis_phases(q);
        let mut out = vec![ZERO; ops.grid().len()];
        self.for_coupled_modes(ops, |idx, s, [i, j, l]| {
            out[idx] = ph[0][i] * ph[1][j] * ph[2][l] * self.s_shell[s];
        });
        out
    }

    /// `∫ f ∇ρ(x − q) dx` for a real field `f` given by coefficients.
    pub fn pairing_with_gradient(&self, ops: &GridOps, fh: &[C64], q: [f64; 3]) -> [f64; 3] {
        let ph = self.axis_phases(q);
        let mut acc = [0.0; 3];
        self.for_coupled_modes(ops, |idx, s, [i, j, l]| {
            let z = fh[idx] * (ph[0][i] * ph[1][j] * ph[2][l]).conj() * self.rho_shell[s];
            acc[0] -= self.k_axis[i] * z.im;
            acc[1] -= self.k_axis[j] * z.im;
            acc[2] -= self.k_axis[l] * z.im;
        });
        acc.map(|a| a / self.volume)
    }

    /// `W(d) = Vol⁻¹ Σ ŝρ̂ cos(k·d)`, interaction energy of the periodic
    /// stationary field centered at `q*` with the charge at `q* + d`.
    pub fn static_energy(&self, ops: &GridOps, d: [f64; 3]) -> f64 {
        let ph = self.axis_phases(d);
        let mut acc = 0.0;
        self.for_coupled_modes(ops, |_, s, [i, j, l]| {
            acc += self.s_shell[s] * self.rho_shell[s] * (ph[0][i] * ph[1][j] * ph[2][l]).re;
        });
        acc / self.volume
    }

    /// `−∇W(d)`.
    pub fn static_force(&self, ops: &GridOps, d: [f64; 3]) -> [f64; 3] {
        let ph = self.axis_phases(d);
        let mut acc = [0.0; 3];
        self.for_coupled_modes(ops, |_, s, [i, j, l]| {
            let sn = (ph[0][i] * ph[1][j] * ph[2][l]).im * self.s_shell[s] * self.rho_shell[s];
            acc[0] += self.k_axis[i] * sn;
            acc[1] += self.k_axis[j] * sn;
            acc[2] += self.k_axis[l] * sn;
        });
        acc.map(|a| a / self.volume)
    }

    /// `∫ψ(ρ(· − q) − ρ(· − q*)) + W(q − q*) − W(0)`, the interaction part of
    /// the energy in deviation variables.
    pub fn interaction_energy(&self, ops: &GridOps, psi: &[C64], q: [f64; 3]) -> f64 {
        let pq = self.axis_phases(q);
        let ps = self.axis_phases(self.q_star);
        let d = [0, 1, 2].map(|a| q[a] - self.q_star[a]);
        let pd = self.axis_phases(d);
        let mut acc = 0.0;
        self.for_coupled_modes(ops, |idx, s, [i, j, l]| {
            let e_q = pq[0][i] * pq[1][j] * pq[2][l];
            let e_s = ps[0][i] * ps[1][j] * ps[2][l];
            let r = self.rho_shell[s];
            acc += (psi[idx] * (e_q - e_s).conj()).re * r;
            acc += self.s_shell[s] * r * ((pd[0][i] * pd[1][j] * pd[2][l]).re - 1.0);
        });
        acc / self.volume
    }

    /// One fused sweep for the nonlinear system: optionally rotate every mode
    /// by the free flow, then kick `π̂ += w (e^{ik·q*} − e^{ik·q}) ρ̂`, and
    /// return `∫ φ ∇ρ(x − q)` with `φ = ψ + s_T(· − q*)` after the rotation.
    pub fn nonlinear_sweep(
        &self,
        ops: &GridOps,
        f: &mut SpectralPair,
        rot: Option<&ShellRotation>,
        q: [f64; 3],
        w: f64,
    ) -> [f64; 3] {
        let n = self.n;
        let shells = ops.shell_of();
        let pq = self.axis_phases(q);
        let ps = self.axis_phases(self.q_star);
        let mut acc = [0.0; 3];
        for i in 0..n {
            for j in 0..n {
                let row = (i * n + j) * n;
                let psi = &mut f.psi[row..row + n];
                let pi = &mut f.pi[row..row + n];
                let sh = &shells[row..row + n];
                if let Some(r) = rot {
                    for l in 0..n {
                        let s = sh[l] as usize;
                        let (a, b) = (psi[l], pi[l]);
                        psi[l] = a * r.cos[s] + b * r.sin_over_k[s];
                        pi[l] = b * r.cos[s] - a * r.k_sin[s];
                    }
                }
                if i == n / 2 || j == n / 2 {
                    continue;
                }
                let eq = pq[0][i] * pq[1][j];
                let es = ps[0][i] * ps[1][j];
                let mut row_acc = [0.0; 3];
                for l in 0..n {
                    if l == n / 2 {
                        continue;
                    }
                    let s = sh[l] as usize;
                    let rh = self.rho_shell[s];
                    let e_q = eq * pq[2][l];
                    let e_s = es * ps[2][l];
                    if w != 0.0 {
                        pi[l] += (e_s - e_q) * (w * rh);
                    }
                    let z = (psi[l] + e_s * self.s_shell[s]) * e_q.conj() * rh;
                    row_acc[2] -= self.k_axis[l] * z.im;
                    row_acc[0] -= z.im;
                }
                acc[0] += self.k_axis[i] * row_acc[0];
                acc[1] += self.k_axis[j] * row_acc[0];
                acc[2] += row_acc[2];
            }
        }
        acc.map(|a| a / self.volume)
    }

    /// One fused sweep for the linearized system: optionally rotate, then kick
    /// `Π̂ += w (Q·(−ik)) e^{ik·q*} ρ̂`, and return `∫ Ψ ∇ρ(x − q*)`.
    pub fn linear_sweep(
        &self,
        ops: &GridOps,
        f: &mut SpectralPair,
        rot: Option<&ShellRotation>,
        big_q: [f64; 3],
        w: f64,
    ) -> [f64; 3] {
        let n = self.n;
        let shells = ops.shell_of();
        let ps = self.axis_phases(self.q_star);
        let mut acc = [0.0; 3];
        for i in 0..n {
            for j in 0..n {
                let row = (i * n + j) * n;
                let psi = &mut f.psi[row..row + n];
                let pi = &mut f.pi[row..row + n];
                let sh = &shells[row..row + n];
                if let Some(r) = rot {
                    for l in 0..n {
                        let s = sh[l] as usize;
                        let (a, b) = (psi[l], pi[l]);
                        psi[l] = a * r.cos[s] + b * r.sin_over_k[s];
                        pi[l] = b * r.cos[s] - a * r.k_sin[s];
                    }
                }
                if i == n / 2 || j == n / 2 {
                    continue;
                }
                let es = ps[0][i] * ps[1][j];
                let kq_ij = self.k_axis[i] * big_q[0] + self.k_axis[j] * big_q[1];
                let mut row_acc = [0.0; 3];
                for l in 0..n {
                    if l == n / 2 {
                        continue;
                    }
                    let s = sh[l] as usize;
                    let rh = self.rho_shell[s];
                    let e_s = es * ps[2][l];
                    if w != 0.0 {
                        let kq = kq_ij + self.k_axis[l] * big_q[2];
                        pi[l] += e_s * C64::new(0.0, -w * kq * rh);
                    }
                    let z = psi[l] * e_s.conj() * rh;
                    row_acc[2] -= self.k_axis[l] * z.im;
                    row_acc[0] -= z.im;
                }
                acc[0] += self.k_axis[i] * row_acc[0];
                acc[1] += self.k_axis[j] * row_acc[0];
                acc[2] += row_acc[2];
            }
        }
        acc.map(|a| a / self.volume)
    }
}

/// Spectral-resolution figure of the gridded charge: the fraction of
/// `‖ρ‖²_{L²}` carried by wavenumbers inside the Nyquist ball `|k| < π/h`.
pub fn resolved_fraction(rho: &ChargeDensity, h: f64) -> crate::Result<f64> {
    let total = rho.spectral_integral(|k| {
        let r = rho.rho_hat(k);
        k * k * r * r
    })?;
    let inside = rho.spectral_integral_to(
        |k| {
            let r = rho.rho_hat(k);
            k * k * r * r
        },
        PI / h,
    )?;
    Ok(if total > 0.0 { inside / total } else { 1.0 })
}
