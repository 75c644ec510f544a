//! Linearization at a stationary state `S_{q*}`: the generator `A`, the
//! quadratic energy `𝓗₀`, split-step time integration, the Duhamel
//! reconstruction of the field, and decay measurement.
//!
//! With `Z = (Ψ, Π, Q, P)` and `K = d²V(q*) + ω₁²E`:
//! `Ψ̇ = Π`, `Π̇ = ΔΨ + Q·∇ρ(· − q*)`, `Q̇ = P`, `Ṗ = −⟨∇Ψ, ρ(· − q*)⟩ − K Q`.

use std::io::Write;

use nalgebra::Matrix3;

use crate::coupling::GridCharge;
use crate::error::{Error, Result};
use crate::field::{FieldPair, GridOps, SpectralPair, C64, ZERO};
use crate::fit::DecayFit;
use crate::free_wave::{evolve_free_spectral, free_energy_spectral, CausalWindow, ShellRotation, FIT_START};
use crate::norms::{energy_norm_spectral, state_norm_e_alpha_spectral};
use crate::particle::{HarmonicFlow, Scheme};
use crate::potential::ExternalPotential;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedState {
    /// Coefficients of `(Ψ, Π)`.
    pub fields: SpectralPair,
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub time: f64,
}

impl LinearizedState {
    pub fn zeros(len: usize) -> Self {
        LinearizedState {
            fields: SpectralPair::zeros(len),
            q: [0.0; 3],
            p: [0.0; 3],
            time: 0.0,
        }
    }

    pub fn from_real(ops: &GridOps, fields: &FieldPair, q: [f64; 3], p: [f64; 3]) -> Self {
        LinearizedState {
            fields: ops.pair_to_spectral(fields),
            q,
            p,
            time: 0.0,
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &LinearizedState, b: f64) -> Self {
        let mix = |x: &[C64], y: &[C64]| x.iter().zip(y).map(|(u, v)| u * a + v * b).collect();
        LinearizedState {
            fields: SpectralPair {
                psi: mix(&self.fields.psi, &other.fields.psi),
                pi: mix(&self.fields.pi, &other.fields.pi),
            },
            q: [0, 1, 2].map(|i| a * self.q[i] + b * other.q[i]),
            p: [0, 1, 2].map(|i| a * self.p[i] + b * other.p[i]),
            time: self.time,
        }
    }

    /// `‖Z‖_{𝓔_α}`.
    pub fn norm_e_alpha(&self, ops: &GridOps, alpha: f64) -> f64 {
        state_norm_e_alpha_spectral(ops, &self.fields, self.q, self.p, alpha)
    }
}

/// Linearized dynamics at `q*` on one grid.
#[derive(Debug)]
pub struct LinearizedSystem<'a> {
    ops: &'a GridOps,
    charge: GridCharge,
    flow: HarmonicFlow,
    /// `−i k_a e^{ik·q*} ρ̂`, the coefficients of `∂_a ρ(· − q*)`.
    grad_rho: [Vec<C64>; 3],
}

impl<'a> LinearizedSystem<'a> {
    /// `K = d²V(q*) + ω₁²E` with the gridded `ω₁²`; `q*` must be a stable
    /// critical point.
    pub fn new(ops: &'a GridOps, charge: GridCharge, potential: &ExternalPotential) -> Result<Self> {
        let q_star = charge.q_star();
        if !potential.is_stable_point(q_star)? {
            return Err(Error::InvalidArgument(format!("q* = {q_star:?} is not a stable critical point")));
        }
        let k = potential.hessian(q_star) + Matrix3::identity() * charge.omega1_sq();
        Self::with_stiffness(ops, charge, k)
    }

    pub fn with_stiffness(ops: &'a GridOps, charge: GridCharge, stiffness: Matrix3<f64>) -> Result<Self> {
        let flow = HarmonicFlow::new(stiffness)?;
        let q_star = charge.q_star();
        let grad_rho = [0, 1, 2].map(|a| charge.grad_shifted(ops, q_star, a));
        Ok(LinearizedSystem {
            ops,
            charge,
            flow,
            grad_rho,
        })
    }

    pub fn ops(&self) -> &GridOps {
        self.ops
    }

    pub fn charge(&self) -> &GridCharge {
        &self.charge
    }

    pub fn flow(&self) -> &HarmonicFlow {
        &self.flow
    }

    /// `⟨Ψ, ∇ρ(· − q*)⟩`.
    pub fn pairing_psi_grad_rho(&self, psi: &[C64]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.ops.inner_spectral(psi, &self.grad_rho[a]))
    }

    /// `⟨∇Ψ, ρ(· − q*)⟩` with the spectral gradient of `Ψ`.
    pub fn pairing_grad_psi_rho(&self, psi: &[C64]) -> [f64; 3] {
        let g = self.ops.grid();
        let rho = self.charge.shifted(self.ops, self.charge.q_star());
        [0, 1, 2].map(|a| {
            let d = crate::grid::gradient_spectral(g, psi, a);
            self.ops.inner_spectral(&d, &rho)
        })
    }

    /// `A Z`.
    pub fn apply_a(&self, z: &LinearizedState) -> LinearizedState {
        let g = self.ops.grid();
        let mut out = LinearizedState::zeros(g.len());
        out.time = z.time;
        out.fields.psi.clone_from(&z.fields.pi);
        for (idx, (o, psi)) in out.fields.pi.iter_mut().zip(&z.fields.psi).enumerate() {
            let k = g.shell_wavenumber(self.ops.shell_of()[idx] as usize);
            let mut v = -psi * (k * k);
            for a in 0..3 {
                v += self.grad_rho[a][idx] * z.q[a];
            }
            *o = v;
        }
        out.q = z.p;
        let pair = self.pairing_grad_psi_rho(&z.fields.psi);
        let kq = self.flow.apply(z.q);
        out.p = [0, 1, 2].map(|a| -pair[a] - kq[a]);
        out
    }

    /// `𝓗₀(Z) = ½(|P|² + Q·KQ + ∫(|Π|² + |∇Ψ|² − 2Ψ∇ρ·Q))`.
    pub fn energy(&self, z: &LinearizedState) -> f64 {
        let field = free_energy_spectral(self.ops, &z.fields);
        let pair = self.pairing_psi_grad_rho(&z.fields.psi);
        let coupling: f64 = (0..3).map(|a| pair[a] * z.q[a]).sum();
        let kin: f64 = z.p.iter().map(|v| v * v).sum();
        0.5 * (kin + field - 2.0 * coupling) + self.flow.potential(z.q)
    }

    /// Integrates `Ż = AZ` by kick–rotate–kick steps and calls `observer` on
    /// the initial state and after every `sample_every` steps.
    pub fn evolve<F: FnMut(&LinearizedState)>(
        &self,
        z0: &LinearizedState,
        t_final: f64,
        dt: f64,
        sample_every: usize,
        observer: F,
    ) -> Result<LinearizedState> {
        self.evolve_with(Scheme::Strang, z0, t_final, dt, sample_every, observer)
    }

    /// [`LinearizedSystem::evolve`] with a chosen composition scheme.
    pub fn evolve_with<F: FnMut(&LinearizedState)>(
        &self,
        scheme: Scheme,
        z0: &LinearizedState,
        t_final: f64,
        dt: f64,
        sample_every: usize,
        mut observer: F,
    ) -> Result<LinearizedState> {
        self.flow.check_step(dt * scheme.max_fraction())?;
        let steps = step_count(t_final, dt)?;
        let sample_every = sample_every.max(1);
        let (rot_frac, kick_frac) = scheme.stages();
        let m = rot_frac.len();
        let rots: Vec<ShellRotation> = rot_frac.iter().map(|c| ShellRotation::new(self.ops, c * dt)).collect();
        let mut z = z0.clone();
        observer(&z);
        if steps == 0 {
            return Ok(z);
        }
        let first = kick_frac[0] * dt;
        let f = self.charge.linear_sweep(self.ops, &mut z.fields, None, z.q, first);
        kick(&mut z.p, f, first);
        for n in 1..=steps {
            let sync = n % sample_every == 0 || n == steps;
            let mut f = [0.0; 3];
            for i in 0..m {
                self.flow.rotate(&mut z.q, &mut z.p, rot_frac[i] * dt);
                let w = if i + 1 < m || sync {
                    kick_frac[i + 1] * dt
                } else {
                    (kick_frac[m] + kick_frac[0]) * dt
                };
                f = self.charge.linear_sweep(self.ops, &mut z.fields, Some(&rots[i]), z.q, w);
                kick(&mut z.p, f, w);
            }
            z.time = z0.time + n as f64 * dt;
            if sync {
                if n % sample_every == 0 {
                    observer(&z);
                }
                if n < steps {
                    kick(&mut z.p, f, first);
                    let _ = self.charge.linear_sweep(self.ops, &mut z.fields, None, z.q, first);
                }
            }
        }
        Ok(z)
    }

    /// Runs [`LinearizedSystem::evolve`] and records `t, Q, P, 𝓗₀` and, when
    /// `sigma` is given, `‖Z‖_{𝓔_{−σ}}` at every sample.
    pub fn trajectory(
        &self,
        z0: &LinearizedState,
        t_final: f64,
        dt: f64,
        sample_every: usize,
        sigma: Option<f64>,
    ) -> Result<(LinearTrajectory, LinearizedState)> {
        let mut tr = LinearTrajectory::default();
        let last = self.evolve(z0, t_final, dt, sample_every, |z| {
            tr.times.push(z.time);
            tr.q.push(z.q);
            tr.p.push(z.p);
            tr.energy.push(self.energy(z));
            if let Some(s) = sigma {
                tr.e_norm.push(z.norm_e_alpha(self.ops, -s));
            }
        })?;
        Ok((tr, last))
    }

    /// Field part of the Duhamel formula
    /// `W₀(t)F₀ + ∫₀ᵗ W₀(t−s)[0, Q(s)·∇ρ(· − q*)] ds` at `t = times[last]`,
    /// composite trapezoid on the uniform samples `(times, q)`.
    pub fn duhamel_field(&self, f0: &SpectralPair, times: &[f64], q: &[[f64; 3]]) -> Result<SpectralPair> {
        if times.len() != q.len() || times.is_empty() {
            return Err(Error::InvalidArgument("Duhamel samples need equal, nonzero lengths".into()));
        }
        let t = *times.last().expect("non-empty");
        let t0 = times[0];
        let ds = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        for (i, &s) in times.iter().enumerate() {
            if (s - (t0 + i as f64 * ds)).abs() > 1e-9 * (1.0 + s.abs()) {
                return Err(Error::InvalidArgument("Duhamel samples must be uniform in time".into()));
            }
        }
        let mut out = f0.clone();
        evolve_free_spectral(self.ops, &mut out, t - t0);
        if times.len() == 1 {
            return Ok(out);
        }
        let g = self.ops.grid();
        let m = g.shell_count();
        // per shell: S_a = ∫Q_a sin(κ(t−s))/κ ds, C_a = ∫Q_a cos(κ(t−s)) ds
        let mut sin_part = vec![[0.0; 3]; m];
        let mut cos_part = vec![[0.0; 3]; m];
        let last = times.len() - 1;
        for sh in 0..m {
            let k = g.shell_wavenumber(sh);
            let mut sp = [0.0; 3];
            let mut cp = [0.0; 3];
            for (i, (&s, qs)) in times.iter().zip(q).enumerate() {
                let w = if i == 0 || i == last { 0.5 * ds } else { ds };
                let tau = t - s;
                let (sn, cs) = (k * tau).sin_cos();
                let sk = if sh == 0 { tau } else { sn / k };
                for a in 0..3 {
                    sp[a] += w * qs[a] * sk;
                    cp[a] += w * qs[a] * cs;
                }
            }
            sin_part[sh] = sp;
            cos_part[sh] = cp;
        }
        for (idx, &sh) in self.ops.shell_of().iter().enumerate() {
            let sh = sh as usize;
            let mut dpsi = ZERO;
            let mut dpi = ZERO;
            for a in 0..3 {
                dpsi += self.grad_rho[a][idx] * sin_part[sh][a];
                dpi += self.grad_rho[a][idx] * cos_part[sh][a];
            }
            out.psi[idx] += dpsi;
            out.pi[idx] += dpi;
        }
        Ok(out)
    }

    /// Integrates from `z0` inside the causal window and fits the decay of
    /// `|Q| + |P|` and of `‖Z‖_{𝓔_{−σ}}` on `[FIT_START, t_final]`.
    pub fn verify_decay(
        &self,
        z0: &LinearizedState,
        sigma: f64,
        t_final: f64,
        dt: f64,
        sample_every: usize,
        window: CausalWindow,
    ) -> Result<LinearDecayReport> {
        if !(sigma > 1.0) {
            return Err(Error::InvalidArgument(format!("sigma must exceed 1, got {sigma}")));
        }
        window.check(t_final)?;
        let (tr, _) = self.trajectory(z0, t_final, dt, sample_every, Some(sigma))?;
        let qp: Vec<f64> = tr.q.iter().zip(&tr.p).map(|(q, p)| norm3(*q) + norm3(*p)).collect();
        let particle_fit = DecayFit::fit(&tr.times, &qp, FIT_START, t_final)?;
        let state_fit = DecayFit::fit(&tr.times, &tr.e_norm, FIT_START, t_final)?;
        Ok(LinearDecayReport {
            sigma,
            trajectory: tr,
            particle_fit,
            state_fit,
        })
    }
}

/// `‖F‖_{𝓕₀}` of a coefficient pair, the energy norm.
pub fn f0_norm(ops: &GridOps, f: &SpectralPair) -> f64 {
    energy_norm_spectral(ops, f)
}

fn kick(p: &mut [f64; 3], f: [f64; 3], w: f64) {
    for a in 0..3 {
        p[a] += w * f[a];
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Number of steps of size `dt` covering `t_final`; the two must agree to
/// within `10⁻⁹` of a step.
pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    let r = t_final / dt;
    if !(r >= -1e-9) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_final = {t_final} and dt = {dt} must share a sign"
        )));
    }
    let n = r.round();
    if (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "t_final = {t_final} is not a whole number of steps of {dt}"
        )));
    }
    Ok(n as usize)
}

/// Sampled `(Q, P)`, `𝓗₀` and optionally `‖Z‖_{𝓔_{−σ}}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearTrajectory {
    pub times: Vec<f64>,
    pub q: Vec<[f64; 3]>,
    pub p: Vec<[f64; 3]>,
    pub energy: Vec<f64>,
    pub e_norm: Vec<f64>,
}

impl LinearTrajectory {
    /// Largest `|𝓗₀(t) − 𝓗₀(0)| / |𝓗₀(0)|`.
    pub fn energy_drift(&self) -> f64 {
        relative_drift(&self.energy)
    }

    /// CSV with columns `t,Q1,Q2,Q3,P1,P2,P3,E_minus_sigma_norm,H0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,Q1,Q2,Q3,P1,P2,P3,E_minus_sigma_norm,H0")?;
        for i in 0..self.times.len() {
            let e = self.e_norm.get(i).copied().unwrap_or(f64::NAN);
            let (q, p) = (self.q[i], self.p[i]);
            writeln!(
                out,
                "{:.10},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i], q[0], q[1], q[2], p[0], p[1], p[2], e, self.energy[i]
            )?;
        }
        Ok(())
    }
}

pub(crate) fn relative_drift(series: &[f64]) -> f64 {
    let Some(&e0) = series.first() else {
        return 0.0;
    };
    let dev = series.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    if e0 == 0.0 {
        dev
    } else {
        dev / e0.abs()
    }
}

#[derive(Debug, Clone)]
pub struct LinearDecayReport {
    pub sigma: f64,
    pub trajectory: LinearTrajectory,
    /// Fit of `|Q(t)| + |P(t)|`.
    pub particle_fit: DecayFit,
    /// Fit of `‖Z(t)‖_{𝓔_{−σ}}`.
    pub state_fit: DecayFit,
}
