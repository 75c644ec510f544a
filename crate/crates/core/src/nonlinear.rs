//! The full coupled system on the periodic grid.
//!
//! The field is stored as the deviation `ψ = φ − s_T(· − q*)` from the
//! periodic stationary field of the reference point `q*`, so that
//! `ψ̇ = π`, `π̇ = Δψ + ρ(· − q*) − ρ(· − q)`, `q̇ = p`,
//! `ṗ = −∇V(q) + ∫(ψ + s_T(· − q*))∇ρ(x − q) dx`.
//! The stationary state `S_{q*}` is `ψ = π = 0`, `q = q*`, `p = 0`.

use std::io::Write;

use nalgebra::Matrix3;

use crate::charge::ChargeDensity;
use crate::coupling::GridCharge;
use crate::error::{Error, Result};
use crate::field::{FieldPair, GridOps, SpectralPair, C64, ZERO};
use crate::fit::DecayFit;
use crate::free_wave::{free_energy_spectral, CausalWindow, ShellRotation, FIT_START};
use crate::linear::{relative_drift, step_count, LinearizedState, LinearizedSystem};
use crate::norms::{energy_norm_spectral, l2_alpha_norm, state_norm_e_alpha_spectral};
use crate::particle::{HarmonicFlow, Scheme};
use crate::potential::ExternalPotential;

/// Runs abort once the state norm exceeds this multiple of its initial value.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// Phase point `(ψ, π, q, p)` with `ψ` the deviation field.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub fields: SpectralPair,
    pub q: [f64; 3],
    pub p: [f64; 3],
    pub time: f64,
}

impl SystemState {
    /// `S_{q*}`.
    pub fn stationary(ops: &GridOps, q_star: [f64; 3]) -> Self {
        SystemState {
            fields: SpectralPair::zeros(ops.grid().len()),
            q: q_star,
            p: [0.0; 3],
            time: 0.0,
        }
    }

    /// `S_{q*} + X` for a deviation `X = (ψ, π, d, p)` given in real space.
    pub fn perturbed(ops: &GridOps, q_star: [f64; 3], x: &FieldPair, d: [f64; 3], p: [f64; 3]) -> Self {
        SystemState {
            fields: ops.pair_to_spectral(x),
            q: [0, 1, 2].map(|a| q_star[a] + d[a]),
            p,
            time: 0.0,
        }
    }

    /// `S_{q*} + X` for a deviation `X` given as a linearized state.
    pub fn from_deviation(q_star: [f64; 3], x: &LinearizedState) -> Self {
        SystemState {
            fields: x.fields.clone(),
            q: [0, 1, 2].map(|a| q_star[a] + x.q[a]),
            p: x.p,
            time: x.time,
        }
    }

    /// `q − q*`.
    pub fn displacement(&self, q_star: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.q[a] - q_star[a])
    }

    /// The deviation `X = Y − S_{q*}` as a linearized state.
    pub fn deviation(&self, q_star: [f64; 3]) -> LinearizedState {
        LinearizedState {
            fields: self.fields.clone(),
            q: self.displacement(q_star),
            p: self.p,
            time: self.time,
        }
    }
}

/// Options shared by the nonlinear runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub scheme: Scheme,
    /// Observer cadence in steps.
    pub sample_every: usize,
    /// Keep `q` after every step.
    pub record_positions: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            scheme: Scheme::Strang,
            sample_every: 1,
            record_positions: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub last: SystemState,
    /// `q` at every step boundary, including the initial one, when recorded.
    pub positions: Vec<[f64; 3]>,
    pub steps: usize,
}

/// The nonlinear dynamics around the reference point `q*`.
#[derive(Debug)]
pub struct NonlinearSystem<'a> {
    ops: &'a GridOps,
    charge: GridCharge,
    potential: ExternalPotential,
    flow: HarmonicFlow,
    hessian: Matrix3<f64>,
    /// `½(ρ, Δ⁻¹ρ)` of the continuum charge.
    self_energy: f64,
}

impl<'a> NonlinearSystem<'a> {
    /// `q_star` must be a stable critical point of `potential`.
    pub fn new(ops: &'a GridOps, rho: &ChargeDensity, potential: &ExternalPotential, q_star: [f64; 3]) -> Result<Self> {
        if !potential.is_stable_point(q_star)? {
            return Err(Error::InvalidArgument(format!("q* = {q_star:?} is not a stable critical point")));
        }
        let charge = GridCharge::new(ops, rho, q_star);
        let hessian = potential.hessian(q_star);
        let flow = HarmonicFlow::new(hessian + Matrix3::identity() * charge.omega1_sq())?;
        Ok(NonlinearSystem {
            ops,
            charge,
            potential: potential.clone(),
            flow,
            hessian,
            self_energy: 0.5 * rho.coulomb_self_pairing()?,
        })
    }

    pub fn ops(&self) -> &GridOps {
        self.ops
    }

    pub fn charge(&self) -> &GridCharge {
        &self.charge
    }

    pub fn q_star(&self) -> [f64; 3] {
        self.charge.q_star()
    }

    pub fn potential(&self) -> &ExternalPotential {
        &self.potential
    }

    /// The linearization at `q*` on the same grid.
    pub fn linearization(&self) -> Result<LinearizedSystem<'a>> {
        LinearizedSystem::with_stiffness(self.ops, self.charge.clone(), *self.flow.stiffness())
    }

    /// `V₀ + ½(ρ, Δ⁻¹ρ)`.
    pub fn energy_lower_bound(&self) -> f64 {
        self.potential.lower_bound() + self.self_energy
    }

    /// `𝓗 = ½∫(|π|² + |∇φ|²) + ∫φρ(x − q) + ½|p|² + V(q)`, with the self-energy
    /// of the stationary field taken from the continuum so that
    /// `𝓗(S_{q*}) = V(q*) + ½(ρ, Δ⁻¹ρ)`.
    pub fn total_energy(&self, y: &SystemState) -> f64 {
        let field = 0.5 * free_energy_spectral(self.ops, &y.fields);
        let inter = self.charge.interaction_energy(self.ops, &y.fields.psi, y.q);
        let kin = 0.5 * (y.p[0] * y.p[0] + y.p[1] * y.p[1] + y.p[2] * y.p[2]);
        self.self_energy + field + inter + kin + self.potential.value(y.q)
    }

    /// The same functional evaluated literally on `φ = ψ + s_T(· − q*)`,
    /// with the periodic self-energy of the gridded charge. The zero mode of
    /// `φ` is dropped, as for a neutralizing background.
    pub fn literal_energy(&self, y: &SystemState) -> f64 {
        let ops = self.ops;
        let g = ops.grid();
        let s = self.charge.stationary(ops, self.q_star());
        let mut phi: Vec<C64> = y.fields.psi.iter().zip(&s).map(|(a, b)| a + b).collect();
        phi[0] = ZERO;
        let mut grad = 0.0;
        for (z, &sh) in phi.iter().zip(ops.shell_of()) {
            grad += g.shell_wavenumber(sh as usize).powi(2) * z.norm_sqr();
        }
        grad /= g.volume();
        let rho_q = self.charge.shifted(ops, y.q);
        let kin = 0.5 * (y.p[0] * y.p[0] + y.p[1] * y.p[1] + y.p[2] * y.p[2]);
        0.5 * ops.l2_sq_spectral(&y.fields.pi) + 0.5 * grad + ops.inner_spectral(&phi, &rho_q)
            + kin
            + self.potential.value(y.q)
    }

    /// `‖∇ψ‖ + ‖π‖ + |q − q*| + |p|`, used for blow-up detection.
    pub fn energy_state_norm(&self, y: &SystemState) -> f64 {
        energy_norm_spectral(self.ops, &y.fields) + norm3(y.displacement(self.q_star())) + norm3(y.p)
    }

    /// Split-step integration; `observer` sees the initial state and every
    /// `sample_every`-th step.
    pub fn evolve<F: FnMut(&SystemState)>(
        &self,
        y0: &SystemState,
        t_final: f64,
        dt: f64,
        opts: RunOptions,
        mut observer: F,
    ) -> Result<RunOutput> {
        let scheme = opts.scheme;
        self.flow.check_step(dt * scheme.max_fraction())?;
        let steps = step_count(t_final, dt)?;
        let sample_every = opts.sample_every.max(1);
        let (rot_frac, kick_frac) = scheme.stages();
        let m = rot_frac.len();
        let rots: Vec<ShellRotation> = rot_frac.iter().map(|c| ShellRotation::new(self.ops, c * dt)).collect();
        let q_star = self.q_star();
        let limit = BLOW_UP_FACTOR * self.energy_state_norm(y0).max(1e-6);
        let mut y = y0.clone();
        let mut positions = Vec::new();
        if opts.record_positions {
            positions.reserve(steps + 1);
            positions.push(y.q);
        }
        observer(&y);
        if steps == 0 {
            return Ok(RunOutput { last: y, positions, steps });
        }
        let force = |y: &mut SystemState, rot: Option<&ShellRotation>, w: f64| {
            let pair = self.charge.nonlinear_sweep(self.ops, &mut y.fields, rot, y.q, w);
            let grad_v = self.potential.gradient(y.q);
            let kd = self.flow.apply(y.displacement(q_star));
            [0, 1, 2].map(|a| pair[a] - grad_v[a] + kd[a])
        };
        let first = kick_frac[0] * dt;
        let f = force(&mut y, None, first);
        kick(&mut y.p, f, first);
        for n in 1..=steps {
            let sync = n % sample_every == 0 || n == steps;
            let mut f = [0.0; 3];
            for i in 0..m {
                let mut d = y.displacement(q_star);
                self.flow.rotate(&mut d, &mut y.p, rot_frac[i] * dt);
                y.q = [0, 1, 2].map(|a| q_star[a] + d[a]);
                let w = if i + 1 < m || sync {
                    kick_frac[i + 1] * dt
                } else {
                    (kick_frac[m] + kick_frac[0]) * dt
                };
                f = force(&mut y, Some(&rots[i]), w);
                kick(&mut y.p, f, w);
            }
            y.time = y0.time + n as f64 * dt;
            if opts.record_positions {
                positions.push(y.q);
            }
            if sync {
                let norm = self.energy_state_norm(&y);
                if !(norm <= limit) {
                    return Err(Error::BlowUp {
                        time: y.time,
                        norm,
                        limit,
                    });
                }
                if n % sample_every == 0 {
                    observer(&y);
                }
                if n < steps {
                    kick(&mut y.p, f, first);
                    let _ = self.charge.nonlinear_sweep(self.ops, &mut y.fields, None, y.q, first);
                }
            }
        }
        Ok(RunOutput { last: y, positions, steps })
    }

    /// Runs [`NonlinearSystem::evolve`] and records the standard diagnostics;
    /// `sigma` adds `‖Y − S_{q*}‖_{𝓔_{−σ}}`.
    pub fn trajectory(
        &self,
        y0: &SystemState,
        t_final: f64,
        dt: f64,
        opts: RunOptions,
        sigma: Option<f64>,
    ) -> Result<(NonlinearTrajectory, RunOutput)> {
        let q_star = self.q_star();
        let mut tr = NonlinearTrajectory {
            sigma,
            ..Default::default()
        };
        let out = self.evolve(y0, t_final, dt, opts, |y| {
            tr.times.push(y.time);
            tr.displacement.push(norm3(y.displacement(q_star)));
            tr.momentum.push(norm3(y.p));
            tr.field_energy_norm.push(energy_norm_spectral(self.ops, &y.fields));
            tr.energy.push(self.total_energy(y));
            if let Some(s) = sigma {
                tr.e_norm.push(state_norm_e_alpha_spectral(
                    self.ops,
                    &y.fields,
                    y.displacement(q_star),
                    y.p,
                    -s,
                ));
            }
        })?;
        Ok((tr, out))
    }

    /// `B(X) = (0, π₁, 0, p₁)` for the deviation `X = (ψ, π, d, p)`:
    /// `π₁ = ρ(· − q*) − ρ(· − q) − d·∇ρ(· − q*)`,
    /// `p₁ = −∇V(q) + d²V(q*)d + ∫ψ(∇ρ(· − q) − ∇ρ(· − q*)) + ∫s_T(· − q*)∇ρ(· − q) + ω₁²d`.
    pub fn remainder_b(&self, x: &LinearizedState) -> (Vec<C64>, [f64; 3]) {
        let ops = self.ops;
        let g = ops.grid();
        let q_star = self.q_star();
        let d = x.q;
        let q = [0, 1, 2].map(|a| q_star[a] + d[a]);
        let n = g.n();
        let k_axis: Vec<f64> = (0..n).map(|j| if g.is_nyquist(j) { 0.0 } else { g.wavenumber(j) }).collect();
        let base = self.charge.shifted(ops, q_star);
        let mut pi1 = vec![ZERO; g.len()];
        for (idx, (o, b)) in pi1.iter_mut().zip(&base).enumerate() {
            if *b == ZERO {
                continue;
            }
            let (i, j, l) = g.unflatten(idx);
            let theta = k_axis[i] * d[0] + k_axis[j] * d[1] + k_axis[l] * d[2];
            *o = b * one_minus_phase_plus_linear(theta);
        }
        let grad_v = self.potential.gradient(q);
        let hd = self.hessian * nalgebra::Vector3::from(d);
        let at_q = self.charge.pairing_with_gradient(ops, &x.fields.psi, q);
        let at_star = self.charge.pairing_with_gradient(ops, &x.fields.psi, q_star);
        let stat = self.charge.static_force(ops, d);
        let w1 = self.charge.omega1_sq();
        let p1 = [0, 1, 2].map(|a| -grad_v[a] + hd[a] + (at_q[a] - at_star[a]) + (stat[a] + w1 * d[a]));
        (pi1, p1)
    }

    /// `‖B(X)‖_{𝓔_α} = ‖π₁‖_{L²_α} + |p₁|`.
    pub fn remainder_norm(&self, x: &LinearizedState, alpha: f64) -> f64 {
        let (pi1, p1) = self.remainder_b(x);
        l2_alpha_norm(self.ops, &self.ops.to_real(&pi1), alpha) + norm3(p1)
    }

    /// Right-hand side `Ẏ` of the system at `y`, as a deviation derivative.
    pub fn vector_field(&self, y: &SystemState) -> LinearizedState {
        let ops = self.ops;
        let g = ops.grid();
        let q_star = self.q_star();
        let rho_q = self.charge.shifted(ops, y.q);
        let rho_s = self.charge.shifted(ops, q_star);
        let mut out = LinearizedState::zeros(g.len());
        out.time = y.time;
        out.fields.psi.clone_from(&y.fields.pi);
        for (idx, o) in out.fields.pi.iter_mut().enumerate() {
            let k = g.shell_wavenumber(ops.shell_of()[idx] as usize);
            *o = -y.fields.psi[idx] * (k * k) + rho_s[idx] - rho_q[idx];
        }
        out.q = y.p;
        let mut scratch = y.fields.clone();
        let pair = self.charge.nonlinear_sweep(ops, &mut scratch, None, y.q, 0.0);
        let grad_v = self.potential.gradient(y.q);
        out.p = [0, 1, 2].map(|a| pair[a] - grad_v[a]);
        out
    }

    /// `max ‖Ẋ − AX − B(X)‖` over `states`, with `Ẋ` from a central difference
    /// of two steps of size `h` and the norm `‖∇·‖ + ‖·‖ + |·| + |·|`.
    pub fn residual_check(&self, lin: &LinearizedSystem, states: &[SystemState], h: f64) -> Result<f64> {
        let q_star = self.q_star();
        let opts = RunOptions::default();
        let mut worst: f64 = 0.0;
        for y in states {
            let fwd = self.evolve(y, h, h, opts, |_| {})?.last;
            let bwd = self.evolve(y, -h, -h, opts, |_| {})?.last;
            let xd = fwd.deviation(q_star).combine(0.5 / h, &bwd.deviation(q_star), -0.5 / h);
            let x = y.deviation(q_star);
            let ax = lin.apply_a(&x);
            let (pi1, p1) = self.remainder_b(&x);
            let mut r = xd.combine(1.0, &ax, -1.0);
            for (a, b) in r.fields.pi.iter_mut().zip(&pi1) {
                *a -= b;
            }
            for a in 0..3 {
                r.p[a] -= p1[a];
            }
            let norm = energy_norm_spectral(self.ops, &r.fields) + norm3(r.q) + norm3(r.p);
            worst = worst.max(norm);
        }
        Ok(worst)
    }

    /// Integrates from `y0` inside the causal window, fits the decay of
    /// `‖Y(t) − S_{q*}‖_{𝓔_{−σ}}` on `[FIT_START, t_final]` and builds the
    /// majorant with threshold `epsilon`.
    pub fn verify_decay(
        &self,
        y0: &SystemState,
        sigma: f64,
        t_final: f64,
        dt: f64,
        opts: RunOptions,
        window: CausalWindow,
        epsilon: f64,
    ) -> Result<NonlinearDecayReport> {
        if !(sigma > 1.0) {
            return Err(Error::InvalidArgument(format!("sigma must exceed 1, got {sigma}")));
        }
        window.check(t_final)?;
        let (tr, _) = self.trajectory(y0, t_final, dt, opts, Some(sigma))?;
        let fit = DecayFit::fit(&tr.times, &tr.e_norm, FIT_START, t_final)?;
        let majorant = MajorantSeries::new(&tr.times, &tr.e_norm, sigma, MajorantWeight::Growing, epsilon);
        Ok(NonlinearDecayReport {
            sigma,
            trajectory: tr,
            fit,
            majorant,
        })
    }
}

/// `(1 − cos θ) + i(θ − sin θ) = 1 − e^{iθ} + iθ` without cancellation.
fn one_minus_phase_plus_linear(theta: f64) -> C64 {
    let re = 2.0 * (0.5 * theta).sin().powi(2);
    let im = if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        theta * t2 / 6.0 * (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0))
    } else {
        theta - theta.sin()
    };
    C64::new(re, im)
}

fn kick(p: &mut [f64; 3], f: [f64; 3], w: f64) {
    for a in 0..3 {
        p[a] += w * f[a];
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Sampled diagnostics of one nonlinear run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NonlinearTrajectory {
    pub sigma: Option<f64>,
    pub times: Vec<f64>,
    /// `|q − q*|`.
    pub displacement: Vec<f64>,
    pub momentum: Vec<f64>,
    /// `‖∇ψ‖ + ‖π‖`.
    pub field_energy_norm: Vec<f64>,
    pub energy: Vec<f64>,
    /// `‖Y − S_{q*}‖_{𝓔_{−σ}}`, when requested.
    pub e_norm: Vec<f64>,
    /// Identifier of the configuration that produced the run.
    pub config_hash: String,
}

impl NonlinearTrajectory {
    pub fn energy_drift(&self) -> f64 {
        relative_drift(&self.energy)
    }

    /// CSV with columns `t,dist_q,abs_p,field_energy_norm,E_minus_sigma_norm,energy`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,dist_q,abs_p,field_energy_norm,E_minus_sigma_norm,energy")?;
        for i in 0..self.times.len() {
            let e = self.e_norm.get(i).copied().unwrap_or(f64::NAN);
            writeln!(
                out,
                "{:.10},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i], self.displacement[i], self.momentum[i], self.field_energy_norm[i], e, self.energy[i]
            )?;
        }
        Ok(())
    }
}

/// Sign of the exponent in the majorant weight `(1+s)^{±σ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MajorantWeight {
    /// `(1+s)^{+σ}`.
    Growing,
    /// `(1+s)^{−σ}`.
    Decaying,
}

/// Running supremum `m(t) = sup_{s≤t} (1+s)^{±σ}‖X(s)‖` and the exit time
/// `t* = sup{t : m(t) ≤ ε}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorantSeries {
    pub sigma: f64,
    pub weight: MajorantWeight,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    /// `None` when `m` stays below `ε` on the whole run.
    pub t_star: Option<f64>,
}

impl MajorantSeries {
    pub fn new(times: &[f64], norms: &[f64], sigma: f64, weight: MajorantWeight, epsilon: f64) -> Self {
        let e = match weight {
            MajorantWeight::Growing => sigma,
            MajorantWeight::Decaying => -sigma,
        };
        let mut run: f64 = 0.0;
        let mut values = Vec::with_capacity(times.len());
        let mut t_star = None;
        for (&t, &n) in times.iter().zip(norms) {
            run = run.max((1.0 + t).powf(e) * n);
            values.push(run);
            if t_star.is_none() && run > epsilon {
                t_star = Some(values.len() - 1);
            }
        }
        let t_star = t_star.map(|i| if i == 0 { times[0] } else { times[i - 1] });
        MajorantSeries {
            sigma,
            weight,
            times: times.to_vec(),
            values,
            epsilon,
            t_star,
        }
    }

    /// `m` at the last sample.
    pub fn plateau(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct NonlinearDecayReport {
    pub sigma: f64,
    pub trajectory: NonlinearTrajectory,
    pub fit: DecayFit,
    pub majorant: MajorantSeries,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_phase_expansion_matches_direct_form() {
        for &t in &[1e-6, 1e-3, 9e-3, 0.011, 0.5, 2.0] {
            let z = one_minus_phase_plus_linear(t);
            let direct = C64::new(1.0, 0.0) - C64::from_polar(1.0, t) + C64::new(0.0, t);
            assert!((z - direct).norm() <= 1e-15 + 1e-12 * z.norm(), "θ = {t}");
        }
    }

    #[test]
    fn majorant_exit_time() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let n = [1.0, 1.0, 1.0, 1.0];
        let m = MajorantSeries::new(&t, &n, 1.0, MajorantWeight::Growing, 2.5);
        assert_eq!(m.values, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.t_star, Some(1.0));
        let m = MajorantSeries::new(&t, &[0.0; 4], 1.5, MajorantWeight::Growing, 1e-3);
        assert_eq!(m.t_star, None);
    }
}
