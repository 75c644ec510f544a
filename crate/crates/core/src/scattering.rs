//! Scattering state `Φ₊` of the field deviation.
//!
//! With `F(t) = (ψ(t), π(t))` the deviation from the stationary field of `q*`,
//! `Ḟ = A₀F + R(t)` where `R(s) = (0, ρ(· − q*) − ρ(· − q(s)))`, hence
//! `W₀(−t)F(t) = F(0) + ∫₀ᵗ W₀(−s)R(s) ds` and
//! `Φ₊ = F(0) + ∫₀^∞ W₀(−s)R(s) ds`.

use std::io::Write;

use crate::coupling::GridCharge;
use crate::error::{Error, Result};
use crate::field::{GridOps, SpectralPair, C64, ZERO};
use crate::fit::DecayFit;
use crate::free_wave::{CausalWindow, ShellRotation, FIT_START};
use crate::linear::step_count;
use crate::nonlinear::{NonlinearSystem, RunOptions, SystemState};

/// Every step enters the quadrature up to this time; beyond it the stride
/// doubles each time `s` doubles.
pub const DENSE_UNTIL: f64 = 10.0;
/// `T_max = TMAX_FRACTION · T_window` unless given.
pub const TMAX_FRACTION: f64 = 0.8;

/// `R(s)` for the particle at `q`, as coefficients.
pub fn source_r(ops: &GridOps, charge: &GridCharge, q: [f64; 3]) -> SpectralPair {
    let rs = charge.shifted(ops, charge.q_star());
    let rq = charge.shifted(ops, q);
    SpectralPair {
        psi: vec![ZERO; rs.len()],
        pi: rs.iter().zip(&rq).map(|(a, b)| a - b).collect(),
    }
}

/// Energy norm `(‖∇ψ‖² + ‖π‖²)^{1/2}` with the propagator's `|k|`, invariant
/// under `W₀(t)`.
pub fn propagator_norm(ops: &GridOps, f: &SpectralPair) -> f64 {
    let g = ops.grid();
    let (mut a, mut b) = (0.0, 0.0);
    for ((psi, pi), &sh) in f.psi.iter().zip(&f.pi).zip(ops.shell_of()) {
        a += g.shell_wavenumber(sh as usize).powi(2) * psi.norm_sqr();
        b += pi.norm_sqr();
    }
    ((a + b) / g.volume()).sqrt()
}

/// Step indices of the quadrature nodes on `[0, steps·dt]`: every step up to
/// `dense_until`, then strides 2, 4, … on `(dense_until, 2·dense_until]`,
/// `(2·dense_until, 4·dense_until]`, …; the last step is always a node.
pub fn quadrature_nodes(steps: usize, dt: f64, dense_until: f64) -> Vec<usize> {
    let dt = dt.abs();
    let mut nodes = vec![0];
    let mut j = 0;
    let mut limit = dense_until;
    let mut stride = 1;
    while j < steps {
        while (j as f64) * dt >= limit - 1e-9 * dt {
            limit *= 2.0;
            stride *= 2;
        }
        j = (j + stride).min(steps);
        nodes.push(j);
    }
    nodes
}

/// One partial integral `∫₀ᵀ W₀(−s)R(s) ds`.
#[derive(Debug, Clone)]
pub struct PartialIntegral {
    pub t: f64,
    pub value: SpectralPair,
}

#[derive(Debug, Clone)]
pub struct ScatteringResult {
    pub phi_plus: SpectralPair,
    pub t_max: f64,
    /// Quadrature nodes `s_j`.
    pub nodes: Vec<f64>,
    /// `‖R(s_j)‖ = ‖W₀(−s_j)R(s_j)‖`.
    pub source_norms: Vec<f64>,
    /// `‖∫_{s_j}^{T_max} W₀(−s)R(s) ds‖`.
    pub tail_norms: Vec<f64>,
    /// Partial integrals at the requested checkpoints, in increasing `T`.
    pub partial_integrals: Vec<PartialIntegral>,
    /// Fit of `tail_norms` on `[FIT_START, T_max/2]`; `None` when the samples
    /// there are too few or not positive.
    pub tail_fit: Option<DecayFit>,
    pub warnings: Vec<String>,
}

impl ScatteringResult {
    /// `‖I(T_{k+1}) − I(T_k)‖` for consecutive checkpoints.
    pub fn cauchy_differences(&self, ops: &GridOps) -> Vec<f64> {
        self.partial_integrals
            .windows(2)
            .map(|w| propagator_norm(ops, &w[1].value.difference(&w[0].value)))
            .collect()
    }

    /// CSV with columns `s,source_norm,tail_norm`.
    pub fn write_tail_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,source_norm,tail_norm")?;
        for i in 0..self.nodes.len() {
            writeln!(
                out,
                "{:.10},{:.17e},{:.17e}",
                self.nodes[i], self.source_norms[i], self.tail_norms[i]
            )?;
        }
        Ok(())
    }
}

/// `Φ₊` by trapezoidal quadrature over the recorded positions
/// `positions[j] = q(j·dt)`, truncated at `t_max`. `checkpoints` are snapped
/// to the nearest node. `sigma` sets the rate below which a warning is
/// recorded.
pub fn compute_phi_plus(
    sys: &NonlinearSystem,
    f0: &SpectralPair,
    positions: &[[f64; 3]],
    dt: f64,
    t_max: f64,
    checkpoints: &[f64],
    sigma: f64,
) -> Result<ScatteringResult> {
    let ops = sys.ops();
    let g = ops.grid();
    let steps = step_count(t_max, dt)?;
    if positions.len() <= steps {
        return Err(Error::InvalidArgument(format!(
            "{} recorded positions do not cover t_max = {t_max}",
            positions.len()
        )));
    }
    let idx = quadrature_nodes(steps, dt, DENSE_UNTIL);
    let nodes: Vec<f64> = idx.iter().map(|&j| j as f64 * dt).collect();
    let m = nodes.len();
    let mut cp: Vec<usize> = checkpoints
        .iter()
        .map(|&t| {
            (0..m)
                .min_by(|&a, &b| (nodes[a] - t).abs().total_cmp(&(nodes[b] - t).abs()))
                .unwrap_or(0)
        })
        .collect();
    cp.sort_unstable();
    cp.dedup();

    let vol = g.volume();
    let shells = ops.shell_of();
    let charge = sys.charge();
    let mut acc = SpectralPair::zeros(g.len());
    let mut snapshots: Vec<(usize, SpectralPair)> = Vec::new();
    let mut tail_norms = vec![0.0; m];
    let mut source_norms = vec![0.0; m];
    for j in (0..m).rev() {
        let s = nodes[j];
        let w_right = if j + 1 < m { 0.5 * (nodes[j + 1] - s) } else { 0.0 };
        let w_left = if j > 0 { 0.5 * (s - nodes[j - 1]) } else { 0.0 };
        let r = source_r(ops, charge, positions[idx[j]]);
        let rot = ShellRotation::new(ops, -s);
        let (mut a, mut b, mut rn) = (0.0, 0.0, 0.0);
        for (k, rhat) in r.pi.iter().enumerate() {
            let sh = shells[k] as usize;
            let kk = g.shell_wavenumber(sh).powi(2);
            rn += rhat.norm_sqr();
            let gpsi: C64 = rhat * rot.sin_over_k[sh];
            let gpi: C64 = rhat * rot.cos[sh];
            acc.psi[k] += gpsi * w_right;
            acc.pi[k] += gpi * w_right;
            a += kk * acc.psi[k].norm_sqr();
            b += acc.pi[k].norm_sqr();
            acc.psi[k] += gpsi * w_left;
            acc.pi[k] += gpi * w_left;
        }
        tail_norms[j] = ((a + b) / vol).sqrt();
        source_norms[j] = (rn / vol).sqrt();
        if cp.contains(&j) {
            snapshots.push((j, acc.clone()));
        }
    }
    let mut phi_plus = f0.clone();
    phi_plus.axpy(1.0, &acc);
    // snapshots already carry the left half-weight of their own node
    let mut partial_integrals: Vec<PartialIntegral> = snapshots
        .into_iter()
        .map(|(j, snap)| {
            let mut value = acc.difference(&snap);
            if j > 0 {
                let w_left = 0.5 * (nodes[j] - nodes[j - 1]);
                let r = source_r(ops, charge, positions[idx[j]]);
                let rot = ShellRotation::new(ops, -nodes[j]);
                for (k, rhat) in r.pi.iter().enumerate() {
                    let sh = shells[k] as usize;
                    value.psi[k] += rhat * (rot.sin_over_k[sh] * w_left);
                    value.pi[k] += rhat * (rot.cos[sh] * w_left);
                }
            }
            PartialIntegral { t: nodes[j], value }
        })
        .collect();
    partial_integrals.sort_by(|a, b| a.t.total_cmp(&b.t));

    let fit_end = 0.5 * t_max.abs();
    let mut warnings = Vec::new();
    let tail_fit = match DecayFit::fit(&nodes, &tail_norms, FIT_START, fit_end) {
        Ok(fit) => {
            let rate = -0.8 * (sigma - 1.0);
            if fit.exponent > rate {
                warnings.push(format!(
                    "partial integrals converge at fitted rate {:.3}, slower than {rate:.3}",
                    fit.exponent
                ));
            }
            Some(fit)
        }
        Err(e) => {
            warnings.push(format!("no tail fit: {e}"));
            None
        }
    };
    Ok(ScatteringResult {
        phi_plus,
        t_max,
        nodes,
        source_norms,
        tail_norms,
        partial_integrals,
        tail_fit,
        warnings,
    })
}

/// `‖W₀(−t)F(t) − Φ₊‖` along a trajectory.
#[derive(Debug, Clone)]
pub struct RemainderReport {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub fit: DecayFit,
}

impl RemainderReport {
    /// CSV with columns `t,remainder_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,remainder_norm")?;
        for (t, r) in self.times.iter().zip(&self.norms) {
            writeln!(out, "{t:.10},{r:.17e}")?;
        }
        Ok(())
    }
}

/// `‖W₀(−t)F(t) − Φ₊‖ = ‖F(t) − W₀(t)Φ₊‖` at the samples of a rerun from
/// `y0`, fitted on `[FIT_START, fit_end]`.
pub fn verify_scattering(
    sys: &NonlinearSystem,
    y0: &SystemState,
    phi_plus: &SpectralPair,
    t_max: f64,
    dt: f64,
    opts: RunOptions,
    fit_end: f64,
) -> Result<RemainderReport> {
    let ops = sys.ops();
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let run = RunOptions {
        record_positions: false,
        ..opts
    };
    sys.evolve(y0, t_max, dt, run, |y| {
        let t = y.time - y0.time;
        let mut free = phi_plus.clone();
        ShellRotation::new(ops, t).apply(ops, &mut free);
        times.push(t);
        norms.push(propagator_norm(ops, &y.fields.difference(&free)));
    })?;
    let fit = DecayFit::fit(&times, &norms, FIT_START, fit_end)?;
    Ok(RemainderReport { times, norms, fit })
}

/// Complete forward scattering run from `y0`.
#[derive(Debug, Clone)]
pub struct ScatteringReport {
    pub sigma: f64,
    pub result: ScatteringResult,
    pub remainder: RemainderReport,
}

/// Integrates to `t_max` (default `TMAX_FRACTION · T_window`), builds `Φ₊`
/// and verifies the remainder decay.
#[allow(clippy::too_many_arguments)]
pub fn run_scattering(
    sys: &NonlinearSystem,
    y0: &SystemState,
    sigma: f64,
    dt: f64,
    t_max: Option<f64>,
    opts: RunOptions,
    window: CausalWindow,
    checkpoints: &[f64],
) -> Result<ScatteringReport> {
    if !(sigma > 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must exceed 1, got {sigma}")));
    }
    let t_max = match t_max {
        Some(t) => t,
        None => {
            let t = TMAX_FRACTION * window.t_window();
            (t / dt.abs()).floor() * dt.abs()
        }
    };
    window.check(t_max)?;
    let record = RunOptions {
        record_positions: true,
        ..opts
    };
    let out = sys.evolve(y0, t_max, dt, record, |_| {})?;
    let result = compute_phi_plus(sys, &y0.fields, &out.positions, dt, t_max, checkpoints, sigma)?;
    let remainder = verify_scattering(sys, y0, &result.phi_plus, t_max, dt, opts, 0.5 * t_max)?;
    Ok(ScatteringReport {
        sigma,
        result,
        remainder,
    })
}
