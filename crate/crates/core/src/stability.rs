//! Frequency-domain analysis of the linearization at a stable stationary
//! state: the symbol `h(λ)`, the blocks `H(λ) = h(λ)E`, the 6×6 matrix
//! `M(λ)`, its boundary values on the imaginary axis, and the time-domain
//! kernels `𝓛(t)` and `f(t)`.
//!
//! All k-space integrals carry `(2π)^{-3}`; the radial reduction of
//! `(2π)^{-3}∫k₁² g(|k|) d³k` is `(6π²)^{-1}∫k⁴ g(k) dk`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix6, SMatrix};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::charge::{ChargeDensity, RADIAL_K1_FACTOR};
use crate::coupling::GridCharge;
use crate::error::{Error, Result};
use crate::field::{FieldPair, GridOps};
use crate::free_wave::evolve_free_spectral;
use crate::potential::ExternalPotential;
use crate::quadrature::{gauss_kronrod, gauss_kronrod_real};

type C64 = Complex64;

/// `|b| / max(1, ω²)` below this flags a resonance.
pub const RESONANCE_TOL: f64 = 1e-12;

/// Scan threshold relative to `ω₀²`.
pub const SCAN_MARGIN: f64 = 0.5;

const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-12;

/// `h`, `b` and `M` for one charge and one stiffness `ω₀²`.
#[derive(Debug, Clone)]
pub struct StabilitySymbol {
    rho: ChargeDensity,
    omega0_sq: f64,
    omega1_sq: f64,
}

impl StabilitySymbol {
    pub fn new(rho: &ChargeDensity, omega0_sq: f64) -> Result<Self> {
        Ok(StabilitySymbol {
            rho: rho.clone(),
            omega0_sq,
            omega1_sq: rho.omega1_sq()?,
        })
    }

    /// Symbol for the critical point `q_star` of `potential`, which must be
    /// isotropic there.
    pub fn at_critical_point(rho: &ChargeDensity, potential: &ExternalPotential, q_star: [f64; 3]) -> Result<Self> {
        let w0 = potential.omega0_at(q_star)?;
        Self::new(rho, w0 * w0)
    }

    pub fn charge(&self) -> &ChargeDensity {
        &self.rho
    }

    pub fn omega0_sq(&self) -> f64 {
        self.omega0_sq
    }

    pub fn omega1_sq(&self) -> f64 {
        self.omega1_sq
    }

    /// `ω² = ω₀² + ω₁²`.
    pub fn omega_sq(&self) -> f64 {
        self.omega0_sq + self.omega1_sq
    }

    fn weight(&self, k: f64) -> f64 {
        let r = self.rho.rho_hat(k);
        k * k * k * k * r * r
    }

    /// Panel edges of width `1/R` on `[0, k_cut]`, with `extra` inserted.
    fn panels(&self, extra: &[f64]) -> Vec<f64> {
        let kc = self.rho.k_cut();
        let step = 1.0 / self.rho.radius();
        let mut edges: Vec<f64> = (0..)
            .map(|i| i as f64 * step)
            .take_while(|&k| k < kc)
            .collect();
        edges.push(kc);
        for &e in extra {
            if e > 0.0 && e < kc {
                edges.push(e);
            }
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        edges
    }

    /// `h(λ) = (6π²)^{-1}∫₀^∞ k⁴|ρ̂|²/(k² + λ²) dk` for `Re λ > 0`.
    pub fn h(&self, lambda: C64) -> Result<C64> {
        if !(lambda.re > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "h(λ) needs Re λ > 0, got {lambda}; use h_boundary on the axis"
            )));
        }
        let l2 = lambda * lambda;
        let edges = self.panels(&[lambda.im.abs()]);
        let mut total = C64::new(0.0, 0.0);
        for w in edges.windows(2) {
            let (v, _) = gauss_kronrod(|k| self.weight(k) / (k * k + l2), w[0], w[1], QUAD_ABS, QUAD_REL)?;
            total += v;
        }
        Ok(total * RADIAL_K1_FACTOR)
    }

    /// `h(iν + 0)`: principal value plus the Sokhotsky–Plemelj term
    /// `Im h = −sign(ν)|ν|³ρ̂(|ν|)²/(12π)`.
    pub fn h_boundary(&self, nu: f64) -> Result<C64> {
        if nu == 0.0 {
            return Ok(C64::new(self.omega1_sq, 0.0));
        }
        let a = nu.abs();
        let kc = self.rho.k_cut();
        let im = -nu.signum() * a * a * a * self.rho.rho_hat(a).powi(2) / (12.0 * PI);
        let g = |k: f64| self.weight(k) / (k * k - a * a);
        if a >= kc {
            let mut re = 0.0;
            for w in self.panels(&[]).windows(2) {
                re += gauss_kronrod_real(g, w[0], w[1], QUAD_ABS, QUAD_REL)?.value;
            }
            return Ok(C64::new(re * RADIAL_K1_FACTOR, im));
        }
        let delta = 0.1f64.max(0.01 * a);
        let lo = (a - delta).max(0.0);
        let hi = (a + delta).min(kc);
        let mut re = 0.0;
        for w in self.panels(&[lo, hi]).windows(2) {
            if w[1] <= lo || w[0] >= hi {
                re += gauss_kronrod_real(g, w[0], w[1], QUAD_ABS, QUAD_REL)?.value;
            }
        }
        // window: φ(k)/(k − a) with φ(k) = k⁴ρ̂²/(k + a)
        let phi = |k: f64| self.weight(k) / (k + a);
        let pa = phi(a);
        let eps = 1e-3 * delta;
        let slope = (phi(a - 2.0 * eps) - 8.0 * phi(a - eps) + 8.0 * phi(a + eps) - phi(a + 2.0 * eps)) / (12.0 * eps);
        let reg = |k: f64| {
            if (k - a).abs() < 1e-7 * delta {
                slope
            } else {
                (phi(k) - pa) / (k - a)
            }
        };
        re += gauss_kronrod_real(reg, lo, a, QUAD_ABS, QUAD_REL)?.value;
        re += gauss_kronrod_real(reg, a, hi, QUAD_ABS, QUAD_REL)?.value;
        re += pa * ((hi - a) / (a - lo)).ln();
        Ok(C64::new(re * RADIAL_K1_FACTOR, im))
    }

    /// `h` anywhere in the closed right half-plane.
    pub fn h_closed(&self, lambda: C64) -> Result<C64> {
        if lambda.re > 0.0 {
            self.h(lambda)
        } else if lambda.re == 0.0 {
            self.h_boundary(lambda.im)
        } else {
            Err(Error::InvalidArgument(format!("Re λ must be nonnegative, got {lambda}")))
        }
    }

    /// `b(λ) = λ² + ω² − h(λ)`.
    pub fn b(&self, lambda: C64) -> Result<C64> {
        Ok(lambda * lambda + self.omega_sq() - self.h_closed(lambda)?)
    }

    /// Full set of matrices at `λ` (boundary values when `Re λ = 0`).
    pub fn matrices(&self, lambda: C64) -> Result<StabilityMatrices> {
        let h = self.h_closed(lambda)?;
        Ok(StabilityMatrices::assemble(lambda, h, self.omega_sq()))
    }

    /// `min |b(iν+0)|` on a symmetric grid of `n_points` values in `[−ν_max, ν_max]`.
    pub fn scan_nonvanishing(&self, nu_max: f64, n_points: usize) -> Result<ScanReport> {
        if !(nu_max > 0.0) || n_points < 2 {
            return Err(Error::InvalidArgument("scan needs nu_max > 0 and at least 2 points".into()));
        }
        let mut nu = Vec::with_capacity(n_points);
        let mut b = Vec::with_capacity(n_points);
        for i in 0..n_points {
            let v = -nu_max + 2.0 * nu_max * i as f64 / (n_points - 1) as f64;
            nu.push(v);
        }
        // b(−ν) = conj b(ν)
        let mut cache: Vec<(f64, C64)> = Vec::new();
        for &v in &nu {
            let a = v.abs();
            let val = match cache.iter().find(|(x, _)| *x == a) {
                Some(&(_, z)) => z,
                None => {
                    let z = self.b(C64::new(0.0, a))?;
                    cache.push((a, z));
                    z
                }
            };
            b.push(if v < 0.0 { val.conj() } else { val });
        }
        let (argmin, min_abs) = nu
            .iter()
            .zip(&b)
            .map(|(&v, z)| (v, z.norm()))
            .fold((0.0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let mut im_h_negative = true;
        for (&v, z) in nu.iter().zip(&b) {
            // Im b = −Im h for real ν
            let im_h = -z.im;
            if v > 0.0 && self.rho.rho_hat(v) != 0.0 && !(im_h < 0.0) {
                im_h_negative = false;
            }
        }
        let threshold = SCAN_MARGIN * self.omega0_sq;
        Ok(ScanReport {
            nu,
            b,
            min_abs,
            argmin,
            threshold,
            im_h_negative,
            pass: min_abs >= threshold,
        })
    }
}

/// `h`, `H`, `M`, `M⁻¹` and `det M` at one `λ`.
#[derive(Debug, Clone)]
pub struct StabilityMatrices {
    pub lambda: C64,
    pub h: C64,
    pub omega_sq: f64,
    /// `b = λ² + ω² − h`.
    pub b: C64,
    pub big_h: SMatrix<C64, 3, 3>,
    pub m: Matrix6<C64>,
    pub m_inv: Option<Matrix6<C64>>,
    /// `det M = b³`.
    pub det: C64,
    pub singular: bool,
}

impl StabilityMatrices {
    pub fn assemble(lambda: C64, h: C64, omega_sq: f64) -> Self {
        let b = lambda * lambda + omega_sq - h;
        let e3 = SMatrix::<C64, 3, 3>::identity();
        let big_h = e3 * h;
        let mut m = Matrix6::<C64>::zeros();
        for i in 0..3 {
            m[(i, i)] = lambda;
            m[(i, i + 3)] = C64::new(-1.0, 0.0);
            m[(i + 3, i)] = omega_sq - h;
            m[(i + 3, i + 3)] = lambda;
        }
        let singular = b.norm() < RESONANCE_TOL * omega_sq.max(1.0);
        let m_inv = (!singular).then(|| {
            let [e1, e2, e3] = inverse_entries(lambda, h, omega_sq);
            let mut inv = Matrix6::<C64>::zeros();
            for i in 0..3 {
                inv[(i, i)] = e1;
                inv[(i, i + 3)] = e2;
                inv[(i + 3, i)] = e3;
                inv[(i + 3, i + 3)] = e1;
            }
            inv
        });
        StabilityMatrices {
            lambda,
            h,
            omega_sq,
            b,
            big_h,
            m,
            m_inv,
            det: b * b * b,
            singular,
        }
    }

    /// The per-block determinant `b(λ)`; at `λ = 0` it equals `ω₀²`.
    pub fn block_det(&self) -> C64 {
        self.b
    }

    /// The three entry families `λ/b`, `1/b`, `(h − ω²)/b` of `M⁻¹`.
    pub fn inverse_entries(&self) -> [C64; 3] {
        inverse_entries(self.lambda, self.h, self.omega_sq)
    }
}

fn inverse_entries(lambda: C64, h: C64, omega_sq: f64) -> [C64; 3] {
    let b = lambda * lambda + omega_sq - h;
    [lambda / b, b.inv(), (h - omega_sq) / b]
}

/// Result of [`StabilitySymbol::scan_nonvanishing`].
#[derive(Debug, Clone)]
pub struct ScanReport {
    pub nu: Vec<f64>,
    pub b: Vec<C64>,
    pub min_abs: f64,
    pub argmin: f64,
    pub threshold: f64,
    /// `Im h(iν+0) < 0` at every scanned `ν > 0` with `ρ̂(ν) ≠ 0`.
    pub im_h_negative: bool,
    pub pass: bool,
}

impl ScanReport {
    /// CSV with columns `nu,Re_b,Im_b,abs_b`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nu,Re_b,Im_b,abs_b")?;
        for (v, z) in self.nu.iter().zip(&self.b) {
            writeln!(out, "{v:.17e},{:.17e},{:.17e},{:.17e}", z.re, z.im, z.norm())?;
        }
        Ok(())
    }
}

/// Green function `g_λ(z) = e^{−λ|z|}/(4π|z|)` of `−Δ + λ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenFunctionKernel {
    pub lambda: C64,
}

impl GreenFunctionKernel {
    pub fn new(lambda: C64) -> Result<Self> {
        if !(lambda.re > 0.0) {
            return Err(Error::InvalidArgument(format!("g_λ needs Re λ > 0, got {lambda}")));
        }
        Ok(GreenFunctionKernel { lambda })
    }

    pub fn value(&self, r: f64) -> C64 {
        (-self.lambda * r).exp() / (4.0 * PI * r)
    }

    /// `ĝ_λ(k) = 1/(k² + λ²)`.
    pub fn transform(&self, k: f64) -> C64 {
        (k * k + self.lambda * self.lambda).inv()
    }

    /// `ĝ_λ(k) = 4π∫₀^∞ r² g_λ(r) sinc(kr) dr` by quadrature.
    pub fn transform_quadrature(&self, k: f64) -> Result<C64> {
        let r_max = 40.0 / self.lambda.re;
        let l = self.lambda;
        let f = |r: f64| {
            let s = if k == 0.0 { r } else { (k * r).sin() / k };
            (-l * r).exp() * s
        };
        let (v, _) = gauss_kronrod(f, 0.0, r_max, 1e-15, 1e-13)?;
        Ok(v)
    }
}

/// Inverse Laplace transform at `t > 0` of `λ^m / ((λ − p)(λ − p̄))^k`,
/// as `2 Re Res_{λ=p}[e^{λt} F(λ)]`.
fn rational_inverse(m: u32, k: u32, p: C64, t: f64) -> f64 {
    let pb = p.conj();
    let order = k - 1;
    let mut acc = C64::new(0.0, 0.0);
    let ept = (p * t).exp();
    for a in 0..=order.min(m) {
        for bb in 0..=(order - a) {
            let c = order - a - bb;
            let multinom = factorial(order) / (factorial(a) * factorial(bb) * factorial(c));
            let d_pow = factorial(m) / factorial(m - a) * p.powu(m - a);
            let d_exp = t.powi(bb as i32) * ept;
            let rising: f64 = (0..c).map(|i| (k + i) as f64).product();
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            let d_den = sign * rising * (p - pb).powi(-((k + c) as i32));
            acc += d_pow * d_exp * d_den * multinom;
        }
    }
    2.0 * (acc / factorial(order)).re
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

const ANALYTIC_TERMS: u32 = 4;

/// The kernel `𝓛(t) = (2π)^{-1}∫e^{iνt}M⁻¹(iν+0)dν` for `t ≥ 0`.
///
/// Each entry family `λ^j/b` is split into the rational approximant
/// `Σ_{n<4}(2γλ)^n λ^j/b₀^{n+1}`, `b₀ = λ² + 2γλ + ω²`, whose inverse is
/// summed in closed form, and an `𝓞(|ν|^{−4})` remainder synthesized on a
/// uniform tapered `ν`-grid.
#[derive(Debug, Clone)]
pub struct KernelL {
    omega_sq: f64,
    gamma: f64,
    pole: C64,
    nu: Vec<f64>,
    dnu: f64,
    /// Tapered remainders of `λ^j/b`, `j = 0, 1, 2`.
    rem: Vec<[C64; 3]>,
}

impl KernelL {
    /// Builds the synthesis grid `|ν| ≤ ν_max` with spacing `π/t_max`.
    pub fn new(symbol: &StabilitySymbol, nu_max: f64, t_max: f64) -> Result<Self> {
        if !(nu_max > 0.0 && t_max > 0.0) {
            return Err(Error::InvalidArgument("kernel grid needs nu_max > 0 and t_max > 0".into()));
        }
        let omega_sq = symbol.omega_sq();
        let omega = omega_sq.sqrt();
        let gamma = 1.0f64.min(omega / 2.0);
        let pole = C64::new(-gamma, (omega_sq - gamma * gamma).sqrt());
        let dnu = PI / t_max;
        let half = (nu_max / dnu).ceil() as i64;
        let taper_start = 0.9 * nu_max;
        let mut nu = Vec::with_capacity((2 * half + 1) as usize);
        let mut rem = Vec::with_capacity(nu.capacity());
        let mut positive: Vec<[C64; 3]> = Vec::with_capacity(half as usize + 1);
        for i in 0..=half {
            let v = i as f64 * dnu;
            let lambda = C64::new(0.0, v);
            let h = symbol.h_boundary(v)?;
            let b = lambda * lambda + omega_sq - h;
            if b.norm() < RESONANCE_TOL * omega_sq.max(1.0) {
                return Err(Error::Resonance { abs_b: b.norm() });
            }
            let b0 = lambda * lambda + 2.0 * gamma * lambda + omega_sq;
            let w = if v <= taper_start {
                1.0
            } else if v >= nu_max {
                0.0
            } else {
                0.5 * (1.0 + (PI * (v - taper_start) / (nu_max - taper_start)).cos())
            };
            let mut r = [C64::new(0.0, 0.0); 3];
            for (j, rj) in r.iter_mut().enumerate() {
                let lj = lambda.powu(j as u32);
                let mut approx = C64::new(0.0, 0.0);
                for n in 0..ANALYTIC_TERMS {
                    approx += (2.0 * gamma * lambda).powu(n) * lj / b0.powu(n + 1);
                }
                *rj = (lj / b - approx) * w;
            }
            positive.push(r);
        }
        for i in -half..=half {
            nu.push(i as f64 * dnu);
            let r = positive[i.unsigned_abs() as usize];
            rem.push(if i < 0 { r.map(|z| z.conj()) } else { r });
        }
        Ok(KernelL {
            omega_sq,
            gamma,
            pole,
            nu,
            dnu,
            rem,
        })
    }

    pub fn nu_grid(&self) -> &[f64] {
        &self.nu
    }

    pub fn dnu(&self) -> f64 {
        self.dnu
    }

    pub fn omega_sq(&self) -> f64 {
        self.omega_sq
    }

    /// Damping rate of the subtracted rational part.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Largest time the grid resolves, `π/dν`.
    pub fn t_limit(&self) -> f64 {
        PI / self.dnu
    }

    fn analytic(&self, j: u32, t: f64) -> f64 {
        (0..ANALYTIC_TERMS)
            .map(|n| (2.0 * self.gamma).powi(n as i32) * rational_inverse(j + n, n + 1, self.pole, t))
            .sum()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("kernel is evaluated for t ≥ 0, got {t}")));
        }
        if t > self.t_limit() {
            return Err(Error::Nyquist {
                time: t,
                limit: self.t_limit(),
            });
        }
        Ok(())
    }

    /// Scalar entries `(L_QP, L_QQ = L_PP, L_PQ)` at `t` and the largest
    /// imaginary part left by the synthesis.
    pub fn entries(&self, t: f64) -> Result<([f64; 3], f64)> {
        self.check_time(t)?;
        let mut s = [C64::new(0.0, 0.0); 3];
        for (v, r) in self.nu.iter().zip(&self.rem) {
            let e = C64::from_polar(1.0, v * t);
            for j in 0..3 {
                s[j] += e * r[j];
            }
        }
        let scale = self.dnu / (2.0 * PI);
        let im = s.iter().map(|z| (z.im * scale).abs()).fold(0.0, f64::max);
        let vals = [0, 1, 2].map(|j| self.analytic(j as u32, t) + s[j].re * scale);
        Ok((vals, im))
    }

    /// `𝓛(t)` as a real 6×6 matrix acting on `(Q, P)`.
    pub fn at(&self, t: f64) -> Result<Matrix6<f64>> {
        let ([qp, qq, pq], _) = self.entries(t)?;
        Ok(block_matrix(qq, qp, pq))
    }

    /// `𝓛` on the uniform times `t_i = i·2π/(n_fft·dν)` up to `t_limit`,
    /// with one FFT per entry family.
    pub fn table(&self) -> Result<(Vec<f64>, Vec<[f64; 3]>)> {
        let len = self.nu.len();
        let n_fft = (2 * len).next_power_of_two();
        let half = (len - 1) / 2;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_inverse(n_fft);
        let dt = 2.0 * PI / (n_fft as f64 * self.dnu);
        let n_t = (self.t_limit() / dt).floor() as usize + 1;
        let mut cols = [vec![], vec![], vec![]];
        for (j, col) in cols.iter_mut().enumerate() {
            let mut buf = vec![C64::new(0.0, 0.0); n_fft];
            for (i, r) in self.rem.iter().enumerate() {
                buf[i] = r[j];
            }
            fft.process(&mut buf);
            *col = buf;
        }
        let scale = self.dnu / (2.0 * PI);
        let mut times = Vec::with_capacity(n_t);
        let mut vals = Vec::with_capacity(n_t);
        for m in 0..n_t {
            let t = m as f64 * dt;
            // ν_i = (i − half)dν: undo the index offset
            let shift = C64::from_polar(1.0, -(half as f64) * self.dnu * t);
            let v = [0, 1, 2].map(|j| self.analytic(j as u32, t) + (cols[j][m] * shift).re * scale);
            times.push(t);
            vals.push(v);
        }
        Ok((times, vals))
    }
}

fn block_matrix(qq: f64, qp: f64, pq: f64) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    for i in 0..3 {
        m[(i, i)] = qq;
        m[(i, i + 3)] = qp;
        m[(i + 3, i)] = pq;
        m[(i + 3, i + 3)] = qq;
    }
    m
}

/// `f(t) = ⟨ψ-part of W₀(t)F₀, ∇ρ(· − q*)⟩` at each of `times`.
pub fn driving_f(ops: &GridOps, charge: &GridCharge, f0: &FieldPair, times: &[f64]) -> Vec<[f64; 3]> {
    let fh0 = ops.pair_to_spectral(f0);
    times
        .iter()
        .map(|&t| {
            let mut fh = fh0.clone();
            evolve_free_spectral(ops, &mut fh, t);
            charge.pairing_with_gradient(ops, &fh.psi, charge.q_star())
        })
        .collect()
}
