//! Radial, compactly supported charge densities and the quantities derived
//! from them: Fourier transform, Coulomb-type stationary field, coupling
//! frequency `ω₁²` and the Wiener (non-vanishing transform) scan.
//!
//! Fourier convention: `ρ̂(k) = ∫ e^{ik·x} ρ(x) d³x`. Every k-space integral
//! carries an explicit `(2π)^{-3}`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_gauss, Estimate};

/// Total charge of the default bump.
pub const DEFAULT_TOTAL_CHARGE: f64 = 6.0;

/// `(2π)^{-3} · 4π/3`, the radial reduction factor of `(2π)^{-3}∫ k₁² g(|k|) d³k`.
pub const RADIAL_K1_FACTOR: f64 = 1.0 / (6.0 * PI * PI);

const QUAD_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    /// `A·exp(−R²/(R²−r²))` for `r < R`.
    SmoothBump,
    /// `A·exp(−r²/(2s²))` for `r < R`, with `s = R/6`.
    TruncatedGaussian,
    /// `A` for `r < R`.
    UniformBall,
}

impl ProfileKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "smooth-bump" => Ok(ProfileKind::SmoothBump),
            "truncated-gaussian" => Ok(ProfileKind::TruncatedGaussian),
            "uniform-ball" => Ok(ProfileKind::UniformBall),
            other => Err(Error::InvalidArgument(format!("unknown charge kind `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::SmoothBump => "smooth-bump",
            ProfileKind::TruncatedGaussian => "truncated-gaussian",
            ProfileKind::UniformBall => "uniform-ball",
        }
    }

    /// Profile with unit radius and unit amplitude.
    fn unit(self, u: f64) -> f64 {
        if !(0.0..1.0).contains(&u.abs()) {
            return 0.0;
        }
        match self {
            ProfileKind::SmoothBump => (-1.0 / (1.0 - u * u)).exp(),
            ProfileKind::TruncatedGaussian => (-18.0 * u * u).exp(),
            ProfileKind::UniformBall => 1.0,
        }
    }

    /// Largest scaled wavenumber `kR` kept by the interpolation table; beyond
    /// it the transform is treated as zero in k-space integrals.
    fn kappa_cut(self) -> f64 {
        match self {
            ProfileKind::SmoothBump => 240.0,
            ProfileKind::TruncatedGaussian => 96.0,
            ProfileKind::UniformBall => 400.0,
        }
    }
}

/// Radial density `ρ(x) = ρ_r(|x|)` supported in `|x| < R`.
#[derive(Debug, Clone)]
pub struct ChargeDensity {
    kind: ProfileKind,
    amplitude: f64,
    radius: f64,
    table: Arc<UnitSpectrum>,
}

impl ChargeDensity {
    pub fn new(kind: ProfileKind, radius: f64, amplitude: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("charge radius must be positive, got {radius}")));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidArgument("charge amplitude must be finite".into()));
        }
        Ok(ChargeDensity {
            kind,
            amplitude,
            radius,
            table: UnitSpectrum::shared(kind),
        })
    }

    /// Amplitude chosen so that `∫ρ d³x = total_charge`.
    pub fn with_total_charge(kind: ProfileKind, radius: f64, total_charge: f64) -> Result<Self> {
        let unit = ChargeDensity::new(kind, radius, 1.0)?;
        let q1 = unit.total_charge_quadrature()?.value;
        ChargeDensity::new(kind, radius, total_charge / q1)
    }

    /// Default charge: smooth bump of unit radius and total charge
    /// [`DEFAULT_TOTAL_CHARGE`].
    pub fn default_bump() -> Self {
        ChargeDensity::with_total_charge(ProfileKind::SmoothBump, 1.0, DEFAULT_TOTAL_CHARGE)
            .expect("bump normalization converges")
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Same profile and radius, amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        ChargeDensity {
            amplitude: self.amplitude * factor,
            ..self.clone()
        }
    }

    /// `ρ_r(r)`.
    pub fn radial(&self, r: f64) -> f64 {
        self.amplitude * self.kind.unit(r / self.radius)
    }

    /// `ρ(x)` at a point.
    pub fn at(&self, x: [f64; 3]) -> f64 {
        self.radial(norm3(x))
    }

    /// `∫ρ d³x` by radial quadrature.
    pub fn total_charge_quadrature(&self) -> Result<Estimate> {
        self.radial_integral(|r| r * r * self.radial(r)).map(|e| scale(e, 4.0 * PI))
    }

    /// `∫ρ d³x` from the transform at the origin.
    pub fn total_charge(&self) -> f64 {
        self.rho_hat(0.0)
    }

    /// `∫|ρ| d³x`, used as the magnitude scale for tolerances.
    pub fn absolute_charge(&self) -> f64 {
        self.total_charge().abs()
    }

    /// `ρ̂(k) = 4π∫₀^R r²ρ_r(r) sinc(kr) dr` by adaptive quadrature.
    pub fn rho_hat_quadrature(&self, k: f64) -> Result<Estimate> {
        if k < 0.0 {
            return Err(Error::InvalidArgument(format!("wavenumber must be nonnegative, got {k}")));
        }
        let abs_tol = 1e-15 * self.amplitude.abs() * self.radius.powi(3);
        let est = adaptive_gauss(
            |r| r * r * self.radial(r) * sinc(k * r),
            0.0,
            self.radius,
            QUAD_REL_TOL * 1e-3,
            abs_tol,
        )?;
        Ok(scale(est, 4.0 * PI))
    }

    /// `ρ̂(|k|)` from the interpolation table (uniform ball: closed form).
    /// Even in `k`; zero beyond [`ChargeDensity::k_cut`].
    pub fn rho_hat(&self, k: f64) -> f64 {
        self.amplitude * self.radius.powi(3) * self.table.eval(k.abs() * self.radius)
    }

    /// Wavenumber beyond which `ρ̂` is treated as zero.
    pub fn k_cut(&self) -> f64 {
        self.kind.kappa_cut() / self.radius
    }

    /// `‖ρ‖²_{L²} = 4π∫r²ρ_r² dr`.
    pub fn l2_norm_sq(&self) -> Result<Estimate> {
        self.radial_integral(|r| {
            let v = self.radial(r);
            r * r * v * v
        })
        .map(|e| scale(e, 4.0 * PI))
    }

    /// `ω₁²` as `‖ρ‖²/3`.
    pub fn omega1_sq_position(&self) -> Result<f64> {
        Ok(self.l2_norm_sq()?.value / 3.0)
    }

    /// `ω₁²` as `(2π)^{-3}∫k₁²|ρ̂|²/k² d³k = (2π)^{-3}(4π/3)∫₀^∞ k²|ρ̂|² dk`.
    pub fn omega1_sq_spectral(&self) -> Result<f64> {
        let est = self.spectral_integral(|k| {
            let r = self.rho_hat(k);
            k * k * r * r
        })?;
        Ok(RADIAL_K1_FACTOR * est)
    }

    /// `ω₁²`, position-space method.
    pub fn omega1_sq(&self) -> Result<f64> {
        self.omega1_sq_position()
    }

    /// Radial integral `∫₀^{k_cut} g(k) dk` on panels aligned with the table.
    pub fn spectral_integral<F: Fn(f64) -> f64>(&self, g: F) -> Result<f64> {
        self.spectral_integral_to(g, self.k_cut())
    }

    /// Radial integral `∫₀^{k_end} g(k) dk`, `k_end` clipped to `k_cut`.
    pub fn spectral_integral_to<F: Fn(f64) -> f64>(&self, g: F, k_end: f64) -> Result<f64> {
        let kc = k_end.min(self.k_cut());
        let panel = 1.0 / self.radius;
        let n = (kc / panel).ceil() as usize;
        let mut total = 0.0;
        for i in 0..n {
            let a = i as f64 * panel;
            let b = ((i + 1) as f64 * panel).min(kc);
            if b > a {
                total += adaptive_gauss(&g, a, b, 1e-13, 1e-300)?.value;
            }
        }
        Ok(total)
    }

    /// Stationary field of the charge centered at the origin,
    /// `s₀(r) = −(1/r)∫₀^r ρ_r s² ds − ∫_r^∞ ρ_r s ds`.
    pub fn stationary_radial(&self, r: f64) -> Result<f64> {
        let r = r.abs();
        let big_r = self.radius;
        if r >= big_r {
            return Ok(-self.total_charge_quadrature()?.value / (4.0 * PI * r));
        }
        let inner = if r > 0.0 {
            adaptive_gauss(|s| self.radial(s) * s * s, 0.0, r, QUAD_REL_TOL, 1e-300)?.value / r
        } else {
            0.0
        };
        let outer = adaptive_gauss(|s| self.radial(s) * s, r, big_r, QUAD_REL_TOL, 1e-300)?.value;
        Ok(-inner - outer)
    }

    /// `s_q(x) = s₀(x − q)`.
    pub fn stationary_field(&self, q: [f64; 3], x: [f64; 3]) -> Result<f64> {
        self.stationary_radial(norm3(sub3(x, q)))
    }

    /// `(ρ, Δ⁻¹ρ) = ∫ρ s₀ d³x`, a negative number for nonzero `ρ`.
    pub fn coulomb_self_pairing(&self) -> Result<f64> {
        let failure = std::cell::RefCell::new(None);
        let est = adaptive_gauss(
            |r| match self.stationary_radial(r) {
                Ok(s) => r * r * self.radial(r) * s,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            0.0,
            self.radius,
            QUAD_REL_TOL,
            1e-300,
        )?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(4.0 * PI * est.value)
    }

    /// `(ρ, Δ⁻¹ρ) = −(2π)^{-3}∫|ρ̂|²/k² d³k = −(1/2π²)∫₀^∞|ρ̂|² dk`.
    pub fn coulomb_self_pairing_spectral(&self) -> Result<f64> {
        let est = self.spectral_integral(|k| {
            let r = self.rho_hat(k);
            r * r
        })?;
        Ok(-est / (2.0 * PI * PI))
    }

    fn radial_integral<F: Fn(f64) -> f64>(&self, f: F) -> Result<Estimate> {
        adaptive_gauss(f, 0.0, self.radius, QUAD_REL_TOL, 1e-300)
    }
}

/// Outcome of a Wiener-condition scan of `|ρ̂|` on `[0, k_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerReport {
    pub k_max: f64,
    pub n_samples: usize,
    pub min_abs: f64,
    pub argmin: f64,
    pub tolerance: f64,
    /// Smallest scanned `k` with a sign change of `ρ̂`, refined by bisection.
    pub first_zero: Option<f64>,
    pub pass: bool,
}

/// Scans `|ρ̂|` on a uniform grid, refining sign changes by bisection and
/// interior local minima by golden-section search.
pub fn check_wiener(rho: &ChargeDensity, k_max: f64, n_samples: usize) -> Result<WienerReport> {
    if !(k_max > 0.0) {
        return Err(Error::InvalidArgument(format!("k_max must be positive, got {k_max}")));
    }
    let n = n_samples.max(2);
    let ks: Vec<f64> = (0..n).map(|i| k_max * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = ks.iter().map(|&k| rho.rho_hat(k)).collect();
    let mut best_k = ks[0];
    let mut best = vals[0].abs();
    let mut consider = |k: f64, v: f64| {
        if v.abs() < best {
            best = v.abs();
            best_k = k;
        }
    };
    for i in 0..n {
        consider(ks[i], vals[i]);
    }
    let mut first_zero = None;
    for i in 0..n - 1 {
        if vals[i] == 0.0 || vals[i].signum() != vals[i + 1].signum() {
            let k = bisect_root(|k| rho.rho_hat(k), ks[i], ks[i + 1]);
            first_zero.get_or_insert(k);
            consider(k, rho.rho_hat(k));
        }
    }
    for i in 1..n - 1 {
        let (a, m, b) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
        if m <= a && m <= b {
            let k = golden_min(|k| rho.rho_hat(k).abs(), ks[i - 1], ks[i + 1]);
            consider(k, rho.rho_hat(k));
        }
    }
    let tolerance = 1e-6 * rho.absolute_charge();
    Ok(WienerReport {
        k_max,
        n_samples: n,
        min_abs: best,
        argmin: best_k,
        tolerance,
        first_zero,
        pass: best > tolerance,
    })
}

fn bisect_root<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..120 {
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `sin(x)/x` with the removable point filled.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub(crate) fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(e: Estimate, f: f64) -> Estimate {
    Estimate {
        value: e.value * f,
        error: e.error * f.abs(),
    }
}

const CHEB_DEGREE: usize = 24;

/// Transform of the unit-radius, unit-amplitude profile, `T(κ)`, so that
/// `ρ̂(k) = A R³ T(kR)`.
#[derive(Debug)]
enum UnitSpectrum {
    Ball,
    /// Piecewise Chebyshev interpolant on unit-width panels of `[0, κ_cut]`.
    Table { kappa_cut: f64, coeffs: Vec<[f64; CHEB_DEGREE]> },
}

impl UnitSpectrum {
    fn shared(kind: ProfileKind) -> Arc<UnitSpectrum> {
        static BUMP: OnceLock<Arc<UnitSpectrum>> = OnceLock::new();
        static GAUSS: OnceLock<Arc<UnitSpectrum>> = OnceLock::new();
        static BALL: OnceLock<Arc<UnitSpectrum>> = OnceLock::new();
        let cell = match kind {
            ProfileKind::SmoothBump => &BUMP,
            ProfileKind::TruncatedGaussian => &GAUSS,
            ProfileKind::UniformBall => &BALL,
        };
        cell.get_or_init(|| Arc::new(UnitSpectrum::build(kind))).clone()
    }

    fn build(kind: ProfileKind) -> UnitSpectrum {
        if kind == ProfileKind::UniformBall {
            return UnitSpectrum::Ball;
        }
        let kappa_cut = kind.kappa_cut();
        let panels = kappa_cut.ceil() as usize;
        let n = CHEB_DEGREE;
        let nodes: Vec<f64> = (0..n).map(|j| (PI * (j as f64 + 0.5) / n as f64).cos()).collect();
        let mut coeffs = Vec::with_capacity(panels);
        for p in 0..panels {
            let a = p as f64;
            let vals: Vec<f64> = nodes
                .iter()
                .map(|&x| {
                    let kappa = a + 0.5 * (x + 1.0);
                    unit_transform(kind, kappa)
                })
                .collect();
            let mut c = [0.0; CHEB_DEGREE];
            for (m, cm) in c.iter_mut().enumerate() {
                let s: f64 = (0..n)
                    .map(|j| vals[j] * (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos())
                    .sum();
                *cm = 2.0 * s / n as f64;
            }
            c[0] *= 0.5;
            coeffs.push(c);
        }
        UnitSpectrum::Table { kappa_cut, coeffs }
    }

    fn eval(&self, kappa: f64) -> f64 {
        match self {
            UnitSpectrum::Ball => {
                if kappa < 1e-3 {
                    let k2 = kappa * kappa;
                    4.0 * PI * (1.0 / 3.0 - k2 / 30.0 + k2 * k2 / 840.0)
                } else {
                    4.0 * PI * (kappa.sin() - kappa * kappa.cos()) / kappa.powi(3)
                }
            }
            UnitSpectrum::Table { kappa_cut, coeffs } => {
                if kappa >= *kappa_cut {
                    return 0.0;
                }
                let p = (kappa.floor() as usize).min(coeffs.len() - 1);
                let x = 2.0 * (kappa - p as f64) - 1.0;
                clenshaw(&coeffs[p], x)
            }
        }
    }
}

fn clenshaw(c: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + c[0]
}

fn unit_transform(kind: ProfileKind, kappa: f64) -> f64 {
    let est = adaptive_gauss(
        |u| u * u * kind.unit(u) * sinc(kappa * u),
        0.0,
        1.0,
        1e-13,
        1e-17,
    )
    .expect("unit profile transform converges");
    4.0 * PI * est.value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_direct_quadrature() {
        let rho = ChargeDensity::with_total_charge(ProfileKind::SmoothBump, 1.3, 2.0).unwrap();
        for &k in &[0.0, 0.37, 1.0, 4.9, 6.52, 11.0, 40.0, 120.0] {
            let exact = rho.rho_hat_quadrature(k).unwrap().value;
            assert!((rho.rho_hat(k) - exact).abs() < 1e-11 * 2.0, "k = {k}");
        }
    }

    #[test]
    fn total_charge_normalization() {
        let rho = ChargeDensity::with_total_charge(ProfileKind::TruncatedGaussian, 2.0, 3.0).unwrap();
        assert!((rho.total_charge() - 3.0).abs() < 1e-10);
        assert!((rho.total_charge_quadrature().unwrap().value - 3.0).abs() < 1e-10);
    }

    #[test]
    fn sinc_series_matches_direct_form() {
        let x: f64 = 0.99e-4;
        assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
        assert_eq!(sinc(0.0), 1.0);
    }
}
