use std::f64::consts::PI;

use nalgebra::Matrix6;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavepart_core::charge::{ChargeDensity, ProfileKind, RADIAL_K1_FACTOR};
use wavepart_core::coupling::GridCharge;
use wavepart_core::error::Error;
use wavepart_core::field::{FieldPair, GridOps};
use wavepart_core::fit::DecayFit;
use wavepart_core::potential::DEFAULT_OMEGA0;
use wavepart_core::quadrature::composite_gauss;
use wavepart_core::stability::*;

fn symbol() -> StabilitySymbol {
    StabilitySymbol::new(&ChargeDensity::default_bump(), DEFAULT_OMEGA0 * DEFAULT_OMEGA0).unwrap()
}

#[test]
fn h_vanishes_at_large_lambda() {
    let s = symbol();
    let h = s.h(C64::new(1e3, 0.0)).unwrap();
    assert!(h.norm() < 1e-4 * s.omega1_sq(), "{h}");
}

#[test]
fn h_tends_to_omega1_sq_at_zero() {
    let s = symbol();
    let w1 = s.omega1_sq();
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| (s.h(C64::new(e, 0.0)).unwrap() - w1).norm() / w1)
        .collect();
    assert!(errs[2] < 1e-3, "{errs:?}");
    assert!(errs[1] < errs[0] / 5.0 && errs[2] < errs[1] / 5.0, "{errs:?}");
    assert_eq!(s.h_boundary(0.0).unwrap(), C64::new(w1, 0.0));
}

#[test]
fn h_at_one_matches_monte_carlo() {
    let s = symbol();
    let rho = s.charge();
    let exact = s.h(C64::new(1.0, 0.0)).unwrap().re;
    // isotropic proposal with |k| ~ Gamma(3, scale)
    let scale = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 400_000;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let k: f64 = (0..3).map(|_| -(1.0 - rng.random::<f64>()).ln()).sum::<f64>() * scale;
        let cos_theta: f64 = 2.0 * rng.random::<f64>() - 1.0;
        let k1 = k * cos_theta;
        let pdf = (-k / scale).exp() / (8.0 * PI * scale.powi(3));
        let r = rho.rho_hat(k);
        let v = k1 * k1 * r * r / (k * k + 1.0) / pdf;
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let stderr = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
    let mc = mean / (8.0 * PI.powi(3));
    assert!(stderr / mean < 3e-3, "stderr {}", stderr / mean);
    assert!((mc - exact).abs() < 1e-2 * exact, "{mc} vs {exact}");
}

#[test]
fn h_satisfies_cauchy_riemann() {
    let s = symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 1e-4;
    for _ in 0..20 {
        let lam = C64::new(rng.random_range(0.2..5.0), rng.random_range(-6.0..6.0));
        let hx = (s.h(lam + d).unwrap() - s.h(lam - d).unwrap()) / (2.0 * d);
        let hy = (s.h(lam + C64::new(0.0, d)).unwrap() - s.h(lam - C64::new(0.0, d)).unwrap()) / (2.0 * d);
        let residual = (hx + C64::i() * hy).norm();
        assert!(residual < 1e-6 * hx.norm().max(1.0), "{lam}: {residual:e}");
    }
}

#[test]
fn boundary_value_matches_epsilon_limit() {
    let s = symbol();
    for nu in [0.5, 1.0, 2.0, 3.7, -1.3, 8.0] {
        let eps = [1e-2, 1e-3, 1e-4];
        let v: Vec<C64> = eps.iter().map(|&e| s.h(C64::new(e, nu)).unwrap()).collect();
        // quadratic through the three samples, evaluated at ε = 0
        let (x0, x1, x2) = (eps[0], eps[1], eps[2]);
        let l0 = x1 * x2 / ((x0 - x1) * (x0 - x2));
        let l1 = x0 * x2 / ((x1 - x0) * (x1 - x2));
        let l2 = x0 * x1 / ((x2 - x0) * (x2 - x1));
        let limit = v[0] * l0 + v[1] * l1 + v[2] * l2;
        let closed = s.h_boundary(nu).unwrap();
        assert!((limit - closed).norm() < 1e-6, "ν = {nu}: {limit} vs {closed}");
        if nu > 0.0 {
            assert!(closed.im < 0.0);
        }
    }
}

#[test]
fn boundary_value_is_conjugate_symmetric() {
    let s = symbol();
    for nu in [0.3, 2.2, 15.0] {
        let a = s.h_boundary(nu).unwrap();
        let b = s.h_boundary(-nu).unwrap();
        assert!((a - b.conj()).norm() < 1e-14 * a.norm());
    }
}

#[test]
fn determinant_is_cube_of_block() {
    let s = symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let lam = C64::new(rng.random_range(0.0..10.0), rng.random_range(-10.0..10.0));
        let m = s.matrices(lam).unwrap();
        let direct = m.m.lu().determinant();
        let b3 = m.b * m.b * m.b;
        assert!((direct - b3).norm() < 1e-10 * b3.norm(), "{lam}: {direct} vs {b3}");
        assert!((m.det - b3).norm() <= 1e-15 * b3.norm());
        assert_eq!(m.big_h, nalgebra::SMatrix::<C64, 3, 3>::identity() * m.h);
        let prod = m.m * m.m_inv.unwrap();
        assert!((prod - Matrix6::identity()).norm() < 1e-10);
    }
}

#[test]
fn determinant_at_zero_and_infinity() {
    let s = symbol();
    let w0sq = s.omega0_sq();
    let m = s.matrices(C64::new(0.0, 0.0)).unwrap();
    assert!((m.block_det() - w0sq).norm() < 1e-12 * w0sq);
    assert!((m.det - w0sq.powi(3)).norm() < 1e-12 * w0sq.powi(3));
    let lam = C64::new(1e3, 0.0);
    let m = s.matrices(lam).unwrap();
    let free = (lam * lam + s.omega_sq()).powi(3);
    assert!((m.det / free - 1.0).norm() < 1e-6);
}

#[test]
fn resonance_is_flagged() {
    let m = StabilityMatrices::assemble(C64::new(0.0, 1.0), C64::new(1.0, 0.0), 2.0);
    assert!(m.singular);
    assert!(m.m_inv.is_none());
}

#[test]
fn scan_passes_for_default_charge() {
    let s = symbol();
    let scan = s.scan_nonvanishing(40.0, 801).unwrap();
    assert!(scan.pass, "min |b| = {} at {}", scan.min_abs, scan.argmin);
    assert!(scan.min_abs >= 0.5 * s.omega0_sq());
    assert!(scan.im_h_negative);
    let mid = scan.nu.iter().position(|&v| v == 0.0).unwrap();
    assert!((scan.b[mid] - s.omega0_sq()).norm() < 1e-12 * s.omega0_sq());
    for (&v, b) in scan.nu.iter().zip(&scan.b) {
        if v != 0.0 && s.charge().rho_hat(v) != 0.0 {
            assert_eq!(b.im.signum(), v.signum());
        }
    }
    let mut csv = Vec::new();
    scan.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("nu,Re_b,Im_b,abs_b\n"));
    assert_eq!(text.lines().count(), 802);
}

#[test]
fn scan_reports_for_uniform_ball() {
    let rho = ChargeDensity::with_total_charge(ProfileKind::UniformBall, 1.0, 6.0).unwrap();
    let s = StabilitySymbol::new(&rho, 9.0).unwrap();
    let scan = s.scan_nonvanishing(20.0, 201).unwrap();
    assert!(scan.min_abs.is_finite());
    assert_eq!(scan.nu.len(), 201);
}

#[test]
fn green_kernel_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let lam = C64::new(rng.random_range(0.5..3.0), rng.random_range(-2.0..2.0));
        let g = GreenFunctionKernel::new(lam).unwrap();
        for k in [0.0, 0.5, 1.7, 4.0] {
            let gh = g.transform(k);
            assert!(((k * k + lam * lam) * gh - 1.0).norm() < 1e-14);
            let q = g.transform_quadrature(k).unwrap();
            assert!((q - gh).norm() < 1e-8 * gh.norm(), "{lam} {k}: {q} vs {gh}");
        }
        let r = 0.7;
        assert!((g.value(r) * 4.0 * PI * r - (-lam * r).exp()).norm() < 1e-14);
    }
    assert!(GreenFunctionKernel::new(C64::new(0.0, 1.0)).is_err());
}

/// `G'' = −ω²G + ∫₀ᵗ m(t−s)G(s)ds`, `G(0) = 0`, `G'(0) = 1`, with
/// `m(t) = (6π²)^{-1}∫k³ρ̂² sin(kt) dk`, by Störmer steps and trapezoid memory.
fn memory_oracle(s: &StabilitySymbol, t_end: f64, dt: f64) -> Vec<f64> {
    let rho = s.charge();
    let n = (t_end / dt).round() as usize;
    let m: Vec<f64> = (0..=n + 1)
        .map(|i| {
            let t = i as f64 * dt;
            let integrand = |k: f64| {
                let r = rho.rho_hat(k);
                k * k * k * r * r * (k * t).sin()
            };
            RADIAL_K1_FACTOR * composite_gauss(&integrand, 0.0, 60.0, 600)
        })
        .collect();
    let w2 = s.omega_sq();
    let mut g = vec![0.0; n + 2];
    g[1] = dt - w2 * dt.powi(3) / 6.0;
    for i in 1..=n {
        let mem: f64 = (0..=i)
            .map(|j| {
                let w = if j == 0 || j == i { 0.5 } else { 1.0 };
                w * m[i - j] * g[j]
            })
            .sum::<f64>()
            * dt;
        g[i + 1] = 2.0 * g[i] - g[i - 1] + dt * dt * (-w2 * g[i] + mem);
    }
    g
}

#[test]
fn kernel_reproduces_memory_equation() {
    let s = symbol();
    let omega = s.omega_sq().sqrt();
    let kernel = KernelL::new(&s, 40.0 * omega, 20.0).unwrap();
    let t_end = 8.0;
    let dt = 0.004;
    let coarse = memory_oracle(&s, t_end, dt);
    let fine = memory_oracle(&s, t_end, dt / 2.0);
    // Richardson on the O(dt²) Störmer error
    let g = |i: usize| (4.0 * fine[2 * i] - coarse[i]) / 3.0;
    let gd = |i: usize| {
        let c = (coarse[i + 1] - coarse[i - 1]) / (2.0 * dt);
        let f = (fine[2 * i + 1] - fine[2 * i - 1]) / dt;
        (4.0 * f - c) / 3.0
    };
    let gdd = |i: usize| {
        let c = (coarse[i + 1] - 2.0 * coarse[i] + coarse[i - 1]) / (dt * dt);
        let f = (fine[2 * i + 1] - 2.0 * fine[2 * i] + fine[2 * i - 1]) * 4.0 / (dt * dt);
        (4.0 * f - c) / 3.0
    };
    for t in [0.5, 1.0, 2.0, 3.5, 5.0, 7.5] {
        let i = (t / dt).round() as usize;
        let ([qp, qq, pq], _) = kernel.entries(t).unwrap();
        assert!((qp - g(i)).abs() < 1e-4, "t {t}: 1/b {qp} vs {}", g(i));
        assert!((qq - gd(i)).abs() < 1e-4, "t {t}: λ/b {qq} vs {}", gd(i));
        assert!((pq - gdd(i)).abs() < 1e-4 * omega, "t {t}: λ²/b {pq} vs {}", gdd(i));
    }
}

#[test]
fn kernel_decays_fast_and_is_real() {
    let s = symbol();
    let omega = s.omega_sq().sqrt();
    let kernel = KernelL::new(&s, 40.0 * omega, 60.0).unwrap();
    let times: Vec<f64> = (0..=100).map(|i| 0.5 * i as f64).collect();
    let mut norms = Vec::new();
    for &t in &times {
        let (_, im) = kernel.entries(t).unwrap();
        assert!(im < 1e-10, "imaginary residue {im:e} at {t}");
        norms.push(kernel.at(t).unwrap().norm());
    }
    let fit = DecayFit::fit(&times, &norms, 5.0, 50.0).unwrap();
    assert!(fit.exponent <= -3.0, "exponent {}", fit.exponent);
    assert!(matches!(kernel.entries(kernel.t_limit() + 1.0), Err(Error::Nyquist { .. })));
    assert!(kernel.entries(-1.0).is_err());
}

#[test]
fn kernel_table_matches_pointwise_entries() {
    let s = symbol();
    let kernel = KernelL::new(&s, 40.0 * s.omega_sq().sqrt(), 20.0).unwrap();
    let (times, vals) = kernel.table().unwrap();
    for i in (0..times.len()).step_by(times.len() / 7) {
        let (e, _) = kernel.entries(times[i]).unwrap();
        for j in 0..3 {
            assert!((e[j] - vals[i][j]).abs() < 1e-10, "t {} entry {j}", times[i]);
        }
    }
}

fn driving_setup() -> (GridOps, GridCharge) {
    let ops = GridOps::from_params(64, 16.0).unwrap();
    let charge = GridCharge::new(&ops, &ChargeDensity::default_bump(), [0.0; 3]);
    (ops, charge)
}

#[test]
fn driving_force_vanishes_for_zero_and_radial_data() {
    let (ops, charge) = driving_setup();
    let g = ops.grid();
    let times = [0.0, 1.0, 3.0];
    for f in driving_f(&ops, &charge, &FieldPair::zeros(g), &times) {
        assert_eq!(f, [0.0; 3]);
    }
    let radial = FieldPair {
        psi: g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()),
        pi: g.sample(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp()),
    };
    for f in driving_f(&ops, &charge, &radial, &times) {
        assert!(f.iter().all(|v| v.abs() < 1e-12), "{f:?}");
    }
}

#[test]
fn driving_force_decays() {
    let (ops, charge) = driving_setup();
    let g = ops.grid();
    let sigma = 1.5;
    // ψ₀ ~ r⁻³ and π₀ ~ r⁻⁴ lie in the weighted space with weight (1+|x|)^σ
    let f0 = FieldPair {
        psi: g.sample(|x| x[0] * (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powi(-2)),
        pi: g.sample(|x| x[1] * (1.0 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).powf(-2.5)),
    };
    let times: Vec<f64> = (0..=60).map(|i| 0.25 * i as f64).collect();
    let f = driving_f(&ops, &charge, &f0, &times);
    let norms: Vec<f64> = f.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).collect();
    let fit = DecayFit::fit(&times, &norms, 5.0, 15.0 - charge_radius()).unwrap();
    assert!(fit.exponent <= -0.8 * sigma, "exponent {}", fit.exponent);
}

fn charge_radius() -> f64 {
    ChargeDensity::default_bump().radius()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn h_is_conjugate_symmetric(re in 0.05f64..8.0, im in -8.0f64..8.0) {
        let s = symbol();
        let a = s.h(C64::new(re, im)).unwrap();
        let b = s.h(C64::new(re, -im)).unwrap();
        prop_assert!((a - b.conj()).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn h_is_bounded_by_omega1_sq_on_real_axis(re in 0.01f64..50.0) {
        let s = symbol();
        let h = s.h(C64::new(re, 0.0)).unwrap();
        prop_assert!(h.im.abs() < 1e-14 * s.omega1_sq());
        prop_assert!(h.re > 0.0 && h.re < s.omega1_sq());
    }
}
