use std::f64::consts::PI;

use proptest::prelude::*;
use wavepart_core::field::{FieldPair, GridOps};
use wavepart_core::grid::SpectralGrid;
use wavepart_core::norms::*;
use wavepart_core::quadrature::adaptive_gauss;

fn r2(x: [f64; 3]) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

#[test]
fn zero_field_has_zero_norms() {
    let ops = GridOps::from_params(8, 2.0).unwrap();
    let f = FieldPair::zeros(ops.grid());
    for a in [-1.5, 0.0, 2.0] {
        assert_eq!(l2_alpha_norm(&ops, &f.psi, a), 0.0);
        assert_eq!(field_norm_f_alpha(&ops, &f, a), 0.0);
        assert_eq!(state_norm_e_alpha(&ops, &f, [0.0; 3], [0.0; 3], a), 0.0);
    }
}

#[test]
fn weighted_gaussian_matches_radial_quadrature() {
    let ops = GridOps::from_params(64, 8.0).unwrap();
    let f = ops.grid().sample(|x| (-r2(x) / 2.0).exp());
    let oracle = adaptive_gauss(|r| 4.0 * PI * (1.0 + r).powi(2) * (-r * r).exp() * r * r, 0.0, 12.0, 1e-14, 1e-13)
        .unwrap()
        .value
        .sqrt();
    let err = |n: usize| {
        let ops = GridOps::from_params(n, 8.0).unwrap();
        let f = ops.grid().sample(|x| (-r2(x) / 2.0).exp());
        (l2_alpha_norm(&ops, &f, 1.0) - oracle).abs() / oracle
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(fine < 1e-4 && fine < coarse / 3.0, "{coarse:e} {fine:e}");
    assert!((l2_alpha_norm(&ops, &f, 0.0) - PI.powf(0.75)).abs() < 1e-10);
}

#[test]
fn weighted_gradient_matches_finite_differences() {
    let ops = GridOps::from_params(64, 8.0).unwrap();
    let g = ops.grid();
    let f = |x: [f64; 3]| (-(x[0] - 0.3).powi(2) - x[1] * x[1] - 1.5 * x[2] * x[2]).exp();
    let weighted = |x: [f64; 3]| (1.0 + r2(x).sqrt()) * f(x);
    let d = 1e-5;
    let mut s = 0.0;
    for idx in 0..g.len() {
        let x = g.point(idx);
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += d;
            xm[a] -= d;
            let dv = (weighted(xp) - weighted(xm)) / (2.0 * d);
            s += dv * dv;
        }
    }
    // the weight has a conical point at the origin, where |∇w| = 1 in every direction
    s += f([0.0; 3]).powi(2);
    let oracle = (s * g.cell_volume()).sqrt();
    let v = h1dot_alpha_norm(&ops, &g.sample(f), 1.0);
    assert!((v - oracle).abs() < 1e-6 * oracle, "{v} vs {oracle}");
}

#[test]
fn single_mode_seminorm() {
    let l = 3.0;
    let ops = GridOps::from_params(16, l).unwrap();
    let f = ops.grid().sample(|x| (PI * x[0] / l).sin());
    let c = ops.grid().sample(|x| (PI * x[0] / l).cos());
    let expect = PI / l * l2_alpha_norm(&ops, &c, 0.0);
    assert!((h1dot_alpha_norm(&ops, &f, 0.0) - expect).abs() < 1e-12 * expect);
}

#[test]
fn particle_parts_of_state_norm() {
    let ops = GridOps::from_params(8, 2.0).unwrap();
    let f = FieldPair::zeros(ops.grid());
    let n = state_norm_e_alpha(&ops, &f, [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], -1.5);
    assert_eq!(n, 3.0);
    let c = 2.5;
    let nc = state_norm_e_alpha(&ops, &f, [c, 0.0, 0.0], [0.0, 2.0 * c, 0.0], -1.5);
    assert!((nc - c * n).abs() < 1e-15);
}

#[test]
fn pure_momentum_field_pair() {
    let ops = GridOps::from_params(16, 4.0).unwrap();
    let pi = ops.grid().sample(|x| (-r2(x)).exp() * (1.0 + x[1]));
    let f = FieldPair {
        psi: vec![0.0; pi.len()],
        pi: pi.clone(),
    };
    for a in [-1.5, 0.0, 1.5] {
        assert!((field_norm_f_alpha(&ops, &f, a) - l2_alpha_norm(&ops, &pi, a)).abs() < 1e-15);
    }
}

#[test]
fn negative_weights_shrink_and_decrease() {
    let ops = GridOps::from_params(32, 8.0).unwrap();
    let f = ops.grid().sample(|x| {
        let r = r2(x).sqrt();
        if r >= 1.0 {
            (-(r - 3.0).powi(2)).exp()
        } else {
            0.0
        }
    });
    let plain = l2_alpha_norm(&ops, &f, 0.0);
    let mut last = plain;
    for a in [-0.5, -1.0, -1.5, -2.0, -3.0] {
        let v = l2_alpha_norm(&ops, &f, a);
        assert!(v <= plain);
        assert!(v <= last);
        last = v;
    }
}

#[test]
fn norms_converge_under_refinement() {
    let f = |x: [f64; 3]| (-r2(x)).exp() * (1.0 + 0.5 * x[0]);
    let norms = |n: usize| {
        let ops = GridOps::from_params(n, 6.0).unwrap();
        let g = ops.grid();
        let pair = FieldPair {
            psi: g.sample(f),
            pi: g.sample(|x| f([x[1], x[2], x[0]])),
        };
        [-1.5, 0.0, 1.5].map(|a| field_norm_f_alpha(&ops, &pair, a))
    };
    let [a, b, c] = [32, 64, 128].map(norms);
    for i in 0..3 {
        let (d1, d2) = ((a[i] - b[i]).abs(), (b[i] - c[i]).abs());
        assert!(d2 < 1e-3 * c[i], "{:?} {:?}", b, c);
        assert!(d2 <= d1 / 8.0 || d1 < 1e-12 * c[i], "{d1:e} {d2:e}");
    }
}

#[test]
fn spectral_and_real_space_forms_agree() {
    let ops = GridOps::from_params(16, 4.0).unwrap();
    let g = ops.grid();
    let pair = FieldPair {
        psi: g.sample(|x| (-r2(x)).exp() * x[2]),
        pi: g.sample(|x| (-2.0 * r2(x)).exp()),
    };
    let fh = ops.pair_to_spectral(&pair);
    let q = [0.1, 0.2, 0.3];
    let p = [-0.3, 0.0, 0.4];
    let a = state_norm_e_alpha(&ops, &pair, q, p, -1.5);
    let b = state_norm_e_alpha_spectral(&ops, &fh, q, p, -1.5);
    assert!((a - b).abs() < 1e-12 * a);
    let e = energy_norm_spectral(&ops, &fh);
    let e_real = h1dot_alpha_norm(&ops, &pair.psi, 0.0) + l2_alpha_norm(&ops, &pair.pi, 0.0);
    assert!((e - e_real).abs() < 1e-12 * e);
}

fn random_pair(grid: &SpectralGrid, c: &[f64]) -> FieldPair {
    let centers = [[0.5, -0.3, 0.2], [-1.0, 0.4, 0.8], [0.1, 1.2, -0.6]];
    let f = |x: [f64; 3], off: usize| {
        (0..3)
            .map(|i| {
                let y = [x[0] - centers[i][0], x[1] - centers[i][1], x[2] - centers[i][2]];
                c[i + off] * (-r2(y)).exp()
            })
            .sum::<f64>()
    };
    FieldPair {
        psi: grid.sample(|x| f(x, 0)),
        pi: grid.sample(|x| f(x, 3)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn field_norm_is_a_norm(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-2.0f64..2.0, 6),
        s in -3.0f64..3.0,
        alpha in -2.0f64..2.0,
    ) {
        let ops = GridOps::from_params(16, 4.0).unwrap();
        let fa = random_pair(ops.grid(), &a);
        let fb = random_pair(ops.grid(), &b);
        let na = field_norm_f_alpha(&ops, &fa, alpha);
        let nb = field_norm_f_alpha(&ops, &fb, alpha);
        prop_assert!(na >= 0.0);
        let nsum = field_norm_f_alpha(&ops, &fa.add(&fb), alpha);
        prop_assert!(nsum <= na + nb + 1e-12 * (na + nb));
        let ns = field_norm_f_alpha(&ops, &fa.scaled(s), alpha);
        prop_assert!((ns - s.abs() * na).abs() <= 1e-12 * na.max(1e-300));
    }

    #[test]
    fn state_norm_triangle_inequality(
        a in prop::collection::vec(-2.0f64..2.0, 6),
        b in prop::collection::vec(-2.0f64..2.0, 6),
        qa in prop::array::uniform3(-1.0f64..1.0),
        qb in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let ops = GridOps::from_params(16, 4.0).unwrap();
        let fa = random_pair(ops.grid(), &a);
        let fb = random_pair(ops.grid(), &b);
        let na = state_norm_e_alpha(&ops, &fa, qa, qb, -1.5);
        let nb = state_norm_e_alpha(&ops, &fb, qb, qa, -1.5);
        let sum = state_norm_e_alpha(&ops, &fa.add(&fb), [0, 1, 2].map(|i| qa[i] + qb[i]), [0, 1, 2].map(|i| qa[i] + qb[i]), -1.5);
        prop_assert!(sum <= na + nb + 1e-12 * (na + nb));
    }
}
