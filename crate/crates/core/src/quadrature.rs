//! One-dimensional quadrature.
//!
//! Two drivers are provided:
//!
//! * [`adaptive_gauss`]: composite Gauss–Legendre on uniform panels, doubling the
//!   panel count until two successive refinements agree. Used for the smooth
//!   radial profiles on `[0, R]`.
//! * [`gauss_kronrod`]: globally adaptive bisection with a 7/15-point
//!   Gauss–Kronrod pair, for integrands with sharp interior features (resolvent
//!   integrands near the real axis).

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Integral value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussRule { nodes, weights }
    }

    /// Shared 16-point rule.
    pub fn g16() -> &'static GaussRule {
        static RULE: OnceLock<GaussRule> = OnceLock::new();
        RULE.get_or_init(|| GaussRule::new(16))
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + h * x);
        }
        s * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule with `panels` equal panels.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let rule = GaussRule::g16();
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + w * i as f64;
            rule.integrate(f, lo, lo + w)
        })
        .sum()
}

const MAX_DOUBLINGS: u32 = 14;

/// Composite Gauss–Legendre, refined until successive panel doublings agree to
/// `rel_tol` (relative) or `abs_tol` (absolute).
pub fn adaptive_gauss<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let mut panels = 2usize;
    let mut prev = composite_gauss(&f, a, b, panels);
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let cur = composite_gauss(&f, a, b, panels);
        let err = (cur - prev).abs();
        if err <= rel_tol * cur.abs() || err <= abs_tol {
            return Ok(Estimate { value: cur, error: err });
        }
        prev = cur;
    }
    let cur = composite_gauss(&f, a, b, panels * 2);
    Err(Error::Quadrature {
        a,
        b,
        value: cur,
        error: (cur - prev).abs(),
    })
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).norm())
}

const MAX_INTERVALS: usize = 4000;

/// Globally adaptive Gauss–Kronrod for complex-valued integrands.
///
/// Bisects the interval with the largest local error until the summed error is
/// below `max(abs_tol, rel_tol * |I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<(Complex64, f64)> {
    if a == b {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: Complex64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok((total, err));
        }
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                a,
                b,
                value: total.norm(),
                error: err,
            });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let total: Complex64 = intervals.iter().map(|iv| iv.2).sum();
            return Err(Error::Quadrature {
                a,
                b,
                value: total.norm(),
                error: err,
            });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Real-valued wrapper around [`gauss_kronrod`].
pub fn gauss_kronrod_real<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Estimate> {
    let (v, e) = gauss_kronrod(|x| Complex64::new(f(x), 0.0), a, b, abs_tol, rel_tol)?;
    Ok(Estimate { value: v.re, error: e })
}
