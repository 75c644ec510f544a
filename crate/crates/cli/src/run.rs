//! Experiment drivers: each run returns its criteria, summary numbers and
//! artifacts, and [`write_outputs`] emits them.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde_json::{json, Map, Value};
use wavepart_core::charge::{check_wiener, ChargeDensity};
use wavepart_core::data::MultipoleData;
use wavepart_core::field::GridOps;
use wavepart_core::fit::DecayFit;
use wavepart_core::free_wave::{evolve_free_spectral, FIT_START};
use wavepart_core::io::write_spectral_dump;
use wavepart_core::nonlinear::{NonlinearSystem, RunOptions, SystemState};
use wavepart_core::norms::field_norm_f_alpha_spectral;
use wavepart_core::particle::Scheme;
use wavepart_core::potential::{ExternalPotential, Monomial};
use wavepart_core::scattering::run_scattering;
use wavepart_core::stability::StabilitySymbol;
use wavepart_core::Error;

use crate::config::{Experiment, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn criterion(name: &str, pass: bool, detail: String) -> Criterion {
    Criterion {
        name: name.into(),
        pass,
        detail,
    }
}

/// A file produced by a run, written only after the run completes.
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct Outcome {
    pub experiment: Experiment,
    pub grid: Option<(usize, f64)>,
    pub results: Map<String, Value>,
    pub criteria: Vec<Criterion>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    fn new(experiment: Experiment, grid: Option<(usize, f64)>) -> Self {
        Outcome {
            experiment,
            grid,
            results: Map::new(),
            criteria: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.into(), v.into());
    }

    fn attach<F>(&mut self, name: &str, write: F) -> Result<(), Error>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), Error>,
    {
        let mut bytes = Vec::new();
        write(&mut bytes)?;
        self.artifacts.push(Artifact {
            name: name.into(),
            bytes,
        });
        Ok(())
    }
}

/// Library errors that reflect the configuration rather than the outcome.
pub fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::CausalWindow { .. }
            | Error::UnstableStep { .. }
            | Error::NotCritical { .. }
            | Error::Anisotropic(_)
            | Error::GridMismatch(_)
            | Error::Nyquist { .. }
    )
}

pub fn charge(cfg: &RunConfig) -> Result<ChargeDensity, Error> {
    let kind = wavepart_core::charge::ProfileKind::parse(&cfg.charge.kind)?;
    match cfg.charge.amplitude {
        Some(a) => ChargeDensity::new(kind, cfg.charge.radius, a),
        None => ChargeDensity::with_total_charge(kind, cfg.charge.radius, cfg.total_charge()),
    }
}

/// The potential and its reference critical point.
pub fn potential(cfg: &RunConfig) -> Result<(ExternalPotential, [f64; 3]), Error> {
    let p = &cfg.potential;
    if p.kind == "isotropic-quadratic" {
        return Ok((ExternalPotential::isotropic_quadratic(p.omega0)?, [0.0; 3]));
    }
    let terms = p
        .terms
        .iter()
        .map(|r| Monomial {
            coef: r[0],
            exps: [r[1] as u32, r[2] as u32, r[3] as u32],
        })
        .collect();
    Ok((ExternalPotential::polynomial(terms, p.lower_bound, cfg.seed)?, p.q_star))
}

fn multipole(cfg: &RunConfig) -> MultipoleData {
    MultipoleData::random(cfg.data.radius, cfg.data.center, cfg.seed)
}

fn run_options(cfg: &RunConfig) -> Result<RunOptions, Error> {
    Ok(RunOptions {
        scheme: Scheme::parse(&cfg.dynamics.scheme)?,
        sample_every: cfg.dynamics.sample_every,
        record_positions: false,
    })
}

pub fn run(cfg: &RunConfig, exp: Experiment) -> Result<Outcome, Error> {
    match exp {
        Experiment::WienerScan => wiener_scan(cfg),
        Experiment::StabilityScan => stability_scan(cfg),
        Experiment::FreeDecay => free_decay(cfg),
        Experiment::LinearDecay => linear_decay(cfg),
        Experiment::NonlinearDecay => nonlinear_decay(cfg),
        Experiment::Scattering => scattering(cfg),
    }
}

fn wiener_scan(cfg: &RunConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new(Experiment::WienerScan, None);
    let rho = charge(cfg)?;
    let w = &cfg.wiener;
    let rep = check_wiener(&rho, w.k_max, w.samples)?;
    out.set("k_max", rep.k_max);
    out.set("min_abs_rho_hat", rep.min_abs);
    out.set("argmin", rep.argmin);
    out.set("tolerance", rep.tolerance);
    out.set("first_zero", rep.first_zero);
    let detail = match rep.first_zero {
        Some(k) => format!("rho_hat vanishes at k = {k:.10} in [0, {}]", rep.k_max),
        None => format!(
            "min |rho_hat| = {:.6e} at k = {:.6} over [0, {}], tolerance {:.1e}",
            rep.min_abs, rep.argmin, rep.k_max, rep.tolerance
        ),
    };
    out.criteria.push(criterion("wiener condition", rep.pass, detail));
    let n = rep.n_samples;
    out.attach("wiener_scan.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "k,rho_hat")?;
        for i in 0..n {
            let k = w.k_max * i as f64 / (n - 1) as f64;
            writeln!(buf, "{k:.10},{:.17e}", rho.rho_hat(k))?;
        }
        Ok(())
    })?;
    Ok(out)
}

fn stability_scan(cfg: &RunConfig) -> Result<Outcome, Error> {
    let mut out = Outcome::new(Experiment::StabilityScan, None);
    let rho = charge(cfg)?;
    let (v, q_star) = potential(cfg)?;
    if !v.is_stable_point(q_star)? {
        return Err(Error::InvalidArgument(format!("q_star = {q_star:?} is not a stable critical point")));
    }
    let w0 = v.omega0_at(q_star)?;
    let sym = StabilitySymbol::new(&rho, w0 * w0)?;
    let s = &cfg.stability;
    let scan = sym.scan_nonvanishing(s.nu_max, s.samples)?;
    out.set("omega0_sq", sym.omega0_sq());
    out.set("omega1_sq", sym.omega1_sq());
    out.set("nu_max", s.nu_max);
    out.set("min_abs_b", scan.min_abs);
    out.set("argmin", scan.argmin);
    out.set("threshold", scan.threshold);

    let mut gap: f64 = 0.0;
    for nu in [0.5, 1.0, 2.0, 4.0] {
        let eps = [1e-2, 1e-3, 1e-4];
        let h: Vec<C64> = eps.iter().map(|&e| sym.h(C64::new(e, nu))).collect::<Result<_, _>>()?;
        let (x0, x1, x2) = (eps[0], eps[1], eps[2]);
        let limit = h[0] * (x1 * x2 / ((x0 - x1) * (x0 - x2)))
            + h[1] * (x0 * x2 / ((x1 - x0) * (x1 - x2)))
            + h[2] * (x0 * x1 / ((x2 - x0) * (x2 - x1)));
        gap = gap.max((limit - sym.h_boundary(nu)?).norm());
    }
    out.set("boundary_value_gap", gap);

    out.criteria.push(criterion(
        "b(i nu + 0) bounded away from zero",
        scan.pass,
        format!(
            "min |b| = {:.6} at nu = {:.4}, threshold {:.6}",
            scan.min_abs, scan.argmin, scan.threshold
        ),
    ));
    out.criteria.push(criterion(
        "Im h(i nu + 0) < 0 for nu > 0",
        scan.im_h_negative,
        format!("over (0, {}]", s.nu_max),
    ));
    out.criteria.push(criterion(
        "boundary value matches epsilon limit",
        gap < 1e-6,
        format!("max gap {gap:.3e}"),
    ));
    out.attach("stability_scan.csv", |buf| scan.write_csv(buf))?;
    Ok(out)
}

fn free_decay(cfg: &RunConfig) -> Result<Outcome, Error> {
    let exp = Experiment::FreeDecay;
    let (n, l) = cfg.grid_for(exp);
    let mut out = Outcome::new(exp, Some((n, l)));
    let ops = GridOps::from_params(n, l)?;
    let window = cfg.window_for(exp);
    let t_final = cfg.t_final_for(exp);
    window.check(t_final)?;
    let sigma = cfg.dynamics.sigma;
    let fh0 = ops.pair_to_spectral(&multipole(cfg).fields(ops.grid()).scaled(cfg.dynamics.d0));
    let step = cfg.dynamics.dt * cfg.dynamics.sample_every as f64;
    let count = (t_final / step + 1e-9).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    let norms: Vec<f64> = times
        .iter()
        .map(|&t| {
            let mut fh = fh0.clone();
            evolve_free_spectral(&ops, &mut fh, t);
            field_norm_f_alpha_spectral(&ops, &fh, -sigma)
        })
        .collect();
    let fit = DecayFit::fit(&times, &norms, FIT_START, t_final)?;
    out.set("t_window", window.t_window());
    out.set("exponent", fit.exponent);
    out.set("residual", fit.residual);
    out.set("prefactor", fit.prefactor);
    out.criteria.push(criterion(
        "free decay exponent",
        fit.exponent <= -0.8 * sigma,
        format!("exponent {:.4} vs gate {:.4}", fit.exponent, -0.8 * sigma),
    ));
    out.criteria.push(criterion(
        "free decay fit residual",
        fit.residual < 0.1,
        format!("residual {:.4}", fit.residual),
    ));
    out.attach("free_decay.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "t,F_minus_sigma_norm")?;
        for (t, v) in times.iter().zip(&norms) {
            writeln!(buf, "{t:.10},{v:.17e}")?;
        }
        Ok(())
    })?;
    Ok(out)
}

fn nonlinear_system<'a>(cfg: &RunConfig, ops: &'a GridOps) -> Result<NonlinearSystem<'a>, Error> {
    let rho = charge(cfg)?;
    let (v, q_star) = potential(cfg)?;
    NonlinearSystem::new(ops, &rho, &v, q_star)
}

fn linear_decay(cfg: &RunConfig) -> Result<Outcome, Error> {
    let exp = Experiment::LinearDecay;
    let (n, l) = cfg.grid_for(exp);
    let mut out = Outcome::new(exp, Some((n, l)));
    let ops = GridOps::from_params(n, l)?;
    let sys = nonlinear_system(cfg, &ops)?;
    let lin = sys.linearization()?;
    let sigma = cfg.dynamics.sigma;
    let z0 = multipole(cfg).deviation_with_closeness(&ops, sigma, cfg.dynamics.d0);
    let window = cfg.window_for(exp);
    let t_final = cfg.t_final_for(exp);
    let rep = lin.verify_decay(&z0, sigma, t_final, cfg.dynamics.dt, cfg.dynamics.sample_every, window)?;
    let (pq, z) = (&rep.particle_fit, &rep.state_fit);
    out.set("t_final", t_final);
    out.set("particle_exponent", pq.exponent);
    out.set("state_exponent", z.exponent);
    out.set("h0_drift", rep.trajectory.energy_drift());
    out.criteria.push(criterion(
        "|Q|+|P| decay exponent",
        pq.exponent <= -0.8 * sigma,
        format!("exponent {:.4} vs gate {:.4}", pq.exponent, -0.8 * sigma),
    ));
    out.criteria.push(criterion(
        "state decay exponent",
        z.exponent <= -0.8 * (sigma - 1.0),
        format!("exponent {:.4} vs gate {:.4}", z.exponent, -0.8 * (sigma - 1.0)),
    ));
    out.attach("linear_trajectory.csv", |buf| rep.trajectory.write_csv(buf))?;
    Ok(out)
}

fn nonlinear_decay(cfg: &RunConfig) -> Result<Outcome, Error> {
    let exp = Experiment::NonlinearDecay;
    let (n, l) = cfg.grid_for(exp);
    let mut out = Outcome::new(exp, Some((n, l)));
    let ops = GridOps::from_params(n, l)?;
    let sys = nonlinear_system(cfg, &ops)?;
    let sigma = cfg.dynamics.sigma;
    let x0 = multipole(cfg).deviation_with_closeness(&ops, sigma, cfg.dynamics.d0);
    let y0 = SystemState::from_deviation(sys.q_star(), &x0);
    let window = cfg.window_for(exp);
    let t_final = cfg.t_final_for(exp);
    let eps = cfg.epsilon();
    let rep = sys.verify_decay(&y0, sigma, t_final, cfg.dynamics.dt, run_options(cfg)?, window, eps)?;
    let m = &rep.majorant;
    out.set("t_final", t_final);
    out.set("exponent", rep.fit.exponent);
    out.set("residual", rep.fit.residual);
    out.set("majorant_epsilon", eps);
    out.set("majorant_plateau", m.plateau());
    out.set("t_star", m.t_star);
    out.set("energy_drift", rep.trajectory.energy_drift());
    out.set("config_hash", rep.trajectory.config_hash.clone());
    out.criteria.push(criterion(
        "nonlinear decay exponent",
        rep.fit.exponent <= -0.8 * sigma,
        format!("exponent {:.4} vs gate {:.4}", rep.fit.exponent, -0.8 * sigma),
    ));
    out.criteria.push(criterion(
        "majorant stays below epsilon",
        m.t_star.is_none(),
        match m.t_star {
            Some(t) => format!("m(t) exceeds {eps:e} at t = {t}"),
            None => format!("plateau {:.4e} below {eps:e}", m.plateau()),
        },
    ));
    out.attach("nonlinear_trajectory.csv", |buf| rep.trajectory.write_csv(buf))?;
    out.attach("majorant.csv", |buf| {
        use std::io::Write;
        writeln!(buf, "t,majorant")?;
        for (t, v) in m.times.iter().zip(&m.values) {
            writeln!(buf, "{t:.10},{v:.17e}")?;
        }
        Ok(())
    })?;
    Ok(out)
}

fn scattering(cfg: &RunConfig) -> Result<Outcome, Error> {
    let exp = Experiment::Scattering;
    let (n, l) = cfg.grid_for(exp);
    let mut out = Outcome::new(exp, Some((n, l)));
    let ops = GridOps::from_params(n, l)?;
    let sys = nonlinear_system(cfg, &ops)?;
    let sigma = cfg.dynamics.sigma;
    let x0 = multipole(cfg).deviation_with_closeness(&ops, sigma, cfg.dynamics.d0);
    let y0 = SystemState::from_deviation(sys.q_star(), &x0);
    let t_max = cfg.t_final_for(exp);
    let checkpoints: Vec<f64> = cfg.scattering.checkpoints.iter().copied().filter(|&t| t <= t_max).collect();
    let rep = run_scattering(
        &sys,
        &y0,
        sigma,
        cfg.dynamics.dt,
        Some(t_max),
        run_options(cfg)?,
        cfg.window_for(exp),
        &checkpoints,
    )?;
    let res = &rep.result;
    let diffs = res.cauchy_differences(&ops);
    let gate = -0.8 * (sigma - 1.0);
    let tail = res.tail_fit.as_ref().map(|f| f.exponent);
    let remainder = rep.remainder.fit.exponent;
    out.set("t_max", t_max);
    out.set("cauchy_differences", diffs.clone());
    out.set("tail_exponent", tail);
    out.set("remainder_exponent", remainder);
    out.set("warnings", res.warnings.clone());
    out.criteria.push(criterion(
        "partial integrals are Cauchy",
        diffs.windows(2).all(|w| w[1] < w[0]),
        format!("differences {diffs:?}"),
    ));
    out.criteria.push(criterion(
        "tail decay exponent",
        tail.is_some_and(|e| e <= gate),
        format!("exponent {tail:?} vs gate {gate:.4}"),
    ));
    out.criteria.push(criterion(
        "remainder decay exponent",
        remainder <= gate,
        format!("exponent {remainder:.4} vs gate {gate:.4}"),
    ));
    out.attach("phi_plus.bin", |buf| write_spectral_dump(buf, &ops, &res.phi_plus))?;
    out.attach("remainder.csv", |buf| rep.remainder.write_csv(buf))?;
    out.attach("scattering_tail.csv", |buf| res.write_tail_csv(buf))?;
    Ok(out)
}

/// Writes the artifacts and `manifest.json` into `dir`.
pub fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    config_text: Option<&str>,
    out: &Outcome,
    workers: usize,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for a in &out.artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes)?;
        written.push(path);
    }
    let exp = out.experiment;
    let mut manifest = json!({
        "experiment": exp.name(),
        "status": if out.passed() { "pass" } else { "fail" },
        "seed": cfg.seed,
        "config_text": config_text,
        "config": cfg,
        "results": out.results,
        "criteria": out.criteria.iter().map(|c| json!({
            "name": c.name, "pass": c.pass, "detail": c.detail,
        })).collect::<Vec<_>>(),
        "files": out.artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "workers": workers,
    });
    if let Some((n, l)) = out.grid {
        manifest["grid"] = json!({ "N": n, "L": l, "h": 2.0 * l / n as f64 });
        manifest["integrator"] = json!({
            "scheme": cfg.dynamics.scheme,
            "dt": cfg.dynamics.dt,
            "sample_every": cfg.dynamics.sample_every,
            "t_final": cfg.t_final_for(exp),
            "t_window": cfg.window_for(exp).t_window(),
        });
    }
    let path = dir.join("manifest.json");
    let f = BufWriter::new(fs::File::create(&path)?);
    serde_json::to_writer_pretty(f, &manifest)?;
    written.push(path);
    Ok(written)
}
