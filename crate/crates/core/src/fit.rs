//! Power-law fits `value ≈ C (1+t)^γ` by least squares on log–log data.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub window: [f64; 2],
    /// Fitted slope `γ` of `ln value` against `ln(1+t)`.
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    /// Number of samples inside the window.
    pub used: usize,
}

impl DecayFit {
    /// Fits the samples with `t ∈ [t_min, t_max]`. Samples that are zero,
    /// negative or non-finite inside the window make the fit degenerate.
    pub fn fit(times: &[f64], values: &[f64], t_min: f64, t_max: f64) -> Result<DecayFit> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument("times and values differ in length".into()));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (&t, &v) in times.iter().zip(values) {
            if t < t_min || t > t_max {
                continue;
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::DegenerateFit(format!("sample {v:e} at t = {t} is not positive")));
            }
            xs.push((1.0 + t).ln());
            ys.push(v.ln());
        }
        if xs.len() < 3 {
            return Err(Error::DegenerateFit(format!(
                "{} samples inside [{t_min}, {t_max}]",
                xs.len()
            )));
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        if sxx <= 0.0 {
            return Err(Error::DegenerateFit("all samples at one time".into()));
        }
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        Ok(DecayFit {
            times: times.to_vec(),
            values: values.to_vec(),
            window: [t_min, t_max],
            exponent: slope,
            prefactor: intercept.exp(),
            residual: (rss / n).sqrt(),
            used: xs.len(),
        })
    }
}
