use nalgebra::DMatrix;
use serde::Serialize;

use super::{CocycleSample, FlowError, Result};
use crate::exterior::{compound_operator, KVector};
use crate::linalg::{fit_line, qr_orthonormalize};

/// A quantity sampled along an orbit together with the exponential rate
/// `log q(t) ≈ exponent·t + intercept` fitted by least squares over `t > 0`.
///
/// `intercept` is `log K` for the multiplicative constant `K` of the bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub label: String,
    pub times: Vec<f64>,
    /// Natural logarithm of the quantity at each time.
    pub log_values: Vec<f64>,
    pub exponent: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
}

impl RateReport {
    pub fn values(&self) -> Vec<f64> {
        self.log_values.iter().map(|v| v.exp()).collect()
    }
}

pub fn fit_rate(label: &str, times: &[f64], log_values: &[f64]) -> RateReport {
    let (ts, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(log_values)
        .filter(|(t, y)| **t > 0.0 && y.is_finite())
        .map(|(t, y)| (*t, *y))
        .unzip();
    let (exponent, intercept, residual) = fit_line(&ts, &ys);
    RateReport {
        label: label.to_string(),
        times: times.to_vec(),
        log_values: log_values.to_vec(),
        exponent,
        intercept,
        residual,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubbundleRates {
    /// `‖A_t|E‖`.
    pub contraction: RateReport,
    /// `‖A_t|E‖ · ‖(A_t|F)^{-1}‖`.
    pub domination: RateReport,
    /// `|det(A_t|F)|`, evaluated as `‖∧^{dim F} A_t (f_1∧…∧f_k)‖`.
    pub volume: RateReport,
}

fn check_frames(m: usize, e: &DMatrix<f64>, f: &DMatrix<f64>) -> Result<()> {
    if e.nrows() != m || f.nrows() != m {
        return Err(FlowError::DegenerateFrame(format!("frames must have {m} rows")));
    }
    if e.ncols() == 0 || f.ncols() == 0 || e.ncols() + f.ncols() != m {
        return Err(FlowError::DegenerateFrame(format!(
            "dim E = {} and dim F = {} do not split R^{m}",
            e.ncols(),
            f.ncols()
        )));
    }
    let both = DMatrix::from_columns(&e.column_iter().chain(f.column_iter()).collect::<Vec<_>>());
    let sv = both.singular_values();
    if sv.min() < 1e-10 * sv.max().max(1.0) {
        return Err(FlowError::DegenerateFrame("E and F frames are not independent".into()));
    }
    for (name, frame) in [("E", e), ("F", f)] {
        let gram = frame.transpose() * frame;
        if (gram - DMatrix::identity(frame.ncols(), frame.ncols())).amax() > 1e-8 {
            return Err(FlowError::DegenerateFrame(format!("{name} frame is not orthonormal")));
        }
    }
    Ok(())
}

/// Growth rates of a claimed invariant splitting `E ⊕ F` given by
/// orthonormal frames at the base point of `sample`.
///
/// Uses the raw fundamental matrices, so it is meant for horizons over which
/// `A_t` stays well conditioned; see [`frame_growth`] for long runs.
pub fn subbundle_rates(sample: &CocycleSample, e_frame: &DMatrix<f64>, f_frame: &DMatrix<f64>) -> Result<SubbundleRates> {
    let m = sample.dim();
    check_frames(m, e_frame, f_frame)?;
    let f_wedge = KVector::wedge_columns(f_frame)?;
    let k = f_frame.ncols();
    let times = &sample.orbit.times;
    let mut contraction = Vec::with_capacity(times.len());
    let mut domination = Vec::with_capacity(times.len());
    let mut volume = Vec::with_capacity(times.len());
    for a in &sample.fundamental {
        let e_norm = (a * e_frame).singular_values().max();
        let f_min = (a * f_frame).singular_values().min();
        let vol = compound_operator(a, k)?.apply(&f_wedge)?.norm();
        contraction.push(e_norm.ln());
        domination.push(e_norm.ln() - f_min.ln());
        volume.push(vol.ln());
    }
    Ok(SubbundleRates {
        contraction: fit_rate("contraction", times, &contraction),
        domination: fit_rate("domination", times, &domination),
        volume: fit_rate("volume", times, &volume),
    })
}

/// Log-volume growth of the pushed-forward frame, re-orthonormalised by QR
/// every `renorm_every` steps; the log of the diagonal of `R` is accumulated.
pub fn frame_growth(sample: &CocycleSample, frame: &DMatrix<f64>, renorm_every: usize, label: &str) -> RateReport {
    let renorm_every = renorm_every.max(1);
    let (mut q, diag) = qr_orthonormalize(frame);
    let mut log_vol: f64 = diag.iter().map(|d| d.ln()).sum();
    let offset = log_vol;
    let mut times = vec![0.0];
    let mut logs = vec![0.0];
    for (i, step) in sample.steps.iter().enumerate() {
        q = step * q;
        let last = i + 1 == sample.steps.len();
        if (i + 1) % renorm_every == 0 || last {
            let (nq, diag) = qr_orthonormalize(&q);
            log_vol += diag.iter().map(|d| d.ln()).sum::<f64>();
            q = nq;
            times.push(sample.orbit.times[i + 1]);
            logs.push(log_vol - offset);
        }
    }
    fit_rate(label, &times, &logs)
}

/// Finite-time Lyapunov exponents from QR re-orthonormalisation of the
/// step propagators, in decreasing order.
pub fn qr_exponents(sample: &CocycleSample, renorm_every: usize) -> Vec<f64> {
    let m = sample.dim();
    let renorm_every = renorm_every.max(1);
    let mut q = DMatrix::<f64>::identity(m, m);
    let mut sums = vec![0.0; m];
    for (i, step) in sample.steps.iter().enumerate() {
        q = step * q;
        if (i + 1) % renorm_every == 0 || i + 1 == sample.steps.len() {
            let (nq, diag) = qr_orthonormalize(&q);
            for (s, d) in sums.iter_mut().zip(diag) {
                *s += d.ln();
            }
            q = nq;
        }
    }
    let t = sample.orbit.duration();
    let mut out: Vec<f64> = sums.iter().map(|s| s / t).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}
