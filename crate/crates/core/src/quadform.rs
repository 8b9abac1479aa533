//! Indefinite quadratic forms, their cones, the derivative form
//! `J̃ = J·DX + DX^T·J`, the admissible δ-interval and integrals of δ along
//! orbits.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{integrate_cocycle, integrate_orbit, FlowError, OrbitSegment, VectorFieldModel};
use crate::linalg::{min_sym_eigenvalue, sym_eigenvalues, symmetrize, trace};
use crate::rng::unit_vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadFormError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("form matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("form is degenerate: smallest |eigenvalue| {0:e} is below 1e-10")]
    Degenerate(f64),
    #[error("form must be indefinite, found index {index} in dimension {dim}")]
    NotIndefinite { index: usize, dim: usize },
    #[error("cone classification of the zero vector")]
    ZeroVector,
    #[error("the δ-interval is empty")]
    EmptyInterval,
    #[error("strict separation fails at node {node} (t = {time})")]
    Separation { node: usize, time: f64 },
    #[error("no sampled vector fell in the {0} cone")]
    NoConeSamples(ConeClass),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

pub type Result<T> = std::result::Result<T, QuadFormError>;

/// A field of non-degenerate symmetric forms `x ↦ J_x`.
///
/// Only constant fields are represented; [`QuadFormField::at`] is the single
/// access point, so an `x`-dependent field only needs a new variant there.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadFormField {
    matrix: DMatrix<f64>,
    index: usize,
}

impl QuadFormField {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QuadFormError::Dimension { expected: matrix.nrows(), got: matrix.ncols() });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(QuadFormError::NotSymmetric(asym));
        }
        let matrix = symmetrize(&matrix);
        let ev = sym_eigenvalues(&matrix);
        let smallest = ev.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
        if smallest < 1e-10 {
            return Err(QuadFormError::Degenerate(smallest));
        }
        let index = ev.iter().filter(|e| **e < 0.0).count();
        if index == 0 || index == matrix.nrows() {
            return Err(QuadFormError::NotIndefinite { index, dim: matrix.nrows() });
        }
        Ok(Self { matrix, index })
    }

    /// `diag(-1, 1, …, 1)`.
    pub fn standard(m: usize) -> Self {
        assert!(m >= 2, "an indefinite form needs m >= 2");
        let mut d = DVector::from_element(m, 1.0);
        d[0] = -1.0;
        Self { matrix: DMatrix::from_diagonal(&d), index: 1 }
    }

    pub fn negated(&self) -> Self {
        Self { matrix: -&self.matrix, index: self.dim() - self.index }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of negative eigenvalues.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn at(&self, _x: &DVector<f64>) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn check(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(QuadFormError::Dimension { expected: self.dim(), got });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeClass {
    Positive,
    Negative,
    Zero,
}

impl fmt::Display for ConeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConeClass::Positive => "positive",
            ConeClass::Negative => "negative",
            ConeClass::Zero => "zero",
        })
    }
}

/// `J_x(v) = ⟨J_x v, v⟩`.
pub fn eval_form(field: &QuadFormField, x: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    field.check(v.len())?;
    Ok(v.dot(&(field.at(x) * v)))
}

/// Sign of `J_x(v)`, with values within `1e-12·|v|²` of zero in the zero cone.
pub fn cone_classify(field: &QuadFormField, x: &DVector<f64>, v: &DVector<f64>) -> Result<ConeClass> {
    let q = eval_form(field, x, v)?;
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return Err(QuadFormError::ZeroVector);
    }
    Ok(classify_value(q, n2))
}

fn classify_value(q: f64, norm2: f64) -> ConeClass {
    let band = 1e-12 * norm2;
    if q > band {
        ConeClass::Positive
    } else if q < -band {
        ConeClass::Negative
    } else {
        ConeClass::Zero
    }
}

/// `J·D + D^T·J`.
pub fn tilde_j_matrix(j: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    j * d + d.transpose() * j
}

/// `J·D + D^T·J − 2·tr(D)·J`.
pub fn hat_j_matrix(j: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    tilde_j_matrix(j, d) - j * (2.0 * trace(d))
}

pub fn tilde_j(field: &QuadFormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    field.check(model.dim())?;
    field.check(x.len())?;
    Ok(tilde_j_matrix(field.at(x), &model.jacobian(x)))
}

pub fn hat_j(field: &QuadFormField, model: &VectorFieldModel, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    field.check(model.dim())?;
    field.check(x.len())?;
    Ok(hat_j_matrix(field.at(x), &model.jacobian(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeltaConfig {
    /// Half-width of the initial search window.
    pub window: f64,
    /// Endpoint resolution of the bisection.
    pub tol: f64,
    /// Positive-definiteness margin on the smallest eigenvalue.
    pub margin: f64,
    /// Offset used by the `sup` and `inf` policies.
    pub eps: f64,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        Self { window: 1e3, tol: 1e-9, margin: 1e-10, eps: 1e-3 }
    }
}

/// The open interval `{δ : J̃ − δJ ≻ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaInterval {
    pub lower: f64,
    pub upper: f64,
    pub empty: bool,
    /// `max_δ λ_min(J̃ − δJ)`; positive exactly when the interval is nonempty.
    pub peak: f64,
}

impl DeltaInterval {
    pub fn contains(&self, delta: f64) -> bool {
        !self.empty && delta > self.lower && delta < self.upper
    }

    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.upper - self.lower
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Smallest eigenvalue of the symmetric pencil `tJ − δ·J`, concave in δ.
fn pencil_margin(tj: &DMatrix<f64>, j: &DMatrix<f64>, delta: f64) -> f64 {
    min_sym_eigenvalue(&(tj - j * delta))
}

/// Computes the δ-interval of the pencil `(tJ, J)`.
///
/// The concave function `δ ↦ λ_min(tJ − δJ)` is maximised by golden-section
/// search on `[−W, W]`; if the maximum does not exceed the margin the
/// interval is reported empty. Otherwise each endpoint is bracketed
/// (doubling the window when needed) and bisected to `tol`.
pub fn delta_interval(tj: &DMatrix<f64>, j: &DMatrix<f64>, cfg: &DeltaConfig) -> Result<DeltaInterval> {
    if tj.shape() != j.shape() || !j.is_square() {
        return Err(QuadFormError::Dimension { expected: j.nrows(), got: tj.nrows() });
    }
    let ev = sym_eigenvalues(j);
    let smallest = ev.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
    if smallest < 1e-10 {
        return Err(QuadFormError::Degenerate(smallest));
    }
    let neg = ev.iter().filter(|e| **e < 0.0).count();
    if neg == 0 || neg == ev.len() {
        return Err(QuadFormError::NotIndefinite { index: neg, dim: ev.len() });
    }
    let f = |d: f64| pencil_margin(tj, j, d);

    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (-cfg.window, cfg.window);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > cfg.tol.max(1e-12 * cfg.window) {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        }
    }
    let best = 0.5 * (a + b);
    let peak = f(best);
    if !(peak > cfg.margin) {
        return Ok(DeltaInterval { lower: f64::NAN, upper: f64::NAN, empty: true, peak });
    }
    let lower = bisect_endpoint(&f, best, -1.0, cfg);
    let upper = bisect_endpoint(&f, best, 1.0, cfg);
    Ok(DeltaInterval { lower, upper, empty: false, peak })
}

fn bisect_endpoint(f: &impl Fn(f64) -> f64, inside: f64, dir: f64, cfg: &DeltaConfig) -> f64 {
    let mut reach = cfg.window.max(1.0);
    let mut outside = inside + dir * reach;
    // J indefinite makes the margin tend to −∞ in both directions, so this
    // terminates; the cap guards against overflow only.
    while f(outside) > 0.0 && reach < 1e300 {
        reach *= 2.0;
        outside = inside + dir * reach;
    }
    let (mut good, mut bad) = (inside, outside);
    while (bad - good).abs() > cfg.tol {
        let mid = 0.5 * (good + bad);
        if f(mid) > 0.0 {
            good = mid;
        } else {
            bad = mid;
        }
    }
    0.5 * (good + bad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaPolicy {
    #[serde(rename = "midpoint")]
    Midpoint,
    #[serde(rename = "sup")]
    SupMinusEps,
    #[serde(rename = "inf")]
    InfPlusEps,
    #[serde(rename = "fixed")]
    Fixed(f64),
}

impl DeltaPolicy {
    pub const NAMED: [DeltaPolicy; 3] = [DeltaPolicy::SupMinusEps, DeltaPolicy::Midpoint, DeltaPolicy::InfPlusEps];

    pub fn name(&self) -> String {
        match self {
            DeltaPolicy::Midpoint => "midpoint".into(),
            DeltaPolicy::SupMinusEps => "sup".into(),
            DeltaPolicy::InfPlusEps => "inf".into(),
            DeltaPolicy::Fixed(d) => format!("fixed({d})"),
        }
    }
}

impl fmt::Display for DeltaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for DeltaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "midpoint" => Ok(DeltaPolicy::Midpoint),
            "sup" | "sup_minus_eps" => Ok(DeltaPolicy::SupMinusEps),
            "inf" | "inf_plus_eps" => Ok(DeltaPolicy::InfPlusEps),
            other => Err(format!("unknown δ policy `{other}` (expected midpoint, sup or inf)")),
        }
    }
}

/// Picks δ inside a nonempty interval. The offset of the `sup`/`inf`
/// policies shrinks to half the width on narrow intervals so δ stays inside.
/// A fixed δ is returned as is.
pub fn select_delta(interval: &DeltaInterval, policy: DeltaPolicy, eps: f64) -> Result<f64> {
    if let DeltaPolicy::Fixed(d) = policy {
        return Ok(d);
    }
    if interval.empty {
        return Err(QuadFormError::EmptyInterval);
    }
    let eps = eps.min(0.5 * interval.width());
    Ok(match policy {
        DeltaPolicy::Midpoint => interval.midpoint(),
        DeltaPolicy::SupMinusEps => interval.upper - eps,
        DeltaPolicy::InfPlusEps => interval.lower + eps,
        DeltaPolicy::Fixed(_) => unreachable!(),
    })
}

/// Composite Simpson rule on equally spaced samples; an odd number of
/// intervals closes with the 3/8 rule. Two samples fall back to the
/// trapezoid.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        2 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        3 => 3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3]),
        _ if n.is_multiple_of(2) => {
            let mut s = values[0] + values[n];
            for (i, v) in values.iter().enumerate().take(n).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            s * h / 3.0
        }
        _ => simpson(&values[..n - 2], h) + simpson(&values[n - 3..], h),
    }
}

/// Running integral `∫_{t_0}^{t_i}` at every node, third order accurate.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 1..n {
        out[i] = if i % 2 == 0 {
            out[i - 2] + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i])
        } else if i + 1 < n {
            out[i - 1] + h / 12.0 * (5.0 * values[i - 1] + 8.0 * values[i] - values[i + 1])
        } else if i >= 2 {
            out[i - 1] + h / 12.0 * (-values[i - 2] + 8.0 * values[i - 1] + 5.0 * values[i])
        } else {
            0.5 * h * (values[0] + values[1])
        };
    }
    out
}

/// Pointwise δ data along an orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaSeries {
    pub policy: DeltaPolicy,
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    /// `2·tr(DX) − δ`.
    pub delta_k: Vec<f64>,
    /// Smallest eigenvalue of `Ĵ`.
    pub min_eig_hat: Vec<f64>,
    pub step: f64,
}

impl DeltaSeries {
    pub fn values(&self, variant: DeltaVariant) -> &[f64] {
        match variant {
            DeltaVariant::Base => &self.delta,
            DeltaVariant::Codim1 => &self.delta_k,
        }
    }

    /// Running integral of the chosen variant from the first node.
    pub fn cumulative(&self, variant: DeltaVariant) -> Vec<f64> {
        cumulative_simpson(self.values(variant), self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaVariant {
    /// δ itself.
    Base,
    /// `δ_k = 2·tr(DX) − δ`, the δ of the codimension-one compound.
    Codim1,
}

/// The policy-independent data at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointwiseDelta {
    pub interval: DeltaInterval,
    pub trace: f64,
    /// Smallest eigenvalue of `Ĵ`.
    pub min_eig_hat: f64,
}

pub fn pointwise_delta(field: &QuadFormField, model: &VectorFieldModel, x: &DVector<f64>, cfg: &DeltaConfig) -> Result<PointwiseDelta> {
    let j = field.at(x);
    let dx = model.jacobian(x);
    Ok(PointwiseDelta {
        interval: delta_interval(&tilde_j_matrix(j, &dx), j, cfg)?,
        trace: trace(&dx),
        min_eig_hat: min_sym_eigenvalue(&hat_j_matrix(j, &dx)),
    })
}

/// [`pointwise_delta`] at every state. A linear model has one Jacobian, so
/// it is evaluated once.
pub fn pointwise_series(
    field: &QuadFormField,
    model: &VectorFieldModel,
    states: &[DVector<f64>],
    cfg: &DeltaConfig,
) -> Result<Vec<PointwiseDelta>> {
    field.check(model.dim())?;
    if states.is_empty() {
        return Ok(Vec::new());
    }
    if model.is_linear() {
        let p = pointwise_delta(field, model, &states[0], cfg)?;
        return Ok(vec![p; states.len()]);
    }
    states.par_iter().map(|x| pointwise_delta(field, model, x, cfg)).collect()
}

impl DeltaSeries {
    /// Applies `policy` to precomputed pointwise data on a uniform grid.
    pub fn from_pointwise(times: &[f64], step: f64, points: &[PointwiseDelta], policy: DeltaPolicy, eps: f64) -> Result<Self> {
        let mut series = DeltaSeries {
            policy,
            times: times.to_vec(),
            delta: Vec::with_capacity(points.len()),
            delta_k: Vec::with_capacity(points.len()),
            min_eig_hat: Vec::with_capacity(points.len()),
            step,
        };
        for (node, p) in points.iter().enumerate() {
            if p.interval.empty && !matches!(policy, DeltaPolicy::Fixed(_)) {
                return Err(QuadFormError::Separation { node, time: times[node] });
            }
            let delta = select_delta(&p.interval, policy, eps)?;
            series.delta.push(delta);
            series.delta_k.push(2.0 * p.trace - delta);
            series.min_eig_hat.push(p.min_eig_hat);
        }
        Ok(series)
    }
}

/// Evaluates δ (chosen by `policy`), δ_k and `λ_min(Ĵ)` at every node of
/// `orbit`. Fails at the first node where strict separation is lost.
pub fn delta_series(
    model: &VectorFieldModel,
    field: &QuadFormField,
    orbit: &OrbitSegment,
    policy: DeltaPolicy,
    cfg: &DeltaConfig,
) -> Result<DeltaSeries> {
    let points = pointwise_series(field, model, &orbit.states, cfg)?;
    DeltaSeries::from_pointwise(&orbit.times, orbit.step, &points, policy, cfg.eps)
}

/// `∫_a^b δ(X_s(x0)) ds` (base) or `∫_a^b δ_k(X_s(x0)) ds` (codim1) by
/// composite Simpson on the RK4 grid of step `h`.
#[allow(clippy::too_many_arguments)]
pub fn delta_integral(
    model: &VectorFieldModel,
    field: &QuadFormField,
    x0: &DVector<f64>,
    a: f64,
    b: f64,
    h: f64,
    variant: DeltaVariant,
    policy: DeltaPolicy,
    cfg: &DeltaConfig,
) -> Result<f64> {
    if !(a < b) || a < 0.0 {
        return Err(QuadFormError::InvalidRequest(format!("need 0 <= a < b, got [{a}, {b}]")));
    }
    let start = if a > 0.0 { integrate_orbit(model, x0, a, h)?.last().clone() } else { x0.clone() };
    let orbit = integrate_orbit(model, &start, b - a, h)?;
    let series = delta_series(model, field, &orbit, policy, cfg)?;
    Ok(simpson(series.values(variant), orbit.step))
}

/// Outcome of comparing `|J(A_{t2} v)| / |J(A_{t1} v)|` with `exp Δ_{t1}^{t2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationReport {
    pub applicable: bool,
    /// `ln |J(A_{t2} v)| − ln |J(A_{t1} v)|`.
    pub log_ratio: f64,
    /// `Δ_{t1}^{t2}`.
    pub delta_integral: f64,
    pub pass: bool,
    pub note: String,
}

/// Checks the growth bound along the positive cone. Vectors whose image
/// leaves the open positive cone on the grid make the check inapplicable.
#[allow(clippy::too_many_arguments)]
pub fn separation_ratio_check(
    model: &VectorFieldModel,
    field: &QuadFormField,
    x0: &DVector<f64>,
    v: &DVector<f64>,
    t1: f64,
    t2: f64,
    h: f64,
    policy: DeltaPolicy,
    cfg: &DeltaConfig,
) -> Result<SeparationReport> {
    if !(0.0 <= t1 && t1 < t2) {
        return Err(QuadFormError::InvalidRequest(format!("need 0 <= t1 < t2, got [{t1}, {t2}]")));
    }
    field.check(v.len())?;
    let sample = integrate_cocycle(model, x0, t2, h)?;
    let step = sample.orbit.step;
    let i1 = (t1 / step).round() as usize;
    let inapplicable = |note: String| SeparationReport {
        applicable: false,
        log_ratio: f64::NAN,
        delta_integral: f64::NAN,
        pass: false,
        note,
    };
    let mut forms = Vec::with_capacity(sample.len());
    for (i, (a, x)) in sample.fundamental.iter().zip(&sample.orbit.states).enumerate() {
        let w = a * v;
        let q = eval_form(field, x, &w)?;
        if classify_value(q, w.norm_squared()) != ConeClass::Positive {
            return Ok(inapplicable(format!("image leaves the positive cone at t = {}", sample.orbit.times[i])));
        }
        forms.push(q);
    }
    let series = delta_series(model, field, &sample.orbit, policy, cfg)?;
    let integral = simpson(&series.delta[i1..], step);
    let log_ratio = forms[forms.len() - 1].ln() - forms[i1].ln();
    let slack = 1e-6 * integral.abs().max(1.0);
    Ok(SeparationReport {
        applicable: true,
        log_ratio,
        delta_integral: integral,
        pass: log_ratio >= integral - slack,
        note: String::new(),
    })
}

/// Monte-Carlo bracket for the δ-interval at `x`:
/// `lower = sup_{v ∈ C−} J̃(v)/J(v)` and `upper = inf_{v ∈ C+} J̃(v)/J(v)`.
/// Sampled extrema approach the true endpoints from outside.
pub fn delta_sampling_bounds<R: Rng + ?Sized>(
    field: &QuadFormField,
    model: &VectorFieldModel,
    x: &DVector<f64>,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(QuadFormError::InvalidRequest("n_samples must be positive".into()));
    }
    let tj = tilde_j(field, model, x)?;
    let j = field.at(x);
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut seen_neg, mut seen_pos) = (false, false);
    for _ in 0..n_samples {
        let v = unit_vector(rng, field.dim());
        let q = v.dot(&(j * &v));
        let ratio = v.dot(&(&tj * &v)) / q;
        match classify_value(q, 1.0) {
            ConeClass::Positive => {
                seen_pos = true;
                upper = upper.min(ratio);
            }
            ConeClass::Negative => {
                seen_neg = true;
                lower = lower.max(ratio);
            }
            ConeClass::Zero => {}
        }
    }
    if !seen_neg {
        return Err(QuadFormError::NoConeSamples(ConeClass::Negative));
    }
    if !seen_pos {
        return Err(QuadFormError::NoConeSamples(ConeClass::Positive));
    }
    Ok((lower, upper))
}
