//! Aggregation of the pointwise and integral criteria into a [`Certificate`]
//! over a finite sampling of an invariant set.
//!
//! The invariant set is approximated by post-transient orbit samples plus
//! explicitly listed singularities, so every verdict is evidence about those
//! samples and nothing more.
//!
//! Criteria:
//!
//! * `nonneg`: `J(X(x)) ≥ 0` at every sample.
//! * `separation`: the δ-interval is nonempty at every sample.
//! * `cone`: sampled vectors of `C+ ∪ C0` stay in `C+` under `A_t`.
//! * `contraction` (per δ policy): `∫_0^t δ → −∞`, so the negative direction
//!   is contracted.
//! * `a` (per δ policy): `∫_0^t (2·tr DX − δ) → +∞`, so the
//!   codimension-one compound expands volume along the center direction.
//! * `b`: `Ĵ = J̃ − 2·tr(DX)·J` is positive definite at every sample.
//!
//! The evidence is positive when `nonneg`, `separation`, `cone` and
//! `contraction` pass and at least one of `a`, `b` passes.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{fit_rate, integrate_cocycle, integrate_orbit, FlowError, OrbitSegment, VectorFieldModel};
use crate::quadform::{
    cumulative_simpson, pointwise_delta, pointwise_series, DeltaConfig, DeltaPolicy, DeltaSeries, DeltaVariant,
    PointwiseDelta, QuadFormError, QuadFormField,
};
use crate::rng::{gaussian_vector, streams, SeedStream};
use crate::splitting::AdaptednessReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("invalid sampling plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Form(#[from] QuadFormError),
}

pub type Result<T> = std::result::Result<T, CertifyError>;

/// Orbits whose post-transient nodes, thinned by `stride`, together with the
/// listed singularities, stand in for the invariant set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub initial_conditions: Vec<Vec<f64>>,
    pub transient: f64,
    /// End time of each orbit, transient included.
    pub horizon: f64,
    pub step: f64,
    pub stride: usize,
    #[serde(default)]
    pub singularities: Vec<Vec<f64>>,
}

impl SamplingPlan {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut problems = Vec::new();
        if self.initial_conditions.is_empty() {
            problems.push("at least one initial condition is required".to_string());
        }
        for (i, x) in self.initial_conditions.iter().chain(&self.singularities).enumerate() {
            if x.len() != dim {
                problems.push(format!("point {i} has dimension {}, expected {dim}", x.len()));
            }
            if x.iter().any(|v| !v.is_finite()) {
                problems.push(format!("point {i} has a non-finite coordinate"));
            }
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            problems.push(format!("step must be positive, got {}", self.step));
        }
        if !(self.transient >= 0.0) || !self.transient.is_finite() {
            problems.push(format!("transient must be non-negative, got {}", self.transient));
        }
        if !(self.horizon > self.transient) || !self.horizon.is_finite() {
            problems.push(format!("horizon {} must exceed transient {}", self.horizon, self.transient));
        }
        if self.stride == 0 {
            problems.push("stride must be at least 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CertifyError::Plan(problems.join("; ")))
        }
    }

    /// Length of the post-transient window.
    pub fn window(&self) -> f64 {
        self.horizon - self.transient
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub policies: Vec<DeltaPolicy>,
    pub delta: DeltaConfig,
    /// Growth required of `∫δ_k` (criterion a) and decay of `∫δ`
    /// (contraction) over the window, in natural-log units.
    pub endpoint_threshold: f64,
    /// The RMS residual of the trend fit must not exceed this fraction of
    /// the fitted change `|slope|·T`.
    pub max_residual_fraction: f64,
    /// Criterion b passes when the smallest eigenvalue of `Ĵ` exceeds this.
    pub b_floor: f64,
    pub cone_vectors: usize,
    pub cone_probe_time: f64,
    /// Number of samples, evenly spread, at which cones are probed.
    pub cone_samples: usize,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            policies: DeltaPolicy::NAMED.to_vec(),
            delta: DeltaConfig::default(),
            endpoint_threshold: 10f64.ln(),
            max_residual_fraction: 0.25,
            b_floor: 0.0,
            cone_vectors: 32,
            cone_probe_time: 0.5,
            cone_samples: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionId {
    Nonneg,
    Separation,
    Cone,
    Contraction,
    A,
    B,
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: CriterionId,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<DeltaPolicy>,
    pub status: Status,
    pub pass: bool,
    /// The worst value of the criterion's quantity over the samples; its
    /// meaning is given per criterion in the module docs.
    pub margin: f64,
    pub worst_sample: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl CriterionResult {
    fn new(id: CriterionId, policy: Option<DeltaPolicy>, status: Status, margin: f64) -> Self {
        Self {
            id,
            policy,
            status,
            pass: status == Status::Pass,
            margin,
            worst_sample: None,
            slope: None,
            note: String::new(),
        }
    }

    fn at(mut self, x: Option<&DVector<f64>>) -> Self {
        self.worst_sample = x.map(|x| x.iter().copied().collect());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "certified-singular-hyperbolic-evidence")]
    CertifiedEvidence,
    #[serde(rename = "inconclusive")]
    Inconclusive,
    #[serde(rename = "refuted-at-sample")]
    RefutedAtSample,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::CertifiedEvidence => 0,
            Verdict::Inconclusive => 2,
            Verdict::RefutedAtSample => 3,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub plan: SamplingPlan,
    pub samples: usize,
    pub regular_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub plan: PlanSummary,
    pub criteria: Vec<CriterionResult>,
    pub verdict: Verdict,
    pub version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapted_metric: Option<AdaptednessReport>,
}

impl Certificate {
    pub fn criterion(&self, id: CriterionId) -> impl Iterator<Item = &CriterionResult> {
        self.criteria.iter().filter(move |c| c.id == id)
    }

    /// The single result of a policy-free criterion.
    pub fn single(&self, id: CriterionId) -> Option<&CriterionResult> {
        self.criterion(id).next()
    }
}

/// One post-transient orbit of the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOrbit {
    pub initial_condition: usize,
    pub orbit: OrbitSegment,
}

/// Orbits and point samples of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedPlan {
    pub orbits: Vec<PlanOrbit>,
    /// Thinned orbit nodes followed by the singularities.
    pub samples: Vec<DVector<f64>>,
    pub singular: Vec<bool>,
}

pub fn materialize(plan: &SamplingPlan, model: &VectorFieldModel) -> Result<MaterializedPlan> {
    plan.validate(model.dim())?;
    let orbits: Vec<Result<PlanOrbit>> = plan
        .initial_conditions
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let x0 = DVector::from_column_slice(x0);
            let start =
                if plan.transient > 0.0 { integrate_orbit(model, &x0, plan.transient, plan.step)?.last().clone() } else { x0 };
            let mut orbit = integrate_orbit(model, &start, plan.window(), plan.step)?;
            for t in orbit.times.iter_mut() {
                *t += plan.transient;
            }
            Ok(PlanOrbit { initial_condition: i, orbit })
        })
        .collect();
    let orbits = orbits.into_iter().collect::<Result<Vec<_>>>()?;
    let mut samples = Vec::new();
    let mut singular = Vec::new();
    for o in &orbits {
        for x in o.orbit.states.iter().step_by(plan.stride) {
            samples.push(x.clone());
            singular.push(false);
        }
    }
    for s in &plan.singularities {
        samples.push(DVector::from_column_slice(s));
        singular.push(true);
    }
    Ok(MaterializedPlan { orbits, samples, singular })
}

/// `min J(X(x))` over the regular samples. Singular samples have `X = 0`
/// and pass by definition. Values within `1e-12·|X|²` below zero count as
/// zero.
pub fn check_nonnegative_field(
    mp: &MaterializedPlan,
    model: &VectorFieldModel,
    field: &QuadFormField,
) -> CriterionResult {
    let mut worst = f64::INFINITY;
    let mut worst_x = None;
    let mut violated = false;
    for (x, sing) in mp.samples.iter().zip(&mp.singular) {
        let fx = model.eval(x);
        let q = if *sing { 0.0 } else { fx.dot(&(field.at(x) * &fx)) };
        if q < worst {
            worst = q;
            worst_x = Some(x);
        }
        if !*sing && q < -1e-12 * fx.norm_squared() {
            violated = true;
        }
    }
    let status = if violated { Status::Fail } else { Status::Pass };
    CriterionResult::new(CriterionId::Nonneg, None, status, worst).at(worst_x)
}

fn pointwise(mp: &MaterializedPlan, model: &VectorFieldModel, field: &QuadFormField, cfg: &DeltaConfig) -> Result<Vec<PointwiseDelta>> {
    Ok(pointwise_series(field, model, &mp.samples, cfg)?)
}

/// Criterion b: `min λ_min(Ĵ)` over the samples, strictly above the floor.
pub fn certify_criterion_b(
    mp: &MaterializedPlan,
    points: &[PointwiseDelta],
    floor: f64,
) -> CriterionResult {
    let (i, worst) = argmin(points.iter().map(|p| p.min_eig_hat));
    let status = if worst > floor { Status::Pass } else { Status::Fail };
    CriterionResult::new(CriterionId::B, None, status, worst).at(i.map(|i| &mp.samples[i]))
}

/// Nonempty δ-interval at every sample; the margin is the smallest peak
/// `max_δ λ_min(J̃ − δJ)`.
pub fn check_separation(mp: &MaterializedPlan, points: &[PointwiseDelta]) -> CriterionResult {
    let (i, worst) = argmin(points.iter().map(|p| p.interval.peak));
    let empty = points.iter().any(|p| p.interval.empty);
    let status = if empty { Status::Fail } else { Status::Pass };
    CriterionResult::new(CriterionId::Separation, None, status, worst).at(i.map(|i| &mp.samples[i]))
}

fn argmin(values: impl Iterator<Item = f64>) -> (Option<usize>, f64) {
    let mut best = (None, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 || best.0.is_none() {
            best = (Some(i), v);
        }
    }
    best
}

/// Trend of one integral along one orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendFit {
    pub slope: f64,
    pub endpoint: f64,
    pub residual: f64,
}

fn trend(times: &[f64], cumulative: &[f64]) -> TrendFit {
    let t0 = times[0];
    let rel: Vec<f64> = times.iter().map(|t| t - t0).collect();
    let fit = fit_rate("integral", &rel, cumulative);
    TrendFit { slope: fit.exponent, endpoint: *cumulative.last().unwrap_or(&0.0), residual: fit.residual }
}

/// `+1` when the integral must diverge to `+∞`, `−1` for `−∞`.
fn trend_status(fit: &TrendFit, sign: f64, window: f64, cfg: &CertifyConfig) -> Status {
    let slope_ok = sign * fit.slope > 0.0;
    let end_ok = sign * fit.endpoint > cfg.endpoint_threshold;
    let clean = fit.residual <= cfg.max_residual_fraction * fit.slope.abs() * window;
    if slope_ok && end_ok && clean {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Per-orbit δ series for one policy; `Err` holds the failing node.
pub type OrbitSeries = std::result::Result<DeltaSeries, QuadFormError>;

fn orbit_series(
    orbits: &[PlanOrbit],
    orbit_points: &[Vec<PointwiseDelta>],
    policy: DeltaPolicy,
    eps: f64,
) -> Vec<OrbitSeries> {
    orbits
        .iter()
        .zip(orbit_points)
        .map(|(o, pts)| DeltaSeries::from_pointwise(&o.orbit.times, o.orbit.step, pts, policy, eps))
        .collect()
}

/// Criteria `a` (codim1 variant, towards `+∞`) and `contraction` (base
/// variant, towards `−∞`) for one policy.
fn integral_criterion(
    id: CriterionId,
    policy: DeltaPolicy,
    orbits: &[PlanOrbit],
    series: &[OrbitSeries],
    window: f64,
    cfg: &CertifyConfig,
) -> CriterionResult {
    let (variant, sign) = match id {
        CriterionId::A => (DeltaVariant::Codim1, 1.0),
        _ => (DeltaVariant::Base, -1.0),
    };
    let mut worst: Option<(TrendFit, usize)> = None;
    let mut failed = false;
    for (k, (o, s)) in orbits.iter().zip(series).enumerate() {
        let s = match s {
            Ok(s) => s,
            Err(QuadFormError::Separation { node, time }) => {
                let mut r = CriterionResult::new(id, Some(policy), Status::Inconclusive, f64::NAN)
                    .at(Some(&o.orbit.states[*node]));
                r.note = format!("separation fails on orbit {k} at t = {time}");
                return r;
            }
            Err(e) => {
                let mut r = CriterionResult::new(id, Some(policy), Status::Inconclusive, f64::NAN);
                r.note = e.to_string();
                return r;
            }
        };
        let fit = trend(&s.times, &cumulative_simpson(s.values(variant), s.step));
        if trend_status(&fit, sign, window, cfg) == Status::Fail {
            failed = true;
        }
        let score = sign * fit.endpoint;
        if worst.as_ref().is_none_or(|(w, _)| score < sign * w.endpoint) {
            worst = Some((fit, k));
        }
    }
    let (fit, k) = worst.expect("at least one orbit");
    let status = if failed { Status::Fail } else { Status::Pass };
    let mut r = CriterionResult::new(id, Some(policy), status, sign * fit.endpoint).at(Some(&orbits[k].orbit.states[0]));
    r.slope = Some(fit.slope);
    r
}

/// Vectors of `C+ ∪ C0`: a Gaussian vector in the eigenbasis of `J` whose
/// negative part is rescaled so that `J(v) = r·(positive part)` with `r` in
/// `[0, 1]`; every other vector has `r = 0` and lies on the zero cone.
fn cone_vector<R: Rng + ?Sized>(rng: &mut R, eig: &SymmetricEigen<f64, nalgebra::Dyn>, on_boundary: bool) -> DVector<f64> {
    let m = eig.eigenvalues.len();
    loop {
        let mut y = gaussian_vector(rng, m);
        let mut pos = 0.0;
        let mut neg = 0.0;
        for i in 0..m {
            let l = eig.eigenvalues[i];
            if l > 0.0 {
                pos += l * y[i] * y[i];
            } else {
                neg += -l * y[i] * y[i];
            }
        }
        if pos <= 1e-12 || neg <= 1e-12 {
            continue;
        }
        let target = if on_boundary { pos } else { pos * rng.random::<f64>() };
        let scale = (target / neg).sqrt();
        for i in 0..m {
            if eig.eigenvalues[i] < 0.0 {
                y[i] *= scale;
            }
        }
        let v = &eig.eigenvectors * y;
        return v.normalize();
    }
}

/// Pushes vectors of the closed positive cone through `A_{t_probe}` and
/// reports the smallest normalised image form `J(A v)/|A v|²`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_cone_invariance(
    mp: &MaterializedPlan,
    model: &VectorFieldModel,
    field: &QuadFormField,
    n_vectors: usize,
    t_probe: f64,
    n_samples: usize,
    step: f64,
    seed: SeedStream,
) -> Result<CriterionResult> {
    if !(t_probe > 0.0) {
        return Err(CertifyError::Plan(format!("cone probe time must be positive, got {t_probe}")));
    }
    let total = mp.samples.len();
    let picks: Vec<usize> = if n_samples >= total {
        (0..total).collect()
    } else {
        let mut p: Vec<usize> = (0..n_samples).map(|k| k * total / n_samples).collect();
        // Singularities are always probed.
        p.extend(mp.singular.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i));
        p.sort_unstable();
        p.dedup();
        p
    };
    let results: Vec<Result<(f64, usize)>> = picks
        .par_iter()
        .map(|&i| {
            let x = &mp.samples[i];
            let mut rng = seed.stream(streams::CONE_PROBES);
            rng.set_word_pos(i as u128 * 4096);
            let j = field.at(x);
            let eig = SymmetricEigen::new(j.clone());
            let a = integrate_cocycle(model, x, t_probe, step)?.fundamental.pop().expect("non-empty");
            let mut worst = f64::INFINITY;
            for k in 0..n_vectors {
                let v = cone_vector(&mut rng, &eig, k % 2 == 0);
                let w = &a * &v;
                let image_form = w.dot(&(field.at(x) * &w)) / w.norm_squared();
                worst = worst.min(image_form);
            }
            Ok((worst, i))
        })
        .collect();
    let mut worst = (f64::INFINITY, None);
    for r in results {
        let (v, i) = r?;
        if v < worst.0 {
            worst = (v, Some(i));
        }
    }
    let status = if worst.0 > 1e-12 { Status::Pass } else { Status::Fail };
    Ok(CriterionResult::new(CriterionId::Cone, None, status, worst.0).at(worst.1.map(|i| &mp.samples[i])))
}

/// The verdict rule:
///
/// * positive when `nonneg`, `separation`, `cone` pass, `contraction`
///   passes for some policy and either `b` or `a` (for some policy) passes;
/// * refuted when `nonneg`, `separation` or `cone` fails, when
///   `contraction` fails for every policy, or when `b` fails and `a` fails
///   for every policy;
/// * inconclusive otherwise.
pub fn verdict(criteria: &[CriterionResult]) -> Verdict {
    let all = |id: CriterionId, s: Status| {
        let mut it = criteria.iter().filter(|c| c.id == id).peekable();
        it.peek().is_some() && it.all(|c| c.status == s)
    };
    let any_pass = |id: CriterionId| criteria.iter().any(|c| c.id == id && c.status == Status::Pass);
    let hard = [CriterionId::Nonneg, CriterionId::Separation, CriterionId::Cone];
    if hard.iter().all(|&id| all(id, Status::Pass))
        && any_pass(CriterionId::Contraction)
        && (any_pass(CriterionId::A) || any_pass(CriterionId::B))
    {
        return Verdict::CertifiedEvidence;
    }
    let refuted = hard.iter().any(|&id| criteria.iter().any(|c| c.id == id && c.status == Status::Fail))
        || all(CriterionId::Contraction, Status::Fail)
        || (all(CriterionId::B, Status::Fail) && all(CriterionId::A, Status::Fail));
    if refuted {
        Verdict::RefutedAtSample
    } else {
        Verdict::Inconclusive
    }
}

/// A certificate plus the δ series behind it, for export.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyRun {
    pub certificate: Certificate,
    pub plan: MaterializedPlan,
    /// `series[p][k]`: policy `p`, orbit `k`.
    pub series: Vec<Vec<OrbitSeries>>,
}

pub fn certify_detailed(
    model: &VectorFieldModel,
    field: &QuadFormField,
    plan: &SamplingPlan,
    cfg: &CertifyConfig,
) -> Result<CertifyRun> {
    if field.dim() != model.dim() {
        return Err(CertifyError::Plan(format!("form dimension {} differs from system dimension {}", field.dim(), model.dim())));
    }
    if cfg.policies.is_empty() {
        return Err(CertifyError::Plan("at least one δ policy is required".into()));
    }
    let mp = materialize(plan, model)?;
    let points = pointwise(&mp, model, field, &cfg.delta)?;
    let orbit_points: Vec<Vec<PointwiseDelta>> = mp
        .orbits
        .iter()
        .map(|o| pointwise_series(field, model, &o.orbit.states, &cfg.delta))
        .collect::<std::result::Result<_, _>>()?;

    let mut criteria = vec![check_nonnegative_field(&mp, model, field), check_separation(&mp, &points)];
    criteria.push(empirical_cone_invariance(
        &mp,
        model,
        field,
        cfg.cone_vectors,
        cfg.cone_probe_time,
        cfg.cone_samples,
        plan.step,
        SeedStream::new(cfg.seed),
    )?);
    let mut all_series = Vec::with_capacity(cfg.policies.len());
    for &policy in &cfg.policies {
        let series = orbit_series(&mp.orbits, &orbit_points, policy, cfg.delta.eps);
        criteria.push(integral_criterion(CriterionId::Contraction, policy, &mp.orbits, &series, plan.window(), cfg));
        all_series.push(series);
    }
    for (p, &policy) in cfg.policies.iter().enumerate() {
        criteria.push(integral_criterion(CriterionId::A, policy, &mp.orbits, &all_series[p], plan.window(), cfg));
    }
    criteria.push(certify_criterion_b(&mp, &points, cfg.b_floor));

    let regular = mp.singular.iter().filter(|s| !**s).count();
    let certificate = Certificate {
        plan: PlanSummary { plan: plan.clone(), samples: mp.samples.len(), regular_samples: regular },
        verdict: verdict(&criteria),
        criteria,
        version: crate::VERSION.to_string(),
        seed: cfg.seed,
        adapted_metric: None,
    };
    Ok(CertifyRun { certificate, plan: mp, series: all_series })
}

pub fn certify(
    model: &VectorFieldModel,
    field: &QuadFormField,
    plan: &SamplingPlan,
    cfg: &CertifyConfig,
) -> Result<Certificate> {
    Ok(certify_detailed(model, field, plan, cfg)?.certificate)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReversalReport {
    pub checked: usize,
    pub agreeing: usize,
    /// Indices of samples where the two flags differ.
    pub mismatches: Vec<usize>,
    pub consistent: bool,
}

/// Compares nonemptiness of the δ-interval for `(X, J)` and `(−X, −J)` at
/// every point.
pub fn reversal_consistency(
    model: &VectorFieldModel,
    field: &QuadFormField,
    points: &[DVector<f64>],
    cfg: &DeltaConfig,
) -> Result<ReversalReport> {
    let back = model.reversed();
    let neg = field.negated();
    let mut mismatches = Vec::new();
    for (i, x) in points.iter().enumerate() {
        let fwd = pointwise_delta(field, model, x, cfg)?;
        let bwd = pointwise_delta(&neg, &back, x, cfg)?;
        if fwd.interval.empty != bwd.interval.empty {
            mismatches.push(i);
        }
    }
    Ok(ReversalReport {
        checked: points.len(),
        agreeing: points.len() - mismatches.len(),
        consistent: mismatches.is_empty(),
        mismatches,
    })
}

/// Closed-form classification of `diag(d1, …, dm)` with the standard form:
/// the first axis is `E` and the rest is `F`.
pub fn diagonal_classification(d: &[f64]) -> bool {
    let (d1, rest) = d.split_first().expect("non-empty");
    let contracted = *d1 < 0.0;
    let dominated = rest.iter().all(|&x| *d1 < x);
    let expanding = rest.iter().sum::<f64>() > 0.0;
    contracted && dominated && expanding
}

/// Diagonal of a matrix as a vector, for diagnostics.
pub fn diag_entries(m: &DMatrix<f64>) -> Vec<f64> {
    m.diagonal().iter().copied().collect()
}
