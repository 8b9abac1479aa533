//! Estimation of the splitting `E ⊕ F` (with `dim E = 1`) along an orbit and
//! the singular adapted metric built from it.
//!
//! `E` comes from power iteration on the inverse step propagators, run
//! backwards along the orbit. `F` comes from forward power iteration on the
//! `(m-1)`-st compound cocycle: the dominant `(m-1)`-vector is mapped to its
//! normal vector by the codimension-one identification and `F` is the
//! orthogonal complement of that normal.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exterior::{compound_operator, ExteriorError, HodgeIdentification, KVector};
use crate::flow::{fit_rate, CocycleSample, FlowError, RateReport, VectorFieldModel};
use crate::linalg::{angle_to_subspace, line_angle, null_vector, orthonormal_complement, qr_orthonormalize, sym_eigenvalues};
use crate::quadform::QuadFormField;
use crate::rng::unit_vector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplittingError {
    #[error("power iteration did not converge: residual {residual:e} exceeds {tol:e}")]
    NotConverged { residual: f64, tol: f64 },
    #[error("orbit too short: {nodes} nodes cannot hold a window of {window} nodes")]
    TooShort { nodes: usize, window: usize },
    #[error("splitting is not compatible with the form at sample {sample}: {reason}")]
    NotCompatible { sample: usize, reason: String },
    #[error("no simple real eigenvalue strictly below the rest of the spectrum")]
    NoStableEigenvalue,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Kernel(#[from] ExteriorError),
}

pub type Result<T> = std::result::Result<T, SplittingError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    /// Burn-in time of each sweep.
    pub window: f64,
    /// Largest tolerated angle between two sweeps from different starts.
    pub tol: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self { window: 2.0, tol: 1e-8 }
    }
}

fn window_nodes(sample: &CocycleSample, cfg: &PowerConfig) -> Result<usize> {
    if !(cfg.window >= 0.0) || !(cfg.tol > 0.0) {
        return Err(SplittingError::InvalidRequest("window must be >= 0 and tol > 0".into()));
    }
    let w = (cfg.window / sample.orbit.step).round() as usize;
    if w + 1 > sample.len() {
        return Err(SplittingError::TooShort { nodes: sample.len(), window: w });
    }
    Ok(w)
}

/// Unit vectors `e(x(t_i))` for nodes `first_node..first_node + vectors.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    pub first_node: usize,
    pub vectors: Vec<DVector<f64>>,
    pub residual: f64,
}

/// Orthonormal frames `F(x(t_i))` and their normals, for nodes starting at
/// `first_node`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub first_node: usize,
    pub frames: Vec<DMatrix<f64>>,
    pub normals: Vec<DVector<f64>>,
    /// Log-norm growth of the dominant `(m-1)`-vector, per node, from the
    /// first returned node.
    pub log_growth: Vec<f64>,
    pub residual: f64,
}

fn pull_back(sample: &CocycleSample, start: DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let n = sample.len();
    let mut out = vec![DVector::zeros(0); n];
    let mut w = start.normalize();
    out[n - 1] = w.clone();
    for i in (0..n - 1).rev() {
        let lu = sample.steps[i].clone().lu();
        w = lu
            .solve(&w)
            .ok_or_else(|| SplittingError::Flow(FlowError::DegenerateFrame("singular step propagator".into())))?;
        w /= w.norm();
        out[i] = w.clone();
    }
    Ok(out)
}

/// The most contracted direction along the orbit, by backward power
/// iteration. Nodes within `window` of the end are not returned.
pub fn estimate_stable_direction<R: Rng + ?Sized>(
    sample: &CocycleSample,
    cfg: &PowerConfig,
    rng: &mut R,
) -> Result<DirectionField> {
    let w = window_nodes(sample, cfg)?;
    let m = sample.dim();
    let a = pull_back(sample, unit_vector(rng, m))?;
    let b = pull_back(sample, unit_vector(rng, m))?;
    let keep = sample.len() - w;
    let residual = (0..keep).map(|i| line_angle(&a[i], &b[i])).fold(0.0, f64::max);
    if !(residual < cfg.tol) {
        return Err(SplittingError::NotConverged { residual, tol: cfg.tol });
    }
    Ok(DirectionField { first_node: 0, vectors: a.into_iter().take(keep).collect(), residual })
}

fn push_forward(sample: &CocycleSample, start: KVector) -> Result<(Vec<KVector>, Vec<f64>)> {
    let k = start.grade();
    let mut out = Vec::with_capacity(sample.len());
    let mut logs = Vec::with_capacity(sample.len());
    let mut w = start.normalized();
    let mut log = 0.0;
    out.push(w.clone());
    logs.push(0.0);
    for step in &sample.steps {
        let next = compound_operator(step, k)?.apply(&w)?;
        let n = next.norm();
        log += n.ln();
        w = next.normalized();
        out.push(w.clone());
        logs.push(log);
    }
    Ok((out, logs))
}

/// The center bundle `F` of codimension one, from the dominant direction of
/// the `(m-1)`-st compound cocycle. Nodes within `window` of the start are
/// not returned.
pub fn estimate_center_bundle<R: Rng + ?Sized>(
    sample: &CocycleSample,
    cfg: &PowerConfig,
    rng: &mut R,
) -> Result<FrameField> {
    let w = window_nodes(sample, cfg)?;
    let m = sample.dim();
    if m < 2 {
        return Err(SplittingError::InvalidRequest("the center bundle needs m >= 2".into()));
    }
    let hodge = HodgeIdentification::new(m)?;
    let d = crate::exterior::binomial(m, m - 1);
    let start = |rng: &mut R| KVector::new(m, m - 1, unit_vector(rng, d));
    let (a, logs) = push_forward(sample, start(rng)?)?;
    let (b, _) = push_forward(sample, start(rng)?)?;
    let mut residual: f64 = 0.0;
    let mut frames = Vec::with_capacity(sample.len() - w);
    let mut normals = Vec::with_capacity(sample.len() - w);
    for i in w..sample.len() {
        let na = hodge.to_vector(&a[i])?;
        let nb = hodge.to_vector(&b[i])?;
        residual = residual.max(line_angle(&na, &nb));
        frames.push(orthonormal_complement(&na));
        normals.push(na.normalize());
    }
    if !(residual < cfg.tol) {
        return Err(SplittingError::NotConverged { residual, tol: cfg.tol });
    }
    let base = logs[w];
    Ok(FrameField {
        first_node: w,
        frames,
        normals,
        log_growth: logs[w..].iter().map(|l| l - base).collect(),
        residual,
    })
}

/// The splitting at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingPoint {
    pub time: f64,
    pub x: DVector<f64>,
    pub e: DVector<f64>,
    /// Orthonormal columns spanning `F`.
    pub f: DMatrix<f64>,
}

/// `E ⊕ F` at consecutive orbit nodes `first_node, first_node + 1, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingEstimate {
    pub first_node: usize,
    pub points: Vec<SplittingPoint>,
    pub residual_e: f64,
    pub residual_f: f64,
}

impl SplittingEstimate {
    /// Both bundles along the orbit, on the nodes where both sweeps have
    /// converged, i.e. at least one window away from either end.
    pub fn estimate<R: Rng + ?Sized>(sample: &CocycleSample, cfg: &PowerConfig, rng: &mut R) -> Result<Self> {
        let e = estimate_stable_direction(sample, cfg, rng)?;
        let f = estimate_center_bundle(sample, cfg, rng)?;
        let first = f.first_node;
        let end = e.first_node + e.vectors.len();
        if first >= end {
            return Err(SplittingError::TooShort { nodes: sample.len(), window: first });
        }
        let points = (first..end)
            .map(|i| SplittingPoint {
                time: sample.orbit.times[i],
                x: sample.orbit.states[i].clone(),
                e: e.vectors[i].clone(),
                f: f.frames[i - first].clone(),
            })
            .collect();
        Ok(Self { first_node: first, points, residual_e: e.residual, residual_f: f.residual })
    }

    /// A fixed splitting at every node of `sample` (linear systems).
    pub fn constant(sample: &CocycleSample, e: &DVector<f64>, f: &DMatrix<f64>) -> Self {
        let (f, _) = qr_orthonormalize(f);
        let points = sample
            .orbit
            .states
            .iter()
            .zip(&sample.orbit.times)
            .map(|(x, t)| SplittingPoint { time: *t, x: x.clone(), e: e.normalize(), f: f.clone() })
            .collect();
        Self { first_node: 0, points, residual_e: 0.0, residual_f: 0.0 }
    }

    /// A fixed splitting at arbitrary points, with no orbit structure.
    pub fn at_points(points: &[DVector<f64>], e: &DVector<f64>, f: &DMatrix<f64>) -> Self {
        let (f, _) = qr_orthonormalize(f);
        let points = points
            .iter()
            .map(|x| SplittingPoint { time: 0.0, x: x.clone(), e: e.normalize(), f: f.clone() })
            .collect();
        Self { first_node: 0, points, residual_e: 0.0, residual_f: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest angle between `A_t e(x)` and `e(X_t x)` over node pairs `lag`
    /// apart.
    pub fn invariance_residual(&self, sample: &CocycleSample, lag: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.points.len().saturating_sub(lag) {
            let node = self.first_node + i;
            let a = sample.propagator(node, node + lag);
            worst = worst.max(line_angle(&(a * &self.points[i].e), &self.points[i + lag].e));
        }
        worst
    }
}

/// The splitting at a singularity from the eigen-decomposition of `DX`:
/// `E` is the eigenvector of the most negative (real, simple) eigenvalue and
/// `F` is the invariant complement, normal to the matching left eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSplitting {
    /// Real parts of the eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub stable_eigenvalue: f64,
    pub e: DVector<f64>,
    pub f: DMatrix<f64>,
}

pub fn splitting_at_singularity(model: &VectorFieldModel, x: &DVector<f64>) -> Result<SingularSplitting> {
    let d = model.jacobian(x);
    let m = d.nrows();
    let ev = d.complex_eigenvalues();
    let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
    re.sort_by(|a, b| a.total_cmp(b));
    let stable = ev
        .iter()
        .min_by(|a, b| a.re.total_cmp(&b.re))
        .copied()
        .ok_or(SplittingError::NoStableEigenvalue)?;
    let scale = d.amax().max(1.0);
    if stable.im.abs() > 1e-12 * scale || m < 2 || re[1] - re[0] < 1e-9 * scale {
        return Err(SplittingError::NoStableEigenvalue);
    }
    let shifted = &d - DMatrix::identity(m, m) * stable.re;
    let e = null_vector(&shifted);
    let left = null_vector(&shifted.transpose());
    Ok(SingularSplitting { eigenvalues: re, stable_eigenvalue: stable.re, e, f: orthonormal_complement(&left) })
}

/// Log-volume growth of the estimated `F` along the rest of the orbit,
/// from the first node of the estimate, with QR re-orthonormalisation.
pub fn center_volume_rate(sample: &CocycleSample, est: &SplittingEstimate, renorm_every: usize) -> Result<RateReport> {
    let first = est.points.first().ok_or_else(|| SplittingError::InvalidRequest("empty splitting".into()))?;
    let tail = CocycleSample {
        orbit: crate::flow::OrbitSegment {
            times: sample.orbit.times[est.first_node..].iter().map(|t| t - first.time).collect(),
            states: sample.orbit.states[est.first_node..].to_vec(),
            step: sample.orbit.step,
        },
        fundamental: Vec::new(),
        steps: sample.steps[est.first_node..].to_vec(),
    };
    Ok(crate::flow::frame_growth(&tail, &first.f, renorm_every, "center volume"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowInCenterReport {
    pub max_angle: f64,
    pub worst_time: f64,
    pub checked: usize,
    pub skipped_singular: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Largest angle between `X(x)` and `F_x` over the regular points of the
/// estimate. Points with `|X| < 1e-8` are skipped.
pub fn flow_in_center_check(model: &VectorFieldModel, est: &SplittingEstimate, tol: f64) -> FlowInCenterReport {
    let mut report = FlowInCenterReport {
        max_angle: 0.0,
        worst_time: f64::NAN,
        checked: 0,
        skipped_singular: 0,
        tol,
        pass: false,
    };
    for p in &est.points {
        let x = model.eval(&p.x);
        if x.norm() < 1e-8 {
            report.skipped_singular += 1;
            continue;
        }
        report.checked += 1;
        let angle = angle_to_subspace(&x, &p.f);
        if angle > report.max_angle || report.worst_time.is_nan() {
            report.max_angle = report.max_angle.max(angle);
            report.worst_time = p.time;
        }
    }
    report.pass = report.checked > 0 && report.max_angle < tol;
    report
}

/// The norm `|w|² = ξ²·(−J(w_E) + J(w_F))` along a splitting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptedMetric {
    pub xi: f64,
    pub first_node: usize,
    #[serde(skip)]
    pub points: Vec<SplittingPoint>,
    /// `c_lo·|w| ≤ ‖w‖ ≤ c_hi·|w|` at every point, Euclidean `|·|`.
    pub equivalence: (f64, f64),
    #[serde(skip)]
    grams: Vec<DMatrix<f64>>,
}

impl AdaptedMetric {
    /// Gram matrix of the norm at point `i`, including `ξ²`.
    pub fn gram(&self, i: usize) -> &DMatrix<f64> {
        &self.grams[i]
    }

    pub fn norm(&self, i: usize, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.grams[i] * w)).max(0.0).sqrt()
    }
}

/// Gram matrix with `ξ = 1`: `P^T·diag(−J(e), F^T J F)·P` where `P` maps a
/// vector to its `(E, F)` coordinates.
fn unit_gram(j: &DMatrix<f64>, p: &SplittingPoint, sample: usize) -> Result<DMatrix<f64>> {
    let m = p.x.len();
    let basis = DMatrix::from_fn(m, m, |r, c| if c == 0 { p.e[r] } else { p.f[(r, c - 1)] });
    let coords = basis.try_inverse().ok_or_else(|| SplittingError::NotCompatible {
        sample,
        reason: "E and F are not transverse".into(),
    })?;
    let je = p.e.dot(&(j * &p.e));
    if !(je < 0.0) {
        return Err(SplittingError::NotCompatible { sample, reason: format!("J(e) = {je} is not negative") });
    }
    let jf = p.f.transpose() * j * &p.f;
    let min = sym_eigenvalues(&jf)[0];
    if !(min > 0.0) {
        return Err(SplittingError::NotCompatible {
            sample,
            reason: format!("J restricted to F has eigenvalue {min}"),
        });
    }
    let mut block = DMatrix::zeros(m, m);
    block[(0, 0)] = -je;
    block.view_mut((1, 1), (m - 1, m - 1)).copy_from(&jf);
    Ok(coords.transpose() * block * coords)
}

pub fn build_adapted_metric(
    est: &SplittingEstimate,
    field: &QuadFormField,
    model: &VectorFieldModel,
) -> Result<AdaptedMetric> {
    if est.is_empty() {
        return Err(SplittingError::InvalidRequest("empty splitting".into()));
    }
    let mut grams = Vec::with_capacity(est.len());
    let mut sup_x: f64 = 0.0;
    for (i, p) in est.points.iter().enumerate() {
        let g = unit_gram(field.at(&p.x), p, i)?;
        let x = model.eval(&p.x);
        sup_x = sup_x.max(x.dot(&(&g * &x)).max(0.0).sqrt());
        grams.push(g);
    }
    let xi = if sup_x > 1.0 { 1.0 / sup_x } else { 1.0 };
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for g in grams.iter_mut() {
        *g *= xi * xi;
        let ev = sym_eigenvalues(g);
        lo = lo.min(ev[0].max(0.0).sqrt());
        hi = hi.max(ev[ev.len() - 1].sqrt());
    }
    Ok(AdaptedMetric { xi, first_node: est.first_node, points: est.points.clone(), equivalence: (lo, hi), grams })
}

/// Worst case over sample points of each adaptedness quantity at one `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptednessRow {
    pub t: f64,
    /// `max ln ‖A_t|E‖`.
    pub log_contraction: f64,
    /// `max ln (‖A_t|E‖·‖(A_t|F)^{-1}‖)`.
    pub log_domination: f64,
    /// `min ln |det A_t|F|`.
    pub log_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptednessReport {
    pub rows: Vec<AdaptednessRow>,
    /// Largest λ with `‖A_t|E‖ ≤ e^{−λt}` at every sampled point and `t`.
    pub contraction_rate: f64,
    pub domination_rate: f64,
    pub volume_rate: f64,
    /// The smallest of the three: the largest λ for which all conditions
    /// hold with constant 1.
    pub lambda: f64,
    pub contraction_pass: bool,
    pub domination_pass: bool,
    pub volume_pass: bool,
    pub pass: bool,
    pub points_checked: usize,
}

/// Evaluates the three adaptedness conditions in the metric's norm at every
/// `stride`-th point and every `t` of `t_grid`, with constants `K = C = 1`.
pub fn verify_adaptedness(
    metric: &AdaptedMetric,
    sample: &CocycleSample,
    t_grid: &[f64],
    stride: usize,
) -> Result<AdaptednessReport> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(SplittingError::InvalidRequest("t grid must be non-empty and lie in (0, T]".into()));
    }
    let step = sample.orbit.step;
    let lags: Vec<usize> = t_grid.iter().map(|t| ((t / step).round() as usize).max(1)).collect();
    let max_lag = *lags.iter().max().expect("non-empty grid");
    let n = metric.points.len();
    if max_lag >= n {
        return Err(SplittingError::InvalidRequest(format!(
            "largest t needs {max_lag} steps but the splitting covers {n} nodes"
        )));
    }
    let m = sample.dim();
    let mut rows: Vec<AdaptednessRow> = lags
        .iter()
        .map(|l| AdaptednessRow {
            t: *l as f64 * step,
            log_contraction: f64::NEG_INFINITY,
            log_domination: f64::NEG_INFINITY,
            log_volume: f64::INFINITY,
        })
        .collect();
    let mut order: Vec<usize> = (0..lags.len()).collect();
    order.sort_by_key(|&k| lags[k]);
    let mut checked = 0;
    for i in (0..n - max_lag).step_by(stride.max(1)) {
        checked += 1;
        let node = metric.first_node + i;
        let p = &metric.points[i];
        let g0 = metric.gram(i);
        let e_norm0 = metric.norm(i, &p.e);
        let f_gram0 = p.f.transpose() * g0 * &p.f;
        let chol0 = Cholesky::new(f_gram0.clone()).ok_or_else(|| SplittingError::NotCompatible {
            sample: i,
            reason: "adapted norm is not positive on F".into(),
        })?;
        let l0_inv = chol0.l().try_inverse().expect("Cholesky factor is invertible");
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut at = 0;
        for &k in &order {
            for s in at..lags[k] {
                a = &sample.steps[node + s] * a;
            }
            at = lags[k];
            let j = i + lags[k];
            let q = &metric.points[j];
            let g1 = metric.gram(j);
            let contraction = metric.norm(j, &(&a * &p.e)) / e_norm0;
            // Coordinates of A·F_x in the frame of F at the image point.
            let c = q.f.transpose() * &a * &p.f;
            let f_gram1 = q.f.transpose() * g1 * &q.f;
            let pulled = c.transpose() * &f_gram1 * &c;
            let sym = &l0_inv * pulled * l0_inv.transpose();
            let ev = sym_eigenvalues(&sym);
            let min_stretch = ev[0].max(0.0).sqrt();
            let vol = c.determinant().abs() * (f_gram1.determinant() / f_gram0.determinant()).sqrt();
            let row = &mut rows[k];
            row.log_contraction = row.log_contraction.max(contraction.ln());
            row.log_domination = row.log_domination.max(contraction.ln() - min_stretch.ln());
            row.log_volume = row.log_volume.min(vol.ln());
        }
    }
    let rate = |f: &dyn Fn(&AdaptednessRow) -> f64| rows.iter().map(|r| f(r) / r.t).fold(f64::INFINITY, f64::min);
    let contraction_rate = rate(&|r| -r.log_contraction);
    let domination_rate = rate(&|r| -r.log_domination);
    let volume_rate = rate(&|r| r.log_volume);
    let lambda = contraction_rate.min(domination_rate).min(volume_rate);
    Ok(AdaptednessReport {
        rows,
        contraction_rate,
        domination_rate,
        volume_rate,
        lambda,
        contraction_pass: contraction_rate > 0.0,
        domination_pass: domination_rate > 0.0,
        volume_pass: volume_rate > 0.0,
        pass: lambda > 0.0,
        points_checked: checked,
    })
}

/// Exponential fit of the dominant `(m-1)`-vector's norm growth.
pub fn compound_growth_rate(frames: &FrameField, sample: &CocycleSample) -> RateReport {
    let t0 = sample.orbit.times[frames.first_node];
    let times: Vec<f64> = sample.orbit.times[frames.first_node..].iter().map(|t| t - t0).collect();
    fit_rate("compound growth", &times, &frames.log_growth)
}
