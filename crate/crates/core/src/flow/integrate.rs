use nalgebra::{DMatrix, DVector};

use super::{FlowError, Result, VectorFieldModel};
use crate::exterior::{compound_operator, CompoundOperator};

/// States with a larger Euclidean norm abort the integration.
pub const BLOWUP_NORM: f64 = 1e12;

/// An orbit sampled on the uniform grid `t_i = i·step`, `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSegment {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub step: f64,
}

impl OrbitSegment {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("orbit has at least the initial state")
    }
}

/// The derivative cocycle along an orbit.
///
/// `steps[i]` is the RK4 propagator of the variational equation from `t_i` to
/// `t_{i+1}`, and `fundamental[i] = steps[i-1]·…·steps[0]` is `A_{t_i}(x_0)`
/// with `fundamental[0] = Id`.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleSample {
    pub orbit: OrbitSegment,
    pub fundamental: Vec<DMatrix<f64>>,
    pub steps: Vec<DMatrix<f64>>,
}

impl CocycleSample {
    pub fn len(&self) -> usize {
        self.fundamental.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fundamental.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.orbit.states[0].len()
    }

    /// `A(t_to ← t_from) = steps[to-1]·…·steps[from]`, built from step
    /// propagators rather than from inverted fundamental matrices.
    pub fn propagator(&self, from: usize, to: usize) -> DMatrix<f64> {
        assert!(from <= to && to < self.len(), "propagator indices out of range");
        let m = self.dim();
        self.steps[from..to].iter().fold(DMatrix::identity(m, m), |acc, s| s * acc)
    }
}

fn grid(duration: f64, h: f64) -> Result<(usize, f64)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(FlowError::InvalidRequest(format!("step must be positive, got {h}")));
    }
    if !duration.is_finite() || duration < 0.0 {
        return Err(FlowError::InvalidRequest(format!("duration must be non-negative, got {duration}")));
    }
    if duration == 0.0 {
        return Ok((0, h));
    }
    if duration < h * (1.0 - 1e-12) {
        return Err(FlowError::InvalidRequest(format!("duration {duration} is shorter than step {h}")));
    }
    // The grid ends exactly at `duration`; the step is shrunk at most by one
    // part in n.
    let n = (duration / h - 1e-9).ceil().max(1.0) as usize;
    Ok((n, duration / n as f64))
}

fn check_state(x: &DVector<f64>, t: f64) -> Result<()> {
    let n = x.norm();
    if !n.is_finite() || n > BLOWUP_NORM {
        return Err(FlowError::BlowUp { last_valid_time: t });
    }
    Ok(())
}

/// One classical RK4 step.
pub fn rk4_step(model: &VectorFieldModel, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let k1 = model.eval(x);
    let k2 = model.eval(&(x + &k1 * (h / 2.0)));
    let k3 = model.eval(&(x + &k2 * (h / 2.0)));
    let k4 = model.eval(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Joint RK4 step of `x' = X(x)`, `Ψ' = DX(x)Ψ` started from `Ψ = Id`.
/// Because the variational equation is linear in `Ψ`, the returned matrix is
/// exactly the map `Ψ_n ↦ Ψ_{n+1}` of the joint scheme.
fn rk4_variational_step(model: &VectorFieldModel, x: &DVector<f64>, h: f64) -> (DVector<f64>, DMatrix<f64>) {
    let m = x.len();
    let id = DMatrix::<f64>::identity(m, m);
    let k1 = model.eval(x);
    let j1 = model.jacobian(x);
    let x2 = x + &k1 * (h / 2.0);
    let k2 = model.eval(&x2);
    let j2 = model.jacobian(&x2) * (&id + &j1 * (h / 2.0));
    let x3 = x + &k2 * (h / 2.0);
    let k3 = model.eval(&x3);
    let j3 = model.jacobian(&x3) * (&id + &j2 * (h / 2.0));
    let x4 = x + &k3 * h;
    let k4 = model.eval(&x4);
    let j4 = model.jacobian(&x4) * (&id + &j3 * h);
    let x_next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    let step = id + (j1 + j2 * 2.0 + j3 * 2.0 + j4) * (h / 6.0);
    (x_next, step)
}

fn check_start(model: &VectorFieldModel, x0: &DVector<f64>) -> Result<()> {
    if x0.len() != model.dim() {
        return Err(FlowError::InvalidRequest(format!(
            "initial point has dimension {}, model `{}` has {}",
            x0.len(),
            model.name(),
            model.dim()
        )));
    }
    check_state(x0, 0.0)
}

/// Fixed-step RK4 orbit on `[0, duration]`.
pub fn integrate_orbit(model: &VectorFieldModel, x0: &DVector<f64>, duration: f64, h: f64) -> Result<OrbitSegment> {
    check_start(model, x0)?;
    let (n, step) = grid(duration, h)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0.clone());
    for i in 0..n {
        let next = rk4_step(model, &states[i], step);
        check_state(&next, times[i])?;
        times.push((i + 1) as f64 * step);
        states.push(next);
    }
    Ok(OrbitSegment { times, states, step })
}

/// Orbit together with the derivative cocycle, same RK4 scheme and grid.
pub fn integrate_cocycle(model: &VectorFieldModel, x0: &DVector<f64>, duration: f64, h: f64) -> Result<CocycleSample> {
    check_start(model, x0)?;
    let (n, step) = grid(duration, h)?;
    let m = model.dim();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut fundamental = Vec::with_capacity(n + 1);
    let mut steps = Vec::with_capacity(n);
    times.push(0.0);
    states.push(x0.clone());
    fundamental.push(DMatrix::identity(m, m));
    for i in 0..n {
        let (next, prop) = rk4_variational_step(model, &states[i], step);
        check_state(&next, times[i])?;
        let a = &prop * &fundamental[i];
        if a.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::BlowUp { last_valid_time: times[i] });
        }
        times.push((i + 1) as f64 * step);
        states.push(next);
        fundamental.push(a);
        steps.push(prop);
    }
    Ok(CocycleSample { orbit: OrbitSegment { times, states, step }, fundamental, steps })
}

/// `∧^k A_{t_i}` for every grid time.
pub fn compound_cocycle(sample: &CocycleSample, k: usize) -> Result<Vec<CompoundOperator>> {
    sample
        .fundamental
        .iter()
        .map(|a| compound_operator(a, k).map_err(FlowError::from))
        .collect()
}
