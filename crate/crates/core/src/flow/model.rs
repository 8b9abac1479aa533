use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{FlowError, Result};
use crate::linalg;

pub const KNOWN_SYSTEMS: [&str; 3] = ["lorenz", "diag_linear", "linear"];

#[derive(Debug, Clone, PartialEq)]
pub enum SystemKind {
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    /// `X(x) = diag(d) x`.
    DiagLinear(Vec<f64>),
    /// `X(x) = M x`.
    Linear(DMatrix<f64>),
}

/// A smooth vector field with its exact Jacobian.
///
/// `orientation` is `+1` for `X` and `-1` for the time-reversed field `-X`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldModel {
    name: String,
    params: BTreeMap<String, f64>,
    kind: SystemKind,
    orientation: f64,
}

impl VectorFieldModel {
    pub fn lorenz(sigma: f64, rho: f64, beta: f64) -> Self {
        let params = [("sigma", sigma), ("rho", rho), ("beta", beta)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Self {
            name: "lorenz".into(),
            params,
            kind: SystemKind::Lorenz { sigma, rho, beta },
            orientation: 1.0,
        }
    }

    pub fn diag_linear(d: &[f64]) -> Self {
        let params = d.iter().enumerate().map(|(i, &v)| (format!("d{}", i + 1), v)).collect();
        Self {
            name: "diag_linear".into(),
            params,
            kind: SystemKind::DiagLinear(d.to_vec()),
            orientation: 1.0,
        }
    }

    pub fn linear(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "linear system needs a square matrix");
        let mut params = BTreeMap::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                params.insert(format!("a{}_{}", i + 1, j + 1), m[(i, j)]);
            }
        }
        Self { name: "linear".into(), params, kind: SystemKind::Linear(m), orientation: 1.0 }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn kind(&self) -> &SystemKind {
        &self.kind
    }

    pub fn is_reversed(&self) -> bool {
        self.orientation < 0.0
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SystemKind::Lorenz { .. } => 3,
            SystemKind::DiagLinear(d) => d.len(),
            SystemKind::Linear(m) => m.nrows(),
        }
    }

    /// The field `-X`, whose flow is the time reversal of this one.
    pub fn reversed(&self) -> Self {
        let mut out = self.clone();
        out.orientation = -self.orientation;
        out
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self.kind, SystemKind::Lorenz { .. })
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = match &self.kind {
            SystemKind::Lorenz { sigma, rho, beta } => DVector::from_vec(vec![
                sigma * (x[1] - x[0]),
                x[0] * (rho - x[2]) - x[1],
                x[0] * x[1] - beta * x[2],
            ]),
            SystemKind::DiagLinear(d) => DVector::from_fn(d.len(), |i, _| d[i] * x[i]),
            SystemKind::Linear(m) => m * x,
        };
        if self.is_reversed() {
            out.neg_mut();
        }
        out
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = match &self.kind {
            SystemKind::Lorenz { sigma, rho, beta } => DMatrix::from_row_slice(3, 3, &[
                -sigma, *sigma, 0.0,
                rho - x[2], -1.0, -x[0],
                x[1], x[0], -beta,
            ]),
            SystemKind::DiagLinear(d) => DMatrix::from_diagonal(&DVector::from_row_slice(d)),
            SystemKind::Linear(m) => m.clone(),
        };
        if self.is_reversed() {
            out.neg_mut();
        }
        out
    }

    pub fn divergence(&self, x: &DVector<f64>) -> f64 {
        linalg::trace(&self.jacobian(x))
    }
}

/// Builds a model from a system name and named real parameters.
///
/// * `lorenz`: `sigma`, `rho`, `beta`.
/// * `diag_linear`: `d1, …, dm` (the dimension is the number of consecutive
///   keys starting at `d1`).
/// * `linear`: `a{i}_{j}` for `1 ≤ i, j ≤ m`, 1-based.
pub fn make_system(name: &str, params: &BTreeMap<String, f64>) -> Result<VectorFieldModel> {
    let get = |key: &str| {
        params.get(key).copied().ok_or_else(|| FlowError::MissingParameter {
            system: name.to_string(),
            param: key.to_string(),
        })
    };
    let model = match name {
        "lorenz" => VectorFieldModel::lorenz(get("sigma")?, get("rho")?, get("beta")?),
        "diag_linear" => {
            let m = (1..).take_while(|i| params.contains_key(&format!("d{i}"))).count();
            if m == 0 {
                return Err(FlowError::MissingParameter { system: name.into(), param: "d1".into() });
            }
            if let Some(extra) = params.keys().find(|k| !(1..=m).any(|i| **k == format!("d{i}"))) {
                return Err(FlowError::InvalidParameter {
                    system: name.into(),
                    reason: format!("unexpected parameter `{extra}` (diagonal has {m} entries)"),
                });
            }
            let d: Vec<f64> = (1..=m).map(|i| params[&format!("d{i}")]).collect();
            VectorFieldModel::diag_linear(&d)
        }
        "linear" => {
            let m = (1..).take_while(|i| params.contains_key(&format!("a{i}_{i}"))).count();
            if m == 0 {
                return Err(FlowError::MissingParameter { system: name.into(), param: "a1_1".into() });
            }
            let mut a = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    a[(i, j)] = get(&format!("a{}_{}", i + 1, j + 1))?;
                }
            }
            if params.len() != m * m {
                return Err(FlowError::InvalidParameter {
                    system: name.into(),
                    reason: format!("expected {} entries for a {m}×{m} matrix, got {}", m * m, params.len()),
                });
            }
            VectorFieldModel::linear(a)
        }
        other => {
            return Err(FlowError::UnknownSystem {
                name: other.to_string(),
                known: KNOWN_SYSTEMS.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    if let Some((k, v)) = model.params().iter().find(|(_, v)| !v.is_finite()) {
        return Err(FlowError::InvalidParameter {
            system: name.into(),
            reason: format!("parameter `{k}` = {v} is not finite"),
        });
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn lorenz_trace_is_constant() {
        let m = make_system("lorenz", &params(&[("sigma", 10.0), ("rho", 28.0), ("beta", 8.0 / 3.0)])).unwrap();
        for x in [[0.0, 0.0, 0.0], [1.0, -3.0, 20.0], [-8.0, 4.0, 40.0]] {
            let t = m.divergence(&DVector::from_row_slice(&x));
            assert!((t + 41.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn diag_linear_eval() {
        let m = make_system("diag_linear", &params(&[("d1", -2.0), ("d2", 1.0), ("d3", 1.0)])).unwrap();
        assert_eq!(m.dim(), 3);
        let x = m.eval(&DVector::from_row_slice(&[1.0, 1.0, 1.0]));
        assert_eq!(x.as_slice(), &[-2.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_linear_field() {
        let mut p = BTreeMap::new();
        for i in 1..=3 {
            for j in 1..=3 {
                p.insert(format!("a{i}_{j}"), 0.0);
            }
        }
        let m = make_system("linear", &p).unwrap();
        let x = DVector::from_row_slice(&[3.0, -1.0, 2.0]);
        assert_eq!(m.eval(&x).norm(), 0.0);
    }

    #[test]
    fn construction_errors() {
        match make_system("rossler", &BTreeMap::new()) {
            Err(FlowError::UnknownSystem { known, .. }) => assert_eq!(known.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(
            make_system("lorenz", &params(&[("sigma", 10.0), ("rho", 28.0)])),
            Err(FlowError::MissingParameter { system: "lorenz".into(), param: "beta".into() })
        );
        assert!(matches!(
            make_system("linear", &params(&[("a1_1", 1.0), ("a2_2", 1.0), ("a1_2", 0.0)])),
            Err(FlowError::MissingParameter { .. })
        ));
        assert!(matches!(
            make_system("diag_linear", &params(&[("d1", 1.0), ("d3", 1.0)])),
            Err(FlowError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn reversed_negates() {
        let m = VectorFieldModel::lorenz(10.0, 28.0, 8.0 / 3.0);
        let r = m.reversed();
        let x = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(r.eval(&x), -m.eval(&x));
        assert_eq!(r.jacobian(&x), -m.jacobian(&x));
        assert_eq!(r.reversed(), m);
    }

    #[test]
    fn jacobians_match_central_differences() {
        let mut rng = crate::rng::SeedStream::new(11).stream(0);
        let a = crate::rng::gaussian_matrix(&mut rng, 4, 4);
        let models = [
            VectorFieldModel::lorenz(10.0, 28.0, 8.0 / 3.0),
            VectorFieldModel::diag_linear(&[-2.0, 1.0, -0.5]),
            VectorFieldModel::linear(a),
        ];
        for model in &models {
            let m = model.dim();
            for _ in 0..100 {
                let x = DVector::from_fn(m, |_, _| rng.random_range(-20.0..20.0));
                let jac = model.jacobian(&x);
                let h = 1e-5;
                let mut fd = DMatrix::zeros(m, m);
                for j in 0..m {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[j] += h;
                    xm[j] -= h;
                    fd.set_column(j, &((model.eval(&xp) - model.eval(&xm)) / (2.0 * h)));
                }
                assert!(crate::tolerance::matrices_close(&jac, &fd, 1e-5), "{}", model.name());
            }
        }
    }
}
