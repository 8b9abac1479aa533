//! Run configuration: a JSON document describing the system, the form `J`,
//! the sampling plan and every tolerance. Parsing reports all constraint
//! violations at once.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use singhyp::flow::KNOWN_SYSTEMS;
use singhyp::io::to_json_string;
use singhyp::splitting::PowerConfig;
use singhyp::{make_system, CertifyConfig, DeltaConfig, DeltaPolicy, FlowError, QuadFormField, SamplingPlan, VectorFieldModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config {path}: {source}")]
    Malformed { path: PathBuf, source: serde_json::Error },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Thresholds of the certification pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub delta: DeltaConfig,
    pub endpoint_threshold: f64,
    pub max_residual_fraction: f64,
    pub b_floor: f64,
    pub cone_vectors: usize,
    pub cone_probe_time: f64,
    pub cone_samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = CertifyConfig::default();
        Self {
            delta: c.delta,
            endpoint_threshold: c.endpoint_threshold,
            max_residual_fraction: c.max_residual_fraction,
            b_floor: c.b_floor,
            cone_vectors: c.cone_vectors,
            cone_probe_time: c.cone_probe_time,
            cone_samples: c.cone_samples,
        }
    }
}

/// Settings of the splitting and adapted-metric pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricSettings {
    pub power: PowerConfig,
    /// Times `t` at which the adaptedness inequalities are evaluated.
    pub t_grid: Vec<f64>,
    /// Every `stride`-th splitting point is checked.
    pub stride: usize,
    /// Largest angle tolerated between `X(x)` and the estimated `F(x)`.
    pub flow_angle_tol: f64,
}

impl Default for MetricSettings {
    fn default() -> Self {
        Self {
            power: PowerConfig::default(),
            t_grid: (1..=10).map(|i| 0.2 * i as f64).collect(),
            stride: 10,
            flow_angle_tol: 5e-2,
        }
    }
}

fn default_policies() -> Vec<DeltaPolicy> {
    DeltaPolicy::NAMED.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("singhyp-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    /// Constant symmetric form; `diag(-1, 1, …, 1)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<Vec<f64>>>,
    pub plan: SamplingPlan,
    #[serde(default = "default_policies")]
    pub policies: Vec<DeltaPolicy>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub metric: MetricSettings,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn model(&self) -> Result<VectorFieldModel, FlowError> {
        make_system(&self.system.name, &self.system.params)
    }

    pub fn field(&self, dim: usize) -> Result<QuadFormField, String> {
        match &self.j {
            None if dim >= 2 => Ok(QuadFormField::standard(dim)),
            None => Err(format!("system dimension {dim} admits no indefinite form")),
            Some(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(format!("j must be a {dim}×{dim} matrix"));
                }
                let m = DMatrix::from_fn(dim, dim, |i, k| rows[i][k]);
                QuadFormField::new(m).map_err(|e| format!("j: {e}"))
            }
        }
    }

    pub fn certify_config(&self) -> CertifyConfig {
        let t = &self.tolerances;
        CertifyConfig {
            policies: self.policies.clone(),
            delta: t.delta,
            endpoint_threshold: t.endpoint_threshold,
            max_residual_fraction: t.max_residual_fraction,
            b_floor: t.b_floor,
            cone_vectors: t.cone_vectors,
            cone_probe_time: t.cone_probe_time,
            cone_samples: t.cone_samples,
            seed: self.seed,
        }
    }

    /// Canonical JSON form, as echoed into reports.
    pub fn emit(&self) -> String {
        to_json_string(self).expect("config serialises")
    }

    /// SHA-256 of [`RunConfig::emit`], hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.emit().as_bytes()))
    }

    /// Every constraint violation, in a stable order.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut dim = None;
        if !KNOWN_SYSTEMS.contains(&self.system.name.as_str()) {
            out.push(format!(
                "system.name: unknown system `{}`; known systems: {}",
                self.system.name,
                KNOWN_SYSTEMS.join(", ")
            ));
        } else {
            match self.model() {
                Ok(m) => dim = Some(m.dim()),
                Err(e) => out.push(format!("system.params: {e}")),
            }
        }
        for (k, v) in &self.system.params {
            if !v.is_finite() {
                out.push(format!("system.params.{k} must be finite"));
            }
        }
        if let Some(d) = dim {
            if let Err(e) = self.field(d) {
                out.push(e);
            }
        }
        if let Err(e) = self.plan.validate(dim.unwrap_or_else(|| self.plan.initial_conditions.first().map_or(0, Vec::len))) {
            let text = e.to_string();
            let body = text.strip_prefix("invalid sampling plan: ").unwrap_or(&text);
            out.extend(body.split("; ").map(|p| format!("plan: {p}")));
        }
        if self.policies.is_empty() {
            out.push("policies must not be empty".into());
        }
        for p in &self.policies {
            if let DeltaPolicy::Fixed(v) = p {
                if !v.is_finite() {
                    out.push("policies: fixed δ must be finite".into());
                }
            }
        }
        let t = &self.tolerances;
        let positive = [
            ("tolerances.delta.window", t.delta.window),
            ("tolerances.delta.tol", t.delta.tol),
            ("tolerances.delta.eps", t.delta.eps),
            ("tolerances.max_residual_fraction", t.max_residual_fraction),
            ("tolerances.cone_probe_time", t.cone_probe_time),
            ("metric.power.tol", self.metric.power.tol),
            ("metric.flow_angle_tol", self.metric.flow_angle_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive and finite, got {v}"));
            }
        }
        let nonnegative = [
            ("tolerances.delta.margin", t.delta.margin),
            ("tolerances.endpoint_threshold", t.endpoint_threshold),
            ("metric.power.window", self.metric.power.window),
        ];
        for (name, v) in nonnegative {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} must be non-negative and finite, got {v}"));
            }
        }
        if !t.b_floor.is_finite() {
            out.push("tolerances.b_floor must be finite".into());
        }
        if t.cone_vectors == 0 {
            out.push("tolerances.cone_vectors must be at least 1".into());
        }
        if t.cone_samples == 0 {
            out.push("tolerances.cone_samples must be at least 1".into());
        }
        if self.metric.t_grid.is_empty() || self.metric.t_grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            out.push("metric.t_grid must be a non-empty list of positive times".into());
        }
        if self.metric.stride == 0 {
            out.push("metric.stride must be at least 1".into());
        }
        out
    }

    pub fn validate(self) -> Result<Self, ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }
}

pub fn parse_str(text: &str, origin: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RunConfig =
        serde_json::from_str(text).map_err(|source| ConfigError::Malformed { path: origin.to_path_buf(), source })?;
    raw.validate()
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"name": "lorenz", "params": {"sigma": 10, "rho": 28, "beta": 2.6666666666666665}},
        "plan": {"initial_conditions": [[1, 1, 20]], "transient": 10, "horizon": 20, "step": 0.001, "stride": 10}
    }"#;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_str(text, Path::new("test.json"))
    }

    #[test]
    fn minimal_lorenz_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.tolerances.delta.window, 1e3);
        assert_eq!(c.tolerances.delta.tol, 1e-9);
        assert_eq!(c.tolerances.endpoint_threshold, 10f64.ln());
        assert_eq!(c.policies, DeltaPolicy::NAMED.to_vec());
        assert_eq!(c.seed, 0);
        assert_eq!(c.output, PathBuf::from("singhyp-out"));
        assert_eq!(c.field(3).unwrap(), QuadFormField::standard(3));
        assert_eq!(c.certify_config(), CertifyConfig::default());
    }

    #[test]
    fn emit_round_trips() {
        let mut c = parse(MINIMAL).unwrap();
        c.j = Some(vec![vec![-1.0, 0.0, 0.0], vec![0.0, 2.0, 0.5], vec![0.0, 0.5, 1.0]]);
        c.policies = vec![DeltaPolicy::Midpoint, DeltaPolicy::Fixed(-0.1)];
        c.seed = 99;
        let back = parse(&c.emit()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        assert_eq!(c.digest().len(), 64);
    }

    #[test]
    fn zero_step_names_the_field() {
        let text = MINIMAL.replace("\"step\": 0.001", "\"step\": 0");
        let ConfigError::Invalid(p) = parse(&text).unwrap_err() else { panic!() };
        assert_eq!(p.len(), 1);
        assert!(p[0].contains("step"), "{p:?}");
    }

    #[test]
    fn unknown_system_lists_known_ones() {
        let text = MINIMAL.replace("lorenz", "rossler");
        let ConfigError::Invalid(p) = parse(&text).unwrap_err() else { panic!() };
        assert!(p[0].contains("rossler"));
        for k in KNOWN_SYSTEMS {
            assert!(p[0].contains(k));
        }
    }

    #[test]
    fn all_problems_are_reported() {
        let text = MINIMAL
            .replace("\"step\": 0.001", "\"step\": -1")
            .replace("\"stride\": 10", "\"stride\": 0")
            .replace("\"transient\": 10", "\"transient\": 30");
        let ConfigError::Invalid(p) = parse(&text).unwrap_err() else { panic!() };
        assert_eq!(p.len(), 3, "{p:?}");
    }

    #[test]
    fn bad_form_is_rejected() {
        let text = MINIMAL.replace("\"plan\"", "\"j\": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], \"plan\"");
        let ConfigError::Invalid(p) = parse(&text).unwrap_err() else { panic!() };
        assert!(p[0].starts_with("j:"), "{p:?}");
    }

    #[test]
    fn malformed_and_unknown_fields() {
        assert!(matches!(parse("{"), Err(ConfigError::Malformed { .. })));
        let text = MINIMAL.replacen("{", "{\"sedd\": 3,", 1);
        assert!(matches!(parse(&text), Err(ConfigError::Malformed { .. })));
        assert!(matches!(parse_config(Path::new("/nonexistent/x.json")), Err(ConfigError::Read { .. })));
    }
}
