//! Subcommand pipelines. Each returns its exit code and the files it wants
//! written; nothing here touches the file system.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::Serialize;
use singhyp::certifier::{certify_detailed, CertifyError, CertifyRun};
use singhyp::io::{
    to_json_string, write_adaptedness_csv, write_cocycle_csv, write_delta_csv, write_orbit_csv, write_splitting_csv,
    IoError,
};
use singhyp::rng::{streams, SeedStream};
use singhyp::splitting::{
    build_adapted_metric, flow_in_center_check, verify_adaptedness, AdaptednessReport, SplittingError,
};
use singhyp::{integrate_cocycle, Certificate, FlowError, SplittingEstimate, Verdict};
use thiserror::Error;

use crate::config::RunConfig;
use crate::identities::run_identities;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Splitting(#[from] SplittingError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Files of one run, written in order by a single writer.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ReportBundle {
    pub files: Vec<(String, Vec<u8>)>,
    pub log: String,
}

impl ReportBundle {
    fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn line(&mut self, text: impl AsRef<str>) {
        self.log.push_str(text.as_ref());
        self.log.push('\n');
    }

    #[cfg(test)]
    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub bundle: ReportBundle,
}

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    certificate: &'a Certificate,
    config_digest: String,
    config: &'a RunConfig,
}

fn header(bundle: &mut ReportBundle, cfg: &RunConfig, what: &str) {
    bundle.line(format!("singhyp {} {what}", singhyp::VERSION));
    bundle.line(format!("config digest {}", cfg.digest()));
    bundle.line(format!("system {} seed {}", cfg.system.name, cfg.seed));
}

fn csv<F>(write: F) -> Result<Vec<u8>, RunError>
where
    F: FnOnce(&mut Vec<u8>) -> Result<(), IoError>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn run_certification(cfg: &RunConfig) -> Result<CertifyRun, RunError> {
    let model = cfg.model()?;
    let field = cfg.field(model.dim()).map_err(RunError::Setup)?;
    Ok(certify_detailed(&model, &field, &cfg.plan, &cfg.certify_config())?)
}

fn log_certificate(bundle: &mut ReportBundle, c: &Certificate) {
    bundle.line(format!("samples {} ({} regular)", c.plan.samples, c.plan.regular_samples));
    for r in &c.criteria {
        let mut s = format!("criterion {}", r.id);
        if let Some(p) = r.policy {
            let _ = write!(s, " [{p}]");
        }
        let _ = write!(s, ": {} margin {:.6e}", if r.pass { "pass" } else { "fail" }, r.margin);
        if let Some(slope) = r.slope {
            let _ = write!(s, " slope {slope:.6e}");
        }
        if !r.note.is_empty() {
            let _ = write!(s, " ({})", r.note);
        }
        bundle.line(s);
    }
    bundle.line(format!("verdict {}", c.verdict));
}

fn add_certification_files(bundle: &mut ReportBundle, run: &CertifyRun) -> Result<(), RunError> {
    for o in &run.plan.orbits {
        let k = o.initial_condition;
        bundle.add(format!("orbit_{k}.csv"), csv(|b| write_orbit_csv(b, &o.orbit))?);
    }
    for per_policy in &run.series {
        for (k, s) in per_policy.iter().enumerate() {
            if let Ok(s) = s {
                bundle.add(format!("delta_{}_{k}.csv", s.policy.name()), csv(|b| write_delta_csv(b, s))?);
            }
        }
    }
    Ok(())
}

fn add_certificate(bundle: &mut ReportBundle, cfg: &RunConfig, c: &Certificate) -> Result<(), RunError> {
    let report = Report { certificate: c, config_digest: cfg.digest(), config: cfg };
    bundle.add("certificate.json", to_json_string(&report)?.into_bytes());
    Ok(())
}

pub fn certify(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut bundle = ReportBundle::default();
    header(&mut bundle, cfg, "certify");
    let run = run_certification(cfg)?;
    log_certificate(&mut bundle, &run.certificate);
    add_certificate(&mut bundle, cfg, &run.certificate)?;
    add_certification_files(&mut bundle, &run)?;
    Ok(Outcome { exit_code: run.certificate.verdict.exit_code(), bundle })
}

/// The more severe of two exit codes: certified < inconclusive < refuted.
fn worse(a: i32, b: i32) -> i32 {
    let rank = |c: i32| match c {
        0 => 0,
        2 => 1,
        _ => 2,
    };
    if rank(b) > rank(a) {
        b
    } else {
        a
    }
}

/// Splitting estimate and adapted metric along every post-transient orbit,
/// on top of the certification run. The worst adaptedness report is
/// embedded in the certificate.
pub fn metric(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut bundle = ReportBundle::default();
    header(&mut bundle, cfg, "metric");
    let run = run_certification(cfg)?;
    log_certificate(&mut bundle, &run.certificate);
    let model = cfg.model()?;
    let field = cfg.field(model.dim()).map_err(RunError::Setup)?;
    let mut code = run.certificate.verdict.exit_code();
    let mut worst: Option<AdaptednessReport> = None;
    for o in &run.plan.orbits {
        let k = o.initial_condition;
        let start = o.orbit.states[0].clone();
        let sample = integrate_cocycle(&model, &start, cfg.plan.window(), cfg.plan.step)?;
        let mut rng = SeedStream::new(cfg.seed).stream(streams::SPLITTING_START);
        rng.set_word_pos(k as u128 * (1 << 24));
        let est = match SplittingEstimate::estimate(&sample, &cfg.metric.power, &mut rng) {
            Ok(e) => e,
            Err(SplittingError::NotConverged { residual, tol }) => {
                bundle.line(format!("orbit {k}: splitting not converged (residual {residual:.3e} > {tol:.1e})"));
                code = worse(code, Verdict::Inconclusive.exit_code());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        bundle.line(format!(
            "orbit {k}: splitting on {} points, residuals E {:.3e} F {:.3e}",
            est.len(),
            est.residual_e,
            est.residual_f
        ));
        bundle.add(format!("splitting_{k}.csv"), csv(|b| write_splitting_csv(b, &est))?);
        let flow = flow_in_center_check(&model, &est, cfg.metric.flow_angle_tol);
        bundle.line(format!(
            "orbit {k}: flow direction in F: {} (max angle {:.3e} over {} points)",
            if flow.pass { "pass" } else { "fail" },
            flow.max_angle,
            flow.checked
        ));
        if !flow.pass {
            code = worse(code, Verdict::RefutedAtSample.exit_code());
        }
        let adapted = match build_adapted_metric(&est, &field, &model) {
            Ok(m) => m,
            Err(SplittingError::NotCompatible { sample, reason }) => {
                bundle.line(format!("orbit {k}: splitting incompatible with J at point {sample}: {reason}"));
                code = worse(code, Verdict::RefutedAtSample.exit_code());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let report = verify_adaptedness(&adapted, &sample, &cfg.metric.t_grid, cfg.metric.stride)?;
        bundle.line(format!(
            "orbit {k}: xi {:.6e}, rates contraction {:.6e} domination {:.6e} volume {:.6e}, lambda {:.6e}: {}",
            adapted.xi,
            report.contraction_rate,
            report.domination_rate,
            report.volume_rate,
            report.lambda,
            if report.pass { "pass" } else { "fail" }
        ));
        if !report.pass {
            code = worse(code, Verdict::RefutedAtSample.exit_code());
        }
        bundle.add(format!("adaptedness_{k}.csv"), csv(|b| write_adaptedness_csv(b, &report))?);
        if worst.as_ref().is_none_or(|w| report.lambda < w.lambda) {
            worst = Some(report);
        }
    }
    let mut certificate = run.certificate.clone();
    certificate.adapted_metric = worst;
    bundle.line(format!("metric outcome exit code {code}"));
    add_certificate(&mut bundle, cfg, &certificate)?;
    add_certification_files(&mut bundle, &run)?;
    Ok(Outcome { exit_code: code, bundle })
}

/// Integration only: full orbit and cocycle from every initial condition.
pub fn orbit(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let mut bundle = ReportBundle::default();
    header(&mut bundle, cfg, "orbit");
    let model = cfg.model()?;
    for (k, x0) in cfg.plan.initial_conditions.iter().enumerate() {
        let x0 = DVector::from_column_slice(x0);
        let sample = integrate_cocycle(&model, &x0, cfg.plan.horizon, cfg.plan.step)?;
        bundle.line(format!("orbit {k}: {} nodes, final state {:?}", sample.len(), sample.orbit.last().as_slice()));
        bundle.add(format!("orbit_{k}.csv"), csv(|b| write_orbit_csv(b, &sample.orbit))?);
        bundle.add(format!("cocycle_{k}.csv"), csv(|b| write_cocycle_csv(b, &sample))?);
    }
    Ok(Outcome { exit_code: 0, bundle })
}

pub fn identities(dim: usize, trials: usize, seed: u64) -> Result<Outcome, RunError> {
    let report = run_identities(dim, trials, seed);
    let mut bundle = ReportBundle::default();
    bundle.line(format!("singhyp {} identities dim {dim} trials {trials} seed {seed}", singhyp::VERSION));
    for r in &report.identities {
        bundle.line(format!(
            "{}: max error {:.3e} (tolerance {:.0e}) {}",
            r.name,
            r.max_error,
            r.tolerance,
            if r.pass { "pass" } else { "fail" }
        ));
    }
    bundle.add("identities.json", to_json_string(&report)?.into_bytes());
    let exit_code = if report.pass { 0 } else { Verdict::RefutedAtSample.exit_code() };
    Ok(Outcome { exit_code, bundle })
}
