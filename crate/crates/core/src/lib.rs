//! Numerical certificates of dominated, partially hyperbolic and singular
//! hyperbolic behaviour for smooth flows on `R^m`.
//!
//! Everything is computed from a vector field `X` and its Jacobian `DX`:
//!
//! * [`exterior`] builds compound matrices of linear maps, the induced inner
//!   product on k-vectors and the identification of `(m-1)`-vectors with
//!   vectors under which `∧^{m-1} A` acts as the cofactor matrix of `A`.
//! * [`flow`] holds the model systems, a fixed-step RK4 integrator for orbits
//!   and for the derivative cocycle `DX_t`, and finite-time rate fits.
//! * [`quadform`] implements the indefinite quadratic-form machinery: cones,
//!   the derivative form `J·DX + DX^T·J`, the admissible δ-interval and the
//!   integrals of δ along orbits.
//! * [`certifier`] aggregates the pointwise criteria into a [`Certificate`].
//! * [`splitting`] estimates the splitting `E ⊕ F` by power iteration and
//!   builds and checks the singular adapted metric.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN

pub mod certifier;
pub mod exterior;
pub mod flow;
pub mod io;
pub mod linalg;
pub mod quadform;
pub mod rng;
pub mod splitting;
pub mod tolerance;

pub use certifier::{
    certify, Certificate, CertifyConfig, CriterionId, CriterionResult, SamplingPlan, Status,
    Verdict,
};
pub use exterior::{
    codim1_generator, cofactor_operator, compound_operator, enumerate_multi_indices,
    recover_base_operator, CompoundOperator, ExteriorError, HodgeIdentification, KVector,
    MultiIndex, Sign,
};
pub use flow::{
    integrate_cocycle, integrate_orbit, make_system, CocycleSample, FlowError, OrbitSegment,
    RateReport, VectorFieldModel,
};
pub use quadform::{ConeClass, DeltaConfig, DeltaInterval, DeltaPolicy, QuadFormField};
pub use splitting::{AdaptedMetric, AdaptednessReport, SplittingEstimate};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
