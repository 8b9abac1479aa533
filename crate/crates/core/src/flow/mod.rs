//! Vector fields, fixed-step RK4 integration of orbits and of the derivative
//! cocycle `DX_t`, and finite-time growth rates.

mod integrate;
mod model;
mod rates;
mod singular;

pub use integrate::{
    compound_cocycle, integrate_cocycle, integrate_orbit, rk4_step, CocycleSample, OrbitSegment,
    BLOWUP_NORM,
};
pub use model::{make_system, SystemKind, VectorFieldModel, KNOWN_SYSTEMS};
pub use rates::{fit_rate, frame_growth, qr_exponents, subbundle_rates, RateReport, SubbundleRates};
pub use singular::{find_singularities, SingularitySearch};

use thiserror::Error;

use crate::exterior::ExteriorError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("unknown system `{name}`; known systems: {}", known.join(", "))]
    UnknownSystem { name: String, known: Vec<String> },
    #[error("system `{system}` is missing parameter `{param}`")]
    MissingParameter { system: String, param: String },
    #[error("invalid parameter for `{system}`: {reason}")]
    InvalidParameter { system: String, reason: String },
    #[error("invalid integration request: {0}")]
    InvalidRequest(String),
    #[error("state left the finite region (|x| > {BLOWUP_NORM:e}) after t = {last_valid_time}")]
    BlowUp { last_valid_time: f64 },
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),
    #[error(transparent)]
    Kernel(#[from] ExteriorError),
}

pub type Result<T> = std::result::Result<T, FlowError>;
