//! Robustness analysis and parameter design for generalized momentum methods
//! under deterministic gradient errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod ext;
pub mod hinf;
pub mod linalg;
pub mod lti;
pub mod noise;
pub mod problem;
pub mod scvx;
pub mod sim;

pub use design::{preset_params, Method, ParetoPoint, TradeoffResult};
pub use error::{MrlError, Result};
pub use hinf::{hinf_quadratic, robustness_report, RobustnessReport};
pub use lti::{AlgoParams, Family, GmmStateSpace, ModeCoeffs};
pub use noise::NoiseSeq;
pub use problem::{QuadraticProblem, ScvxTestFunction, SmoothOracle, SpectrumModel};
pub use scvx::{mi_search, MiCertificate};
pub use sim::{run_inexact_gmm, Trace};
