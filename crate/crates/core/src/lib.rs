//! Numerical verification of the stability chain for nearly Euclidean
//! Sobolev inequalities on rotationally symmetric, asymptotically flat
//! 3-manifolds.
//!
//! The chain runs Sobolev deficit → Willmore lower bound → isoperimetric
//! comparison → entropy lower bound → `d_p` proximity to Euclidean space,
//! together with the identities satisfied by the limiting conformal factor
//! `w(x) = (4/(4+|x|^2))^{1/2}`. Each inequality instance is recorded as a
//! [`Certificate`].

pub mod capacity;
pub mod certificate;
pub mod conformal;
pub mod constants;
pub mod dpmetric;
pub mod entropy;
pub mod error;
pub mod isoperimetric;
pub mod manifold;
pub mod profile;
pub mod quadrature;
pub mod sobolev;
pub mod willmore;

mod linalg;

pub use certificate::{Caveat, Certificate};
pub use constants::{euclidean_sobolev_constant, EUCLIDEAN_ISO_CONSTANT};
pub use error::{Error, Result};
pub use manifold::{MetricForm, RadialMetric};
pub use profile::{FnProfile, RadialFn, RadialProfile};
