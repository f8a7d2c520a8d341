//! Forward simulation and reconstruction of geodesic scattering data from
//! internal point sources on planar Riemannian domains.

pub mod bundled;
pub mod config;
pub mod data;
pub mod domain;
pub mod error;
pub mod expr;
pub mod flow;
pub mod jacobi;
pub mod metric;
pub mod ode;
pub mod reconstruction;
pub mod suites;

pub use error::{Error, Result};
