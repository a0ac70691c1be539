//! Numerical laboratory for interior spikes of
//! `-ε² div(J ∇u) + V u = u^p` with homogeneous Neumann data.

pub mod dense;
pub mod discretization;
pub mod error;
pub mod fit;
pub mod gamma;
pub mod ground_state;
pub mod linalg;
mod ode;
pub mod par;
pub mod problem;
pub mod profiles;
pub mod reduction;
pub mod solver;

pub use error::{Error, Result};
