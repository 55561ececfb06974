//! Nehari-manifold solver for coupled nonlinear Schrödinger systems
//!
//! ```text
//! -Δu + V1 u = λ v + f1(u) - |u|^(q-2) u
//! -Δv + V2 v = λ u + f2(v) - |v|^(q-2) v
//! ```
//!
//! on a Dirichlet box or a periodic torus. Ground states are computed by
//! projected descent on the Nehari manifold; further solutions by deflation.

pub mod accum;
pub mod energy;
pub mod error;
pub mod grid;
pub mod model;
pub mod multiplicity;
pub mod solver;

pub use energy::{EnergyBreakdown, FiberingReport, State};
pub use error::{Error, Result, StallDiagnostics};
pub use grid::{DomainKind, DomainSpec, GridFunction};
pub use model::{Nonlinearity, Problem, ProblemSpec, ValidationReport};
