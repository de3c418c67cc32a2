//! Exact discrete optimal transport over normed spaces and the numerical
//! machinery around isometric rigidity of Wasserstein spaces: projections,
//! potentials, Hessian-pairing kernels and isometry certificates.

pub mod error;
pub mod io;
pub mod measures;
pub mod norms;
pub mod potentials;
pub mod projections;
pub mod rigidity;
pub mod scenarios;
pub mod transport;

pub use error::{Error, Result};
pub use measures::{dirac, Atom, DiscreteMeasure, TwoPointParams};
pub use norms::{Matrix, NormSpec, Vector};
pub use projections::AffineSubspace;
pub use transport::{OtResult, TransportPlan};
