//! Superconformal Grassmann calculus, Neveu-Schwarz Verma modules, and
//! stochastic super-Loewner walks.

pub mod cli;
pub mod error;
pub mod grassmann;
pub mod ns_algebra;
pub mod scalar;
pub mod sde;
pub mod superfield;
pub mod walk;

pub use error::{Error, Result};
pub use grassmann::{GrassmannNumber, Parity};
pub use scalar::{CoefficientRing, GaussianRational, Scalar, Surd};
pub use superfield::{LaurentPoly, LaurentSuperfunction, SuperPoint};
