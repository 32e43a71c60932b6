//! Numerical engine for chart-local Finsler geometry on the slit tangent
//! bundle: fundamental and Cartan tensors, the Chern connection with its
//! curvature, Landsberg and Berwald tensors, bundle metrics built from six
//! radial profiles, the closed-form Levi-Civita connector tensors with a
//! Koszul oracle, and Lie-derivative based classification of Killing,
//! homothetic and conformal lifted vector fields.
//!
//! Everything is evaluated pointwise from truncated Taylor expansions
//! ([`derivkit::Jet`]) of the squared norm, so derived tensors are exact to
//! round-off; independent finite-difference and density-form oracles back
//! every closed-form path in the test and verification suites.

pub mod chern;
pub mod connection2;
pub mod derivkit;
pub mod error;
pub mod expr;
pub mod finsler;
pub mod gnat;
pub mod sampling;
pub mod symmetry;
pub mod tensor;

pub use error::{Error, Result};
