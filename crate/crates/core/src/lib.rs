//! Numerical construction, classification and verification of rank-two
//! submanifolds of codimension two in Euclidean space.
//!
//! The crate is organised bottom-up:
//!
//! * [`jets`]: truncated multivariate Taylor arithmetic; every derivative in
//!   the crate comes from here.
//! * [`immersion`]: charts, fundamental forms, normal frames, shape
//!   operators, relative nullity and the Levi-Civita connection.
//! * [`parabolic`]: asymptotic directions, canonical frames, the splitting
//!   tensor, ruled/surface-like detectors and the Gauss–Codazzi–Ricci
//!   residual harness.
//! * [`constructors`]: ruled parabolic submanifolds from moving frames,
//!   isometric deformations of them, parabolic surfaces and the polar
//!   construction in both directions.
//! * [`harness`]: scenario configs, grid sweeps and reports.

pub mod constructors;
pub mod error;
pub mod harness;
pub mod immersion;
pub mod jets;
pub mod linalg;
pub mod parabolic;
pub mod tolerances;

pub use error::{GeomError, GeomResult};
pub use jets::{extract_partial, jet_apply_unary, jet_mul, jet_variable, JetError, JetScalar, UnaryFn};
pub use tolerances::Tolerances;
