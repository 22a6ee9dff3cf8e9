//! Polyhedral estimate design for linear inverse problems whose signal set is
//! the intersection of an ellitope and a polytope.
//!
//! Given noisy observations `omega = A x + xi` of a signal `x` confined to
//! such a set, the crate designs a contrast matrix `H` by convex
//! optimization, certifies the confidence-level risk of the associated
//! polyhedral estimate `w = B argmin_{y in X} ||H^T (omega - A y)||_inf`,
//! and validates the certificates by seeded simulation.
//!
//! Module map:
//! - [`sets`]: ellitopes, polytope images, signal sets and their calculus;
//! - [`noise`]: the admissible-norm family and observation samplers;
//! - [`cones`]: decomposition cones and the randomized rank-one extraction;
//! - [`conic`]: the conic-program builder backing every optimization here;
//! - [`design`]: master design programs, contrast assembly, certificates;
//! - [`estimator`]: the polyhedral estimate, oracles, Monte-Carlo risk;
//! - [`instance`]: JSON + CSV problem descriptors.

pub mod conic;
pub mod cones;
pub mod design;
pub mod error;
pub mod estimator;
pub mod instance;
pub mod linalg;
pub mod noise;
pub mod par;
pub mod sets;

pub use error::{Error, Result};
