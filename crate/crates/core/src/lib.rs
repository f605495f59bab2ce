//! Sum-of-squares and Positivstellensatz machinery for certifying that a
//! distance-based formation controller has no locally stable incorrect
//! equilibrium shapes, plus a gradient-flow simulator used as a numerical
//! cross-check.
//!
//! The pipeline is:
//!
//! - [`poly`]: exact sparse multivariate polynomials,
//! - [`sdp`]: a semidefinite feasibility solver,
//! - [`sos`]: Gram-matrix sum-of-squares tests,
//! - [`psatz`]: bounded-degree Positivstellensatz refutation search,
//! - [`formation`]: formation dynamics and the semialgebraic sets describing
//!   locally stable incorrect equilibria.

pub mod det;
pub mod formation;
pub mod poly;
pub mod psatz;
pub mod rational;
pub mod sdp;
pub mod sos;

pub use poly::{Monomial, MonomialVector, Polynomial};
