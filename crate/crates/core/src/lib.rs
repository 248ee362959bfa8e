//! Semiparametric Cramér-Rao bounds for Complex Elliptically Symmetric (CES)
//! data models.
//!
//! The crate is organised around the pieces needed to compute and validate
//! the bounds:
//!
//! - [`ces_model`]: density generators, moment functionals and exact sampling
//!   through the stochastic representation `z = μ + √Q Σ^{1/2} u`.
//! - [`bounds_joint`]: the constrained complex semiparametric CRB for the joint
//!   estimation of the mean vector and the trace-constrained scatter matrix.
//! - [`bounds_ssb`]: the semiparametric Slepian-Bangs SFIM for a real parameter
//!   vector entering the mean and the scatter matrix.
//! - [`doa`]: the semiparametric stochastic CRB for direction-of-arrival
//!   estimation with a uniform linear array, and the MUSIC estimator.
//! - [`estimators`]: constrained SCM and Tyler scatter estimators, MSE indices.
//! - [`harness`]: seeded Monte Carlo experiments, CSV/JSON artifacts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod bounds_joint;
pub mod bounds_ssb;
pub mod ces_model;
pub mod doa;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
