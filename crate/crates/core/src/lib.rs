//! Relativistic Wiener and Ornstein–Uhlenbeck processes on the mass shell
//! `{p0 > 0, p0^2 - |p|^2 = m^2}` (units with `c = 1`).
//!
//! * [`manifold`]: hyperbolic/cartesian coordinates, Minkowski algebra, generators.
//! * [`dynamics`]: radial drift, scale density, boundary classification.
//! * [`integrators`]: backward Euler–Maruyama radial stepping, sphere stepping,
//!   skew-product assembly, cartesian Euler–Maruyama, path ensembles.
//! * [`measures`]: closed-form invariant densities, normalizers, CDFs.
//! * [`stats`]: histograms, goodness-of-fit, hitting fractions, moments.
//! * [`cli`]: configuration and the `simulate` / `densities` / `validate` runs.

// NaN must fail the domain checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod integrators;
pub mod manifold;
pub mod measures;
pub mod quadrature;
pub mod stats;

pub use error::{Error, Result};
