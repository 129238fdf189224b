//! Spectral analysis of conditional-expectation operators for i.i.d. sums.
//!
//! For `S_n = Y_1 + ... + Y_n` the operator `C*C` with
//! `(C f)(s) = E[f(Y_1) | S_n = s]` has eigenvalues `1 = λ_0 ≥ λ_1 = 1/n ≥ λ_2 ≥ ...`.
//! The gap quantity `Θ^(n) = 1/(n λ_2) - 1` controls how fast the standardized
//! Fisher information of `S_n / √n` decays. This crate computes these spectra
//! on density grids ([`spect`]) and exactly for finite-support laws ([`exact`]),
//! provides analytic oracles for the Gaussian and gamma families ([`closed`]),
//! and evaluates each inequality of the theory as a checkable [`bounds::BoundReport`].

// `!(x > 0.0)` is used on purpose to reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod closed;
pub mod dens;
pub mod error;
pub mod exact;
mod linalg;
mod serde_inf;
pub mod spect;

pub use bounds::{BoundReport, Provenance, Relation};
pub use dens::{DistributionSpec, GridConfig, GridDensity, GridFunction, MomentSet};
pub use error::{Error, Result};
pub use exact::{DiscretePMF, ESDecomposition};
pub use spect::{ConditionalKernel, SpectrumResult, ThetaResult};
