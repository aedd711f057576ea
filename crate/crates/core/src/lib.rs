//! Linear dynamics driven by colored multiplicative noise plus additive white
//! noise.
//!
//! The crate covers the reduced third-order master equation of
//! `dx/dt = -γx + f(t) - εξ(t)x` and the tools used to check it:
//!
//! * [`model`]: parameters, correlation kernels and derived scales.
//! * [`special`]: Kummer's `₁F₁` and grid normalization.
//! * [`master`]: flux coefficients, closed-form equilibria, tail law.
//! * [`sde`]: Monte Carlo ensembles with exact Ornstein–Uhlenbeck noise.
//! * [`pde`]: Crank–Nicolson evolution of the master equation.
//! * [`moments`]: the triangular moment hierarchy.
//! * [`ndim`]: coefficients of the N-dimensional generalization.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod config;
pub mod error;
pub mod grid;
pub mod master;
pub mod model;
pub mod moments;
pub mod ndim;
pub mod pde;
pub mod quad;
pub mod sde;
pub mod special;

pub use config::Config;
pub use error::{Error, Result};
pub use grid::{Boundary, Grid, GridPdf, TailLaw};
pub use master::{equilibrium_pdf_fick, equilibrium_pdf_third, flux_coefficients, Equilibrium, EquilibriumLaw, FluxCoefficients};
pub use model::{derived_scales, laplace_phi, CorrelationKernel, DerivedScales, ModelParams, MomentBound, TabulatedDecay};
pub use moments::{MomentState, MomentValue};
pub use ndim::{NdCoefficients, NdModel};
pub use pde::{EvolveConfig, Generator};
pub use sde::{EnsembleStats, SimConfig};
pub use special::{hyp1f1, kummer_1f1, Kummer13Args};
