//! Parameter sets used across the integration tests.

#![allow(dead_code)]

use cmnoise_core::{derived_scales, CorrelationKernel, DerivedScales, ModelParams};

/// `γτ = 0.4, δ = 0.4, D_fτ = 0.5`
pub fn moderate() -> ModelParams {
    ModelParams::new(0.4, 0.4, 1.0, 0.5).unwrap()
}

/// `γτ = 0.6, δ = 0.5, D_fτ = 0.5`
pub fn strong() -> ModelParams {
    ModelParams::new(0.6, 0.5, 1.0, 0.5).unwrap()
}

/// `γτ = 0.3, δ = 0.5`: every moment from the second on diverges.
pub fn divergent() -> ModelParams {
    ModelParams::new(0.3, 0.5, 1.0, 0.5).unwrap()
}

pub fn finite_variance_sets() -> Vec<(&'static str, ModelParams)> {
    vec![("moderate", moderate()), ("strong", strong())]
}

pub fn all_sets() -> Vec<(&'static str, ModelParams)> {
    vec![("moderate", moderate()), ("strong", strong()), ("divergent", divergent())]
}

pub fn scales(p: &ModelParams) -> DerivedScales {
    derived_scales(p, &CorrelationKernel::ou_for(p)).unwrap()
}
