//! Fixtures shared by the benchmarks.

use cmnoise_core::master::default_grid;
use cmnoise_core::ndim::DMatrix;
use cmnoise_core::{derived_scales, CorrelationKernel, DerivedScales, Grid, ModelParams, NdModel};

/// γ = 0.4, ε = 0.4, τ = 1, D_f = 0.5.
pub fn moderate() -> (ModelParams, DerivedScales) {
    let p = ModelParams::new(0.4, 0.4, 1.0, 0.5).expect("valid parameters");
    let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).expect("scales");
    (p, s)
}

pub fn equilibrium_grid() -> Grid {
    let (p, s) = moderate();
    let d = default_grid(&s, &p);
    Grid::symmetric(d.x_max, d.n_cells).expect("grid")
}

/// A stable, non-normal `n×n` model with a dense coupling matrix.
pub fn nd_model(n: usize) -> NdModel {
    let e = DMatrix::from_fn(n, n, |i, j| match j as isize - i as isize {
        0 => 1.0 + 0.1 * i as f64,
        1 => 0.3,
        _ => 0.0,
    });
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { 0.5 } else { 0.05 });
    let g = DMatrix::from_fn(n, n, |i, j| 0.1 * ((i + 2 * j) % 3) as f64 - 0.05);
    NdModel::new(e, d, g, 0.5, CorrelationKernel::ou(1.0)).expect("valid model")
}
