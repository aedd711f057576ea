use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, GridPdf, TailLaw};
use crate::quad::simpson_uniform;

/// Values below this are treated as solver noise rather than a bad input.
const NEGATIVE_TOLERANCE: f64 = -1e-13;

/// Normalize `f`, sampled at the centres of a symmetric `grid`.
///
/// The integral is composite Simpson between the outermost centres plus the
/// mass outside them. For a finite `tail_exponent` α the outside mass is the
/// power law `c |x|^{-α} (1 + d/x²)` integrated from the outer centre `L` to
/// infinity, with α fixed and `c`, `d` matched to the samples at `L` and near
/// `0.75 L`. `tail_exponent = f64::INFINITY` means no tail: the two edge
/// half-cells are closed by linear extrapolation.
///
/// Returns the normalization constant `N` and the density `f / N`.
pub fn normalize_on_grid(f: &[f64], grid: &Grid, tail_exponent: f64) -> Result<(f64, GridPdf)> {
    let n = grid.n_cells;
    if f.len() != n {
        return Err(Error::InvalidGrid(format!("{} values for {} cells", f.len(), n)));
    }
    if !grid.is_symmetric() {
        return Err(Error::InvalidGrid("normalization needs a grid symmetric about 0".into()));
    }
    if tail_exponent.is_nan() || tail_exponent <= 1.0 {
        return Err(Error::NonIntegrableTail { alpha: tail_exponent });
    }
    if let Some((index, &value)) = f.iter().enumerate().find(|(_, v)| !(**v >= NEGATIVE_TOLERANCE)) {
        return Err(Error::NegativeDensity { index, value });
    }
    let h = grid.dx();
    let (norm, tail) = if tail_exponent.is_finite() {
        let tail = fit_tail(f, grid, tail_exponent);
        let outside = 2.0 * tail.moment(0).unwrap_or(0.0);
        (simpson_uniform(f, h) + outside, Some(tail))
    } else {
        (crate::grid::integrate_with_linear_edges(f, h), None)
    };
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidGrid(format!("normalization integral is {norm}")));
    }
    let values: Vec<f64> = f.iter().map(|v| v / norm).collect();
    let mass = values.iter().sum::<f64>() * h;
    let tail = tail.map(|t| TailLaw { c: t.c / norm, ..t });
    let tail_mass = tail.map(|t| 2.0 * t.moment(0).unwrap_or(0.0)).unwrap_or(0.0);
    Ok((norm, GridPdf { grid: *grid, values, boundary: Boundary::Reflecting, mass, tail_mass, tail }))
}

fn fit_tail(f: &[f64], grid: &Grid, alpha: f64) -> TailLaw {
    let n = f.len();
    let even = |i: usize| 0.5 * (f[i] + f[n - 1 - i]);
    let i1 = n - 1;
    let l1 = grid.center(i1);
    // inner fit point at roughly 0.75 L, kept clear of the outer point
    let i2 = ((n as f64 / 2.0) + 0.75 * (l1 / grid.dx())).round() as usize;
    let i2 = i2.clamp(n / 2, i1.saturating_sub(2));
    let l2 = grid.center(i2);
    let g1 = even(i1) * l1.powf(alpha);
    let g2 = even(i2) * l2.powf(alpha);
    let mut d = 0.0;
    let mut c = g1;
    let den = g1 / (l2 * l2) - g2 / (l1 * l1);
    if l2 > 0.0 && den != 0.0 {
        let cand = (g2 - g1) / den;
        // accept the correction only where it is a correction
        if cand.is_finite() && cand.abs() < 0.5 * l2 * l2 {
            d = cand;
            c = g1 / (1.0 + d / (l1 * l1));
        }
    }
    TailLaw { alpha, c, d, from: l1 }
}
