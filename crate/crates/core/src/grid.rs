//! Uniform cell-centred grids and densities sampled on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform mesh of `n_cells` cells covering `[x_min, x_max]`; values live at
/// cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_cells: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min || n_cells < 4 {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max and n_cells >= 4, got [{x_min}, {x_max}] with {n_cells} cells"
            )));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    pub fn symmetric(half_width: f64, n_cells: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_cells)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Face `i` sits between cells `i-1` and `i`; faces run `0..=n_cells`.
    pub fn face(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn is_symmetric(&self) -> bool {
        (self.x_min + self.x_max).abs() <= 1e-12 * self.x_max.abs().max(1.0)
    }

    /// Same domain with twice as many cells.
    pub fn refined(&self) -> Self {
        Self { n_cells: 2 * self.n_cells, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Reflecting,
}

/// Probability density sampled at the cell centres of a [`Grid`].
///
/// `mass` is `Σ values·dx` over the grid. Densities with power-law tails also
/// carry the analytic mass beyond the grid edges in `tail_mass`, together
/// with the exponent and fitted amplitudes used to compute it, so that moments
/// can be completed the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPdf {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub boundary: Boundary,
    pub mass: f64,
    pub tail_mass: f64,
    pub tail: Option<TailLaw>,
}

/// `f(x) ≈ c |x|^{-α} (1 + d/x²)` beyond the grid edge, identical on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLaw {
    pub alpha: f64,
    pub c: f64,
    pub d: f64,
    pub from: f64,
}

impl TailLaw {
    /// `∫_L^∞ x^k f(x) dx` for one side, `None` if it diverges.
    pub fn moment(&self, k: u32) -> Option<f64> {
        let p = self.alpha - k as f64;
        if p <= 1.0 {
            return None;
        }
        let l = self.from;
        Some(self.c * (l.powf(1.0 - p) / (p - 1.0) + self.d * l.powf(-1.0 - p) / (p + 1.0)))
    }
}

impl GridPdf {
    /// Wrap already normalized values; `mass` is recomputed, no tail.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells {
            return Err(Error::InvalidGrid(format!("{} values for {} cells", values.len(), grid.n_cells)));
        }
        let mass = values.iter().sum::<f64>() * grid.dx();
        Ok(Self { grid, values, boundary: Boundary::Reflecting, mass, tail_mass: 0.0, tail: None })
    }

    /// Rescale so that `Σ values·dx = 1`.
    pub fn renormalized(mut self) -> Self {
        let m = self.values.iter().sum::<f64>() * self.grid.dx();
        if m > 0.0 {
            self.values.iter_mut().for_each(|v| *v /= m);
        }
        self.mass = 1.0;
        self.tail_mass = 0.0;
        self.tail = None;
        self
    }

    pub fn total_mass(&self) -> f64 {
        self.mass + self.tail_mass
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ x^k P dx` by Simpson's rule on the centres plus edge completion;
    /// infinite when the tail law makes the moment diverge.
    pub fn moment(&self, k: u32) -> f64 {
        let xs = self.grid.centers();
        let weighted: Vec<f64> = xs.iter().zip(&self.values).map(|(x, v)| x.powi(k as i32) * v).collect();
        match &self.tail {
            Some(t) => {
                let Some(one_side) = t.moment(k) else {
                    return f64::INFINITY;
                };
                let sign_left = if k % 2 == 0 { 1.0 } else { -1.0 };
                crate::quad::simpson_uniform(&weighted, self.dx()) + one_side * (1.0 + sign_left)
            }
            None => integrate_with_linear_edges(&weighted, self.dx()),
        }
    }

    /// Plain midpoint sum `Σ x^k P dx` with no edge or tail completion.
    pub fn grid_moment(&self, k: u32) -> f64 {
        let h = self.dx();
        (0..self.grid.n_cells).map(|i| self.grid.center(i).powi(k as i32) * self.values[i]).sum::<f64>() * h
    }

    /// `∫ |P − Q| dx` over a shared grid.
    pub fn l1_distance(&self, other: &GridPdf) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("L1 distance needs identical grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * self.dx())
    }

    /// Linear interpolation between centres; zero outside the grid.
    pub fn interpolate(&self, x: f64) -> f64 {
        let h = self.dx();
        let s = (x - self.grid.x_min) / h - 0.5;
        if !(-0.5..=self.grid.n_cells as f64 - 0.5).contains(&s) {
            return 0.0;
        }
        let last = self.grid.n_cells - 1;
        let i = (s.floor().max(0.0) as usize).min(last - 1);
        let w = (s - i as f64).clamp(0.0, 1.0);
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Largest `|P(x) − P(−x)|` on a symmetric grid.
    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n / 2).map(|i| (self.values[i] - self.values[n - 1 - i]).abs()).fold(0.0, f64::max)
    }

    /// Two-column `x,density` CSV preceded by `# key: value` header lines.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "x,density")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.10e},{:.12e}", self.grid.center(i), v)?;
        }
        Ok(())
    }
}

/// Simpson over the centres plus the two half cells at the edges, with the
/// edge value linearly extrapolated (and clamped at zero).
pub(crate) fn integrate_with_linear_edges(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let inner = crate::quad::simpson_uniform(values, h);
    let edge = |v0: f64, v1: f64| {
        let ve = if v0 >= 0.0 { (1.5 * v0 - 0.5 * v1).max(0.0) } else { 1.5 * v0 - 0.5 * v1 };
        0.25 * h * (v0 + ve)
    };
    inner + edge(values[0], values[1]) + edge(values[n - 1], values[n - 2])
}
