//! The reduced master equation: flux coefficients, closed-form equilibria and
//! their verification.
//!
//! The probability current is
//!
//! ```text
//! J(x) = a1·x·P + (d0 + d2·x²)·∂ₓP + c1·x·∂²ₓP,      ∂ₜP = ∂ₓJ
//! ```
//!
//! with `a1 = (γτ+δ²)/τ`, `d0 = D_f`, `d2 = δ²/τ` and `c1 = D_f·δ²·θ/τ`. The
//! last term is not of Fick form; dropping it leaves a Fokker–Planck equation
//! whose equilibrium ("Fick equilibrium") is a Student-like power law.
//! Setting `J = 0` with `c1 > 0` gives the Kummer-function equilibrium
//! `₁F₁((γτ/δ²+1)/2; (1/R+1)/2; −x²/(2D_fθ))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridPdf};
use crate::model::{DerivedScales, ModelParams};
use crate::special::{hyp1f1, normalize_on_grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxCoefficients {
    pub a1: f64,
    pub d0: f64,
    pub d2: f64,
    pub c1: f64,
}

impl FluxCoefficients {
    /// The same coefficients with the third-order term removed.
    pub fn fick(self) -> Self {
        Self { c1: 0.0, ..self }
    }

    /// `J(x)` from the local value and first two derivatives.
    pub fn current(&self, x: f64, p: f64, dp: f64, d2p: f64) -> f64 {
        self.a1 * x * p + (self.d0 + self.d2 * x * x) * dp + self.c1 * x * d2p
    }
}

pub fn flux_coefficients(scales: &DerivedScales, params: &ModelParams) -> FluxCoefficients {
    let tau = params.tau;
    let d2 = scales.delta * scales.delta / tau;
    FluxCoefficients { a1: (scales.gamma_tau + scales.delta * scales.delta) / tau, d0: params.d_f, d2, c1: params.d_f * d2 * scales.theta }
}

/// Unnormalized closed-form equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EquilibriumLaw {
    /// `exp(−x²/(2·variance))`
    Gaussian { variance: f64 },
    /// `₁F₁(a; b; −x²·z_scale)`
    Kummer { a: f64, b: f64, z_scale: f64 },
    /// `(1 + x²·ratio)^{−power}`
    Fick { ratio: f64, power: f64 },
}

impl EquilibriumLaw {
    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Self::Gaussian { variance } => (-0.5 * x * x / variance).exp(),
            Self::Kummer { a, b, z_scale } => hyp1f1(a, b, -x * x * z_scale)?,
            Self::Fick { ratio, power } => (-power * (x * x * ratio).ln_1p()).exp(),
        })
    }

    /// Power-law exponent of the tails (infinite for the Gaussian).
    pub fn tail_exponent(&self) -> f64 {
        match *self {
            Self::Gaussian { .. } => f64::INFINITY,
            Self::Kummer { a, .. } => 2.0 * a,
            Self::Fick { power, .. } => 2.0 * power,
        }
    }
}

/// A normalized equilibrium on a grid together with the law it samples.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub pdf: GridPdf,
    /// Integral of the unnormalized law over the real line.
    pub norm: f64,
    pub law: EquilibriumLaw,
    pub warnings: Vec<String>,
}

impl Equilibrium {
    /// Normalized density at any `x`, not only at grid points.
    pub fn density(&self, x: f64) -> Result<f64> {
        Ok(self.law.density(x)? / self.norm)
    }
}

/// Symmetric default grid: wide enough for the core and for tail fits.
pub fn default_grid(scales: &DerivedScales, params: &ModelParams) -> Grid {
    let core = 10.0 * (params.d_f / params.gamma).sqrt();
    let tail = 30.0 * (params.d_f * scales.theta).sqrt();
    let half = core.max(tail).max(1.0);
    Grid { x_min: -half, x_max: half, n_cells: 4096 }
}

fn gaussian(params: &ModelParams, grid: &Grid) -> Result<Equilibrium> {
    let law = EquilibriumLaw::Gaussian { variance: params.d_f / params.gamma };
    sample(law, grid, Vec::new())
}

fn sample(law: EquilibriumLaw, grid: &Grid, warnings: Vec<String>) -> Result<Equilibrium> {
    let f = grid.centers().into_iter().map(|x| law.density(x)).collect::<Result<Vec<_>>>()?;
    let (norm, pdf) = normalize_on_grid(&f, grid, law.tail_exponent())?;
    Ok(Equilibrium { pdf, norm, law, warnings })
}

fn require_noise(params: &ModelParams) -> Result<()> {
    if params.d_f > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "d_f", value: params.d_f, reason: "the equilibrium needs additive noise (d_f > 0)" })
    }
}

/// Equilibrium of the third-order master equation.
pub fn equilibrium_pdf_third(scales: &DerivedScales, params: &ModelParams, grid: &Grid) -> Result<Equilibrium> {
    require_noise(params)?;
    if scales.delta == 0.0 {
        return gaussian(params, grid);
    }
    let mut warnings = Vec::new();
    if !scales.weak_regime_ok {
        warnings.push(format!("R = {:.6} >= 1: the second solution would be integrable; truncation suspect", scales.big_r));
        log::warn!("{}", warnings[0]);
    }
    let law = EquilibriumLaw::Kummer {
        a: 0.5 * (scales.gamma_tau / (scales.delta * scales.delta) + 1.0),
        b: 0.5 * (1.0 / scales.big_r + 1.0),
        z_scale: 1.0 / (2.0 * params.d_f * scales.theta),
    };
    sample(law, grid, warnings)
}

/// Equilibrium of the Fokker–Planck equation obtained by dropping `c1`.
pub fn equilibrium_pdf_fick(scales: &DerivedScales, params: &ModelParams, grid: &Grid) -> Result<Equilibrium> {
    require_noise(params)?;
    if scales.delta == 0.0 {
        return gaussian(params, grid);
    }
    let c = flux_coefficients(scales, params);
    let law = EquilibriumLaw::Fick { ratio: c.d2 / c.d0, power: 0.5 * (1.0 + scales.gamma_tau / (scales.delta * scales.delta)) };
    sample(law, grid, Vec::new())
}

/// Outcome of [`flux_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxResidual {
    /// `max |J| / max |a1·x·P|` over the interior.
    pub residual: f64,
    /// Largest change of `J` between step `h` and `2h` stencils, same scaling;
    /// bounds the differencing error at `h` once the grid resolves `P`.
    pub truncation: f64,
    /// Set when the residual is above `1e-6` yet not clearly larger than the
    /// differencing error, i.e. the grid is too coarse to decide.
    pub inconclusive: bool,
}

/// Residual of `J = 0` for a sampled density, with 4th-order differences.
pub fn flux_residual(pdf: &GridPdf, coeffs: &FluxCoefficients) -> Result<FluxResidual> {
    let n = pdf.values.len();
    if n < 20 {
        return Err(Error::InvalidGrid("flux residual needs at least 20 cells".into()));
    }
    let h = pdf.dx();
    let p = &pdf.values;
    let x = |i: usize| pdf.grid.center(i);
    let current = |i: usize, s: usize| {
        let hs = h * s as f64;
        let (m2, m1, c, p1, p2) = (p[i - 2 * s], p[i - s], p[i], p[i + s], p[i + 2 * s]);
        let d1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * hs);
        let d2 = (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * hs * hs);
        coeffs.current(x(i), c, d1, d2)
    };
    let scale = (0..n).map(|i| (coeffs.a1 * x(i) * p[i]).abs()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::InvalidGrid("density or drift vanishes identically".into()));
    }
    let mut worst = 0.0f64;
    let mut trunc = 0.0f64;
    for i in 2..n - 2 {
        let j = current(i, 1);
        worst = worst.max(j.abs());
        if i >= 4 && i + 4 < n && i % 2 == (n / 2) % 2 {
            trunc = trunc.max((j - current(i, 2)).abs());
        }
    }
    let residual = worst / scale;
    let truncation = trunc / scale;
    Ok(FluxResidual { residual, truncation, inconclusive: residual > 1e-6 && truncation >= 0.5 * residual })
}

/// Least-squares slope of `ln P` against `ln x` over centres in `[x_lo, x_hi]`.
pub fn tail_slope(pdf: &GridPdf, x_lo: f64, x_hi: f64) -> Result<f64> {
    if !(x_lo > 0.0 && x_hi > x_lo) {
        return Err(Error::InvalidGrid(format!("bad fit window [{x_lo}, {x_hi}]")));
    }
    let pts: Vec<(f64, f64)> = (0..pdf.grid.n_cells)
        .map(|i| (pdf.grid.center(i), pdf.values[i]))
        .filter(|&(x, v)| x >= x_lo && x <= x_hi && v > 0.0)
        .map(|(x, v)| (x.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidGrid(format!("fewer than 3 positive samples in [{x_lo}, {x_hi}]")));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Behaviour of the second `J = 0` solution `∝ x^{1−1/R}·₁F₁(…)` at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondSolutionCheck {
    /// `1 − 1/R`
    pub exponent: f64,
    /// `x^{exponent}` is integrable at 0 (`exponent > −1`, i.e. `R > 1/2`).
    pub integrable_at_origin: bool,
    /// The density blows up at the origin (`exponent < 0`, i.e. `R < 1`).
    pub singular_at_origin: bool,
    /// Always true for `R < 1`; the solution is never returned as a PDF.
    pub rejected: bool,
}

pub fn second_solution_check(scales: &DerivedScales) -> SecondSolutionCheck {
    let exponent = 1.0 - 1.0 / scales.big_r;
    SecondSolutionCheck { exponent, integrable_at_origin: exponent > -1.0, singular_at_origin: exponent < 0.0, rejected: exponent < 0.0 }
}

/// `−P''(0)/P(0)` of the third-order equilibrium from its small-x expansion.
pub fn curvature_at_origin(scales: &DerivedScales, params: &ModelParams) -> f64 {
    (scales.gamma_tau + scales.delta * scales.delta) / (params.d_f * params.tau * (1.0 + scales.big_r))
}
