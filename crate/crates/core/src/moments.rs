//! Moment hierarchy of the third-order master equation.
//!
//! Multiplying `∂ₜP = ∂ₓJ` by `xⁿ` and integrating by parts closes the
//! moments into a triangular system
//!
//! ```text
//! d⟨xⁿ⟩/dt = λₙ⟨xⁿ⟩ + cₙ⟨xⁿ⁻²⟩,
//! λₙ = −nγ(1 − nδ²/(γτ)),   cₙ = n(n−1)·D_f·(1 − nδr).
//! ```
//!
//! The rates λₙ involve neither `D_f` nor `r`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DerivedScales, ModelParams};

/// Triangular generator on moment indices `0..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix {
    pub n_max: usize,
    /// `λₙ`, index `n`.
    pub diagonal: Vec<f64>,
    /// `cₙ`, coupling of `⟨xⁿ⟩` to `⟨xⁿ⁻²⟩`; zero for `n < 2`.
    pub coupling: Vec<f64>,
}

impl MomentMatrix {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n_max + 1;
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = self.diagonal[k];
            if k >= 2 {
                m[(k, k - 2)] = self.coupling[k];
            }
        }
        m
    }

    /// Relaxation rate `−λₙ` of moment `n`.
    pub fn rate(&self, n: usize) -> f64 {
        -self.diagonal[n]
    }
}

pub fn moment_generator_matrix(n_max: usize, scales: &DerivedScales, params: &ModelParams) -> Result<MomentMatrix> {
    if n_max < 2 || n_max % 2 != 0 {
        return Err(Error::InvalidParameter { name: "n_max", value: n_max as f64, reason: "must be even and at least 2" });
    }
    let q = scales.delta2_over_gt();
    let dr = scales.big_r;
    let diagonal = (0..=n_max)
        .map(|n| {
            let n = n as f64;
            -n * params.gamma * (1.0 - n * q)
        })
        .collect();
    let coupling = (0..=n_max)
        .map(|n| {
            let n = n as f64;
            if n < 2.0 {
                0.0
            } else {
                n * (n - 1.0) * params.d_f * (1.0 - n * dr)
            }
        })
        .collect();
    Ok(MomentMatrix { n_max, diagonal, coupling })
}

/// Equilibrium moment, or a divergence marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentValue {
    Finite(f64),
    Divergent,
}

impl MomentValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Divergent => None,
        }
    }
}

impl std::fmt::Display for MomentValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v:.10e}"),
            Self::Divergent => f.write_str("inf"),
        }
    }
}

/// `⟨xⁿ⟩` at equilibrium: zero for odd `n`,
/// `(D_f/γ)^{n/2}(n−1)!!·∏_{j≤n/2}(1−2jδr)/(1−2jδ²/(γτ))` for even `n` when it exists.
pub fn equilibrium_moment(n: u32, scales: &DerivedScales, params: &ModelParams) -> MomentValue {
    if n % 2 == 1 {
        return MomentValue::Finite(0.0);
    }
    if !scales.moment_exists(n) {
        return MomentValue::Divergent;
    }
    let q = scales.delta2_over_gt();
    let mut v = 1.0;
    for j in 1..=n / 2 {
        let two_j = 2.0 * j as f64;
        v *= (params.d_f / params.gamma) * (two_j - 1.0) * (1.0 - two_j * scales.big_r) / (1.0 - two_j * q);
    }
    MomentValue::Finite(v)
}

/// Same as [`equilibrium_moment`] with the third-order term dropped (`r = 0`).
pub fn equilibrium_moment_fick(n: u32, scales: &DerivedScales, params: &ModelParams) -> MomentValue {
    let fick = DerivedScales { r: 0.0, big_r: 0.0, ..*scales };
    equilibrium_moment(n, &fick, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    /// `⟨x⁰⟩ … ⟨x^{n_max}⟩`
    pub values: Vec<f64>,
}

impl MomentState {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Moments of the point mass at `x0`.
    pub fn point(x0: f64, n_max: usize) -> Self {
        Self { values: (0..=n_max).map(|n| x0.powi(n as i32)).collect() }
    }

    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEvolution {
    pub state: MomentState,
    /// Some requested rate is non-negative: the hierarchy has no equilibrium
    /// at that order and the result describes a transient only.
    pub transient_only: bool,
    /// The closed-form cascade was replaced by a dense matrix exponential
    /// because two rates nearly coincide.
    pub used_expm: bool,
}

/// Rates closer than this, relative to their size, switch the propagation to
/// the matrix exponential; the cascade coefficients grow like 1/gap.
const DEGENERACY: f64 = 1e-4;

/// Propagate moments by the exact solution of the triangular system.
///
/// Each moment is a sum of exponentials `Σⱼ Cₙⱼ e^{λⱼt}` over the same-parity
/// rates `λⱼ, j ≤ n`, with `Cₙⱼ = cₙ Cₙ₋₂,ⱼ / (λⱼ − λₙ)` for `j < n`.
pub fn evolve_moments(state0: &MomentState, matrix: &MomentMatrix, t: f64) -> Result<MomentEvolution> {
    let n_max = matrix.n_max;
    if state0.values.len() != n_max + 1 {
        return Err(Error::InvalidParameter {
            name: "state length",
            value: state0.values.len() as f64,
            reason: "must equal n_max + 1 of the generator",
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter { name: "t", value: t, reason: "must be finite and >= 0" });
    }
    let transient_only = matrix.diagonal.iter().skip(1).any(|&l| l >= 0.0);
    let lam = &matrix.diagonal;
    let degenerate = (0..=n_max).any(|n| {
        (n % 2..n).step_by(2).any(|j| {
            let gap = (lam[j] - lam[n]).abs();
            gap == 0.0 || gap < DEGENERACY * lam[j].abs().max(lam[n].abs())
        })
    });
    if degenerate {
        let m = matrix.to_dense() * t;
        let v = m.exp() * DVector::from_column_slice(&state0.values);
        return Ok(MomentEvolution { state: MomentState::new(v.iter().copied().collect()), transient_only, used_expm: true });
    }
    // coefficients[n][j] for j ≡ n (mod 2), j ≤ n
    let mut coeff = vec![vec![0.0; n_max + 1]; n_max + 1];
    for n in 0..=n_max {
        let mut rest = state0.values[n];
        if n >= 2 {
            for j in (n % 2..n).step_by(2) {
                let c = matrix.coupling[n] * coeff[n - 2][j] / (lam[j] - lam[n]);
                coeff[n][j] = c;
                rest -= c;
            }
        }
        coeff[n][n] = rest;
    }
    let values = (0..=n_max).map(|n| (n % 2..=n).step_by(2).map(|j| coeff[n][j] * (lam[j] * t).exp()).sum()).collect();
    Ok(MomentEvolution { state: MomentState::new(values), transient_only, used_expm: false })
}

/// One row of the moment table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: u32,
    pub equilibrium: MomentValue,
    pub rate: f64,
    pub exists: bool,
}

pub fn moment_table(n_max: usize, scales: &DerivedScales, params: &ModelParams) -> Result<Vec<MomentRow>> {
    let m = moment_generator_matrix(n_max, scales, params)?;
    Ok((1..=n_max as u32)
        .map(|n| {
            let eq = equilibrium_moment(n, scales, params);
            MomentRow { n, equilibrium: eq, rate: m.rate(n as usize), exists: scales.moment_exists(n) }
        })
        .collect())
}

/// CSV `n,equilibrium,rate,exists`; divergent moments print as `inf`.
pub fn write_moment_csv<W: Write>(mut w: W, rows: &[MomentRow]) -> std::io::Result<()> {
    writeln!(w, "n,equilibrium,rate,exists")?;
    for r in rows {
        writeln!(w, "{},{},{:.10e},{}", r.n, r.equilibrium, r.rate, r.exists)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derived_scales, CorrelationKernel};

    fn setup(gamma: f64, eps: f64, tau: f64, d_f: f64) -> (ModelParams, DerivedScales) {
        let p = ModelParams::new(gamma, eps, tau, d_f).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).unwrap();
        (p, s)
    }

    #[test]
    fn generator_entries() {
        let (p, s) = setup(0.4, 0.0, 1.0, 0.5);
        let m = moment_generator_matrix(2, &s, &p).unwrap();
        assert_eq!(m.diagonal[2], -0.8);
        assert_eq!(m.coupling[2], 1.0);
        let (p, s) = setup(0.4, 0.4, 1.0, 0.5);
        let m = moment_generator_matrix(4, &s, &p).unwrap();
        assert!((m.diagonal[2] + 0.16).abs() < 1e-15);
        assert!((m.coupling[2] - (1.0 - 2.0 * 0.32 / 1.8)).abs() < 1e-15);
        assert!(moment_generator_matrix(3, &s, &p).is_err());
    }

    #[test]
    fn equilibrium_values() {
        let (p, s) = setup(0.4, 0.4, 1.0, 0.5);
        assert_eq!(equilibrium_moment(3, &s, &p), MomentValue::Finite(0.0));
        let m2 = equilibrium_moment(2, &s, &p).finite().unwrap();
        assert!((m2 - 1.25 * (1.0 - 0.64 / 1.8) / 0.2).abs() < 1e-12);
        assert_eq!(equilibrium_moment(4, &s, &p), MomentValue::Divergent);
        let fick = equilibrium_moment_fick(2, &s, &p).finite().unwrap();
        assert!((fick - 6.25).abs() < 1e-12);
    }

    #[test]
    fn ou_closed_form() {
        let (p, s) = setup(0.4, 0.0, 1.0, 0.5);
        let m = moment_generator_matrix(2, &s, &p).unwrap();
        let st = MomentState::new(vec![1.0, 0.0, 0.0]);
        for t in [0.0, 0.3, 2.0, 10.0] {
            let e = evolve_moments(&st, &m, t).unwrap();
            assert!(!e.used_expm);
            let exact = 1.25 * (1.0 - (-0.8 * t).exp());
            assert!((e.state.values[2] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn cascade_matches_matrix_exponential() {
        let (p, s) = setup(0.9, 0.2, 1.3, 0.7);
        let m = moment_generator_matrix(6, &s, &p).unwrap();
        let st = MomentState::point(1.7, 6);
        for t in [0.0, 0.5, 3.0] {
            let a = evolve_moments(&st, &m, t).unwrap();
            let b = (m.to_dense() * t).exp() * DVector::from_column_slice(&st.values);
            for n in 0..=6 {
                assert!((a.state.values[n] - b[n]).abs() <= 1e-11 * b[n].abs().max(1.0), "n={n} t={t}");
            }
        }
    }

    #[test]
    fn degenerate_rates_use_expm() {
        // γτ = 2δ²: λ₂ = 0 = λ₀
        let (p, s) = setup(0.5, 0.5, 1.0, 0.5);
        let m = moment_generator_matrix(2, &s, &p).unwrap();
        assert_eq!(m.diagonal[2], 0.0);
        let e = evolve_moments(&MomentState::new(vec![1.0, 0.0, 1.0]), &m, 2.0).unwrap();
        assert!(e.used_expm && e.transient_only);
        assert!((e.state.values[2] - (1.0 + 2.0 * m.coupling[2])).abs() < 1e-12);
    }

    #[test]
    fn csv_prints_inf() {
        let (p, s) = setup(0.4, 0.4, 1.0, 0.5);
        let rows = moment_table(4, &s, &p).unwrap();
        let mut buf = Vec::new();
        write_moment_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().any(|l| l.starts_with("4,inf,")));
    }
}
