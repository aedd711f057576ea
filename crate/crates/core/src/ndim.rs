//! Coefficients of the N-dimensional master equation for
//! `dx/dt = −E·x + f(t) − ε·ξ(t)·G·x`, with `⟨f fᵀ⟩ = 2D·δ`.
//!
//! The reduced equation needs two correlation-weighted integrals of the
//! Lie-evolved coupling `L(u) = e^{−Eu}·G·e^{Eu}`:
//!
//! ```text
//! K_drift = ∫₀^∞ φ(u)·L(u) du
//! K_third = 2∫₀^∞ φ(u)·L(u)·M(u) du,     M(u) = ∫₀ᵘ e^{−Es}·D·e^{−Eᵀs} ds
//! ```
//!
//! `M` uses decaying propagators. Writing it with growing ones,
//! `∫₀ᵘ e^{Es}·D·e^{Eᵀs} ds`, makes `K_third` diverge for stable `E` whenever
//! the kernel decays slower than `E` grows, and does not reduce to the scalar
//! `D_f·τ·θ`. For `N = 1`, `K_drift = g·τ` and `K_third = g·D_f·τ·θ`.
//!
//! Inside the integrals `M(u)` is taken from `M∞ − e^{−Eu}·M∞·e^{−Eᵀu}`,
//! where `M∞` solves `E·M∞ + M∞·Eᵀ = D`; [`noise_gramian`] computes the same
//! matrix by quadrature.

use std::io::{BufRead, Write};

pub use nalgebra::DMatrix;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::master::FluxCoefficients;
use crate::model::CorrelationKernel;
use crate::quad;

/// Largest `‖E‖·u` handed to the matrix exponential.
const EXP_LIMIT: f64 = 600.0;
const KERNEL_CUTOFF: f64 = 1e-17;
const QUAD_REL: f64 = 1e-12;
const QUAD_ACCEPT: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct NdModel {
    pub n: usize,
    pub e: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub epsilon: f64,
    pub kernel: CorrelationKernel,
}

fn check_square(name: &str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidMatrix(format!("{name} is {}x{}, expected {n}x{n}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix(format!("{name} has non-finite entries")));
    }
    Ok(())
}

impl NdModel {
    pub fn new(e: DMatrix<f64>, d: DMatrix<f64>, g: DMatrix<f64>, epsilon: f64, kernel: CorrelationKernel) -> Result<Self> {
        let model = Self { n: e.nrows(), e, d, g, epsilon, kernel };
        model.validate()?;
        Ok(model)
    }

    /// The scalar model `(γ, g, D_f)`.
    pub fn scalar(gamma: f64, g: f64, d_f: f64, epsilon: f64, kernel: CorrelationKernel) -> Result<Self> {
        let m = |v: f64| DMatrix::from_element(1, 1, v);
        Self::new(m(gamma), m(d_f), m(g), epsilon, kernel)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        check_square("E", &self.e, n)?;
        check_square("D", &self.d, n)?;
        check_square("G", &self.g, n)?;
        crate::error::check_param(
            "epsilon",
            self.epsilon,
            self.epsilon.is_finite() && self.epsilon >= 0.0,
            "must be finite and non-negative",
        )?;
        let asym = (&self.d - self.d.transpose()).amax();
        if asym > 1e-12 * self.d.amax().max(1.0) {
            return Err(Error::InvalidMatrix(format!("D is not symmetric (max asymmetry {asym:e})")));
        }
        let sym = (&self.d + self.d.transpose()) * 0.5;
        let lowest = sym.symmetric_eigenvalues().min();
        if lowest < -1e-12 * self.d.amax().max(1.0) {
            return Err(Error::InvalidMatrix(format!("D is not positive semidefinite (eigenvalue {lowest:e})")));
        }
        let re = self.e.complex_eigenvalues().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if re <= 0.0 {
            return Err(Error::UnstableDrift { re });
        }
        Ok(())
    }

    /// Growth rate of `L(u) = e^{−Eu}·G·e^{Eu}`.
    ///
    /// `L` solves `L' = LE − EL`, so it only contains the modes of the
    /// commutator map that `G` excites. Those are found by an Arnoldi
    /// restriction of `X ↦ XE − EX` to the Krylov space of `G`; the result is
    /// 0 when `G` commutes with `E` and at most the spread of `Re spec E`.
    pub fn lie_growth_rate(&self) -> f64 {
        let n = self.n;
        let dim = n * n;
        let id = DMatrix::<f64>::identity(n, n);
        let op = self.e.transpose().kronecker(&id) - id.kronecker(&self.e);
        let g = DVector::from_column_slice(self.g.as_slice());
        let g_norm = g.norm();
        if g_norm == 0.0 {
            return 0.0;
        }
        let tol = 1e-10 * op.norm().max(f64::MIN_POSITIVE);
        let mut basis = vec![g / g_norm];
        let mut h = DMatrix::<f64>::zeros(dim + 1, dim);
        let mut size = dim;
        for k in 0..dim {
            let mut w = &op * &basis[k];
            // two passes of Gram–Schmidt
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = q.dot(&w);
                    h[(i, k)] += c;
                    w -= q * c;
                }
            }
            let w_norm = w.norm();
            if w_norm <= tol || k + 1 == dim {
                size = k + 1;
                break;
            }
            h[(k + 1, k)] = w_norm;
            basis.push(w / w_norm);
        }
        let hk = h.view((0, 0), (size, size)).into_owned();
        hk.complex_eigenvalues().iter().map(|z| z.re).fold(0.0, f64::max)
    }

    /// `(S⁻¹ES, S⁻¹DS⁻ᵀ, S⁻¹GS)`, the model in coordinates `x = S·y`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<Self> {
        let si = s.clone().try_inverse().ok_or_else(|| Error::InvalidMatrix("similarity transform is singular".into()))?;
        let d = &si * &self.d * si.transpose();
        let d = (&d + d.transpose()) * 0.5;
        Self::new(&si * &self.e * s, d, &si * &self.g * s, self.epsilon, self.kernel.clone())
    }
}

fn expm(m: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let norm = m.norm() * scale.abs();
    if !(norm <= EXP_LIMIT) {
        return Err(Error::ExpOverflow { norm });
    }
    Ok((m * scale).exp())
}

/// `E − (tr E / n)·I`; the shift cancels in `e^{−Eu}·G·e^{Eu}` and keeps
/// the exponentials bounded by the spread of the spectrum.
fn centered(e: &DMatrix<f64>) -> DMatrix<f64> {
    let n = e.nrows();
    e - DMatrix::<f64>::identity(n, n) * (e.trace() / n as f64)
}

/// `e^{−Eu}·G·e^{Eu}`.
pub fn lie_evolved_coupling(model: &NdModel, u: f64) -> Result<DMatrix<f64>> {
    crate::error::check_param("u", u, u >= 0.0 && u.is_finite(), "must be finite and non-negative")?;
    let e = centered(&model.e);
    Ok(expm(&e, -u)? * &model.g * expm(&e, u)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    pub m: DMatrix<f64>,
    /// Quadrature error estimate; zero for the algebraic `u = ∞` solve.
    pub error: f64,
}

/// Solves `E·M + M·Eᵀ = D` through its Kronecker form.
pub fn lyapunov(e: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = e.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let op = id.kronecker(e) + e.kronecker(&id);
    let rhs = DMatrix::from_column_slice(n * n, 1, d.as_slice());
    let sol = op.lu().solve(&rhs).ok_or_else(|| Error::InvalidMatrix("Lyapunov operator is singular".into()))?;
    let m = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&m + m.transpose()) * 0.5)
}

/// `M(u) = ∫₀ᵘ e^{−Es}·D·e^{−Eᵀs} ds`.
pub fn noise_gramian(model: &NdModel, horizon: Horizon) -> Result<Gramian> {
    let n = model.n;
    match horizon {
        Horizon::Infinite => Ok(Gramian { m: lyapunov(&model.e, &model.d)?, error: 0.0 }),
        Horizon::Finite(u) => {
            crate::error::check_param("u", u, u >= 0.0 && u.is_finite(), "must be finite and non-negative")?;
            if u == 0.0 {
                return Ok(Gramian { m: DMatrix::zeros(n, n), error: 0.0 });
            }
            expm(&model.e, u)?;
            let mut f = |s: f64| {
                let p = (&model.e * -s).exp();
                &p * &model.d * p.transpose()
            };
            let (m, err) = quad::adaptive(&mut f, 0.0, u, 0.0, 1e-13, 4000, |v: &DMatrix<f64>| v.amax());
            let scale = m.amax();
            if err > QUAD_ACCEPT * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Quadrature { estimate: err, tolerance: QUAD_ACCEPT * scale });
            }
            Ok(Gramian { m, error: err })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdCoefficients {
    pub k_drift: DMatrix<f64>,
    pub k_third: DMatrix<f64>,
    pub k_drift_error: f64,
    pub k_third_error: f64,
    /// Upper end of the quadrature interval; the kernel tail beyond it is
    /// bounded and included in the error estimates.
    pub cutoff: f64,
}

impl NdCoefficients {
    /// Scalar flux coefficients assembled from the `1×1` tensors.
    pub fn scalar_flux(&self, model: &NdModel) -> Result<FluxCoefficients> {
        if model.n != 1 {
            return Err(Error::Unsupported(format!("scalar reduction needs n = 1, model has n = {}", model.n)));
        }
        let e2g = model.epsilon * model.epsilon * model.g[(0, 0)];
        let d2 = e2g * self.k_drift[(0, 0)];
        Ok(FluxCoefficients { a1: model.e[(0, 0)] + d2, d0: model.d[(0, 0)], d2, c1: e2g * self.k_third[(0, 0)] })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "k_drift": matrix_rows(&self.k_drift),
            "k_third": matrix_rows(&self.k_third),
            "k_drift_error": self.k_drift_error,
            "k_third_error": self.k_third_error,
            "cutoff": self.cutoff,
        })
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

/// Point beyond which `φ(u)·e^{growth·u}` is below `KERNEL_CUTOFF` of the
/// kernel integral.
fn kernel_cutoff(kernel: &CorrelationKernel, growth: f64) -> f64 {
    let rate = kernel.asymptotic_rate() - growth;
    let start = kernel.support_end();
    let at_start = kernel.value(start).abs().max(f64::MIN_POSITIVE) * (growth * start).exp();
    let level = KERNEL_CUTOFF * kernel.integral().abs().max(f64::MIN_POSITIVE);
    start + ((at_start / level).ln() / rate).max(0.0)
}

pub fn nd_coefficients(model: &NdModel) -> Result<NdCoefficients> {
    model.validate()?;
    let rate = model.kernel.asymptotic_rate();
    let growth = model.lie_growth_rate();
    if !(rate > 0.0) || growth >= rate {
        return Err(Error::CorrelationTooLong(format!("kernel decay rate {rate} does not beat the Lie growth rate {growth}")));
    }
    let cutoff = kernel_cutoff(&model.kernel, growth);
    let shifted = centered(&model.e);
    let norm_e = shifted.norm();
    if norm_e * cutoff > EXP_LIMIT {
        return Err(Error::ExpOverflow { norm: norm_e * cutoff });
    }
    let m_inf = lyapunov(&model.e, &model.d)?;
    let integrand = |u: f64, third: bool| -> DMatrix<f64> {
        let decay = (&model.e * -u).exp();
        let l = (&shifted * -u).exp() * &model.g * (&shifted * u).exp();
        let phi = model.kernel.value(u);
        if third {
            let m = &m_inf - &decay * &m_inf * decay.transpose();
            l * m * (2.0 * phi)
        } else {
            l * phi
        }
    };
    let norm = |v: &DMatrix<f64>| v.amax();
    let (k_drift, e_drift) = quad::adaptive(&mut |u| integrand(u, false), 0.0, cutoff, 0.0, QUAD_REL, 4000, norm);
    let (k_third, e_third) = quad::adaptive(&mut |u| integrand(u, true), 0.0, cutoff, 0.0, QUAD_REL, 4000, norm);
    // beyond the cutoff φ decays at `rate` while ‖L‖ grows at most at `growth`
    let l_end = lie_evolved_coupling(model, cutoff)?.amax();
    let tail = model.kernel.value(cutoff).abs() * l_end / (rate - growth);
    let err_drift = e_drift + tail;
    let err_third = e_third + 2.0 * m_inf.amax() * tail;
    let floor = model.g.amax() * model.kernel.integral().abs() * 1e-3;
    for (name, k, e) in [("K_drift", &k_drift, err_drift), ("K_third", &k_third, err_third)] {
        if !k.iter().all(|v| v.is_finite()) || !(e <= QUAD_ACCEPT * k.amax().max(floor).max(f64::MIN_POSITIVE)) {
            return Err(Error::CorrelationTooLong(format!("{name} integral did not converge (error estimate {e:e})")));
        }
    }
    Ok(NdCoefficients { k_drift, k_third, k_drift_error: err_drift, k_third_error: err_third, cutoff })
}

/// Reads a comma-separated matrix; blank lines and `#` comments are skipped.
pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidMatrix(format!("line {}: {e}", k + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::InvalidMatrix(format!("line {}: ragged row", k + 1)));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidMatrix("empty matrix".into()));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_row_iterator(nr, nc, rows.into_iter().flatten()))
}

pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn ou(tau: f64) -> CorrelationKernel {
        CorrelationKernel::ou(tau)
    }

    #[test]
    fn scalar_lie_coupling_is_constant() {
        let m = NdModel::scalar(0.7, 1.3, 0.5, 1.0, ou(1.0)).unwrap();
        for u in [0.0, 0.5, 3.0] {
            assert!((lie_evolved_coupling(&m, u).unwrap()[(0, 0)] - 1.3).abs() < 1e-14);
        }
    }

    #[test]
    fn scalar_gramian_closed_form() {
        let m = NdModel::scalar(1.0, 1.0, 1.0, 1.0, ou(1.0)).unwrap();
        let g = noise_gramian(&m, Horizon::Finite(1.0)).unwrap();
        assert!((g.m[(0, 0)] - (1.0 - (-2.0f64).exp()) / 2.0).abs() < 1e-13);
        assert_eq!(noise_gramian(&m, Horizon::Finite(0.0)).unwrap().m[(0, 0)], 0.0);
    }

    #[test]
    fn stationary_gramian_solves_lyapunov() {
        let e = dmatrix![1.0, 0.4; -0.3, 2.0];
        let m = NdModel::new(e.clone(), DMatrix::identity(2, 2), DMatrix::zeros(2, 2), 1.0, ou(1.0)).unwrap();
        let g = noise_gramian(&m, Horizon::Infinite).unwrap().m;
        let res = &e * &g + &g * e.transpose() - DMatrix::<f64>::identity(2, 2);
        assert!(res.amax() < 1e-10);
    }

    #[test]
    fn scalar_coefficients() {
        let m = NdModel::scalar(0.4, 1.0, 0.5, 1.0, ou(1.0)).unwrap();
        let k = nd_coefficients(&m).unwrap();
        assert!((k.k_drift[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((k.k_third[(0, 0)] - 0.5 * 2.0 / 1.8).abs() < 1e-10, "{}", k.k_third[(0, 0)]);
    }

    #[test]
    fn commuting_coupling_without_noise() {
        let e = dmatrix![1.0, 0.5; 0.0, 2.0];
        let m = NdModel::new(e.clone(), DMatrix::zeros(2, 2), e.clone(), 1.0, ou(0.7)).unwrap();
        let k = nd_coefficients(&m).unwrap();
        assert!((&k.k_drift - &e * 0.7).amax() < 1e-10);
        assert!(k.k_third.amax() < 1e-14);
    }

    #[test]
    fn rejects_bad_models() {
        let bad_e = NdModel::scalar(-1.0, 1.0, 1.0, 1.0, ou(1.0));
        assert!(matches!(bad_e, Err(Error::UnstableDrift { .. })));
        let asym = NdModel::new(DMatrix::identity(2, 2), dmatrix![1.0, 0.5; 0.0, 1.0], DMatrix::zeros(2, 2), 1.0, ou(1.0));
        assert!(matches!(asym, Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn slow_kernel_against_spread_spectrum() {
        let m = NdModel::new(dmatrix![1.0, 1.0; 0.0, 5.0], DMatrix::identity(2, 2), dmatrix![0.0, 1.0; 1.0, 0.0], 1.0, ou(1.0)).unwrap();
        assert!(matches!(nd_coefficients(&m), Err(Error::CorrelationTooLong(_))));
    }

    #[test]
    fn growth_counts_only_excited_modes() {
        let diag =
            NdModel::new(dmatrix![0.2, 0.0; 0.0, 3.0], DMatrix::identity(2, 2), dmatrix![1.0, 0.0; 0.0, -2.0], 1.0, ou(1.0)).unwrap();
        assert!(diag.lie_growth_rate().abs() < 1e-12);
        assert!(nd_coefficients(&diag).is_ok());
        let generic =
            NdModel::new(dmatrix![1.0, 1.0; 0.0, 5.0], DMatrix::identity(2, 2), dmatrix![0.0, 1.0; 1.0, 0.0], 1.0, ou(1.0)).unwrap();
        assert!((generic.lie_growth_rate() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let m = dmatrix![1.0, -2.5; 3.25e-7, 4.0];
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        let back = read_matrix_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, m);
    }
}
