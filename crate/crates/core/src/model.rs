//! Physical parameters, correlation kernels and the derived scales every
//! other module consumes.
//!
//! The model is `dx/dt = -γ x + f(t) - ε ξ(t) x` with `ξ` a stationary,
//! unit-variance Gaussian process of normalized autocorrelation `φ(u)` and
//! `f` white noise with `<f(t) f(t')> = 2 D_f δ(t - t')`. With this
//! convention the unperturbed generator is exactly `γ ∂x x + D_f ∂x²`, which
//! is what the moment, PDE and Monte Carlo code all assume.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{check_param, Error, Result};
use crate::quad::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Linear relaxation rate γ.
    pub gamma: f64,
    /// Multiplicative noise strength ε.
    pub epsilon: f64,
    /// Correlation time τ = ∫₀^∞ φ(u) du.
    pub tau: f64,
    /// Additive white-noise diffusion coefficient D_f.
    pub d_f: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, epsilon: f64, tau: f64, d_f: f64) -> Result<Self> {
        let p = Self { gamma, epsilon, tau, d_f };
        p.validate()?;
        Ok(p)
    }

    /// Parameters from the dimensionless pair (δ, γτ) plus τ and D_f.
    pub fn from_dimensionless(delta: f64, gamma_tau: f64, tau: f64, d_f: f64) -> Result<Self> {
        check_param("tau", tau, tau > 0.0, "must be > 0")?;
        Self::new(gamma_tau / tau, delta / tau, tau, d_f)
    }

    pub fn validate(&self) -> Result<()> {
        check_param("gamma", self.gamma, self.gamma > 0.0, "must be > 0")?;
        check_param("epsilon", self.epsilon, self.epsilon >= 0.0, "must be >= 0")?;
        check_param("tau", self.tau, self.tau > 0.0, "must be > 0")?;
        check_param("d_f", self.d_f, self.d_f >= 0.0, "must be >= 0")?;
        Ok(())
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        Self::new(cfg.require("gamma")?, cfg.require("epsilon")?, cfg.require("tau")?, cfg.require("d_f")?)
    }

    pub fn with_d_f(mut self, d_f: f64) -> Self {
        self.d_f = d_f;
        self
    }
}

/// Normalized autocorrelation `φ(u)` of the multiplicative noise.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationKernel {
    /// `φ(u) = exp(-u/τ)`.
    OrnsteinUhlenbeck {
        tau: f64,
    },
    Tabulated(TabulatedDecay),
}

impl CorrelationKernel {
    pub fn ou(tau: f64) -> Self {
        CorrelationKernel::OrnsteinUhlenbeck { tau }
    }

    pub fn ou_for(params: &ModelParams) -> Self {
        Self::ou(params.tau)
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { .. } => "ou",
            CorrelationKernel::Tabulated(_) => "tabulated",
        }
    }

    /// `φ(u)` for `u >= 0`.
    pub fn value(&self, u: f64) -> f64 {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { tau } => (-u / tau).exp(),
            CorrelationKernel::Tabulated(t) => t.value(u),
        }
    }

    /// `∫₀^∞ φ(u) du`.
    pub fn integral(&self) -> f64 {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { tau } => *tau,
            CorrelationKernel::Tabulated(t) => t.laplace(0.0),
        }
    }

    /// `∫₀^∞ φ(u) (1 - e^{-su}) du = τ - φ̂(s)`, evaluated without the
    /// cancellation of the naive difference at small `s`.
    pub fn laplace_gap(&self, s: f64) -> f64 {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { tau } => s * tau * tau / (1.0 + s * tau),
            CorrelationKernel::Tabulated(t) => t.laplace_gap(s),
        }
    }

    /// Decay rate bounding `φ(u)` for large `u`, used to truncate integrals.
    pub fn asymptotic_rate(&self) -> f64 {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { tau } => 1.0 / tau,
            CorrelationKernel::Tabulated(t) => t.tail_rate,
        }
    }

    /// Support length after which `φ` follows its asymptotic exponential.
    pub fn support_end(&self) -> f64 {
        match self {
            CorrelationKernel::OrnsteinUhlenbeck { .. } => 0.0,
            CorrelationKernel::Tabulated(t) => *t.u.last().expect("validated"),
        }
    }

    pub fn from_config(cfg: &Config, params: &ModelParams) -> Result<Self> {
        let kind: String = cfg.get_or("kernel", "ou".to_string())?;
        match kind.as_str() {
            "ou" => Ok(Self::ou_for(params)),
            "tabulated" => {
                let path = cfg.path("kernel_file").ok_or_else(|| Error::MissingKey("kernel_file".into()))?;
                Ok(CorrelationKernel::Tabulated(TabulatedDecay::from_csv(&path)?))
            }
            other => {
                let e = cfg.raw("kernel").expect("present");
                Err(Error::Config {
                    path: e.path.clone(),
                    line: e.line,
                    msg: format!("unknown kernel `{other}` (expected `ou` or `tabulated`)"),
                })
            }
        }
    }
}

/// Laplace transform `φ̂(s) = ∫₀^∞ φ(u) e^{-su} du`.
pub fn laplace_phi(kernel: &CorrelationKernel, s: f64) -> Result<f64> {
    check_param("s", s, s >= 0.0, "Laplace variable must be >= 0")?;
    Ok(match kernel {
        CorrelationKernel::OrnsteinUhlenbeck { tau } => tau / (1.0 + s * tau),
        CorrelationKernel::Tabulated(t) => t.laplace(s),
    })
}

/// A user-supplied, non-negative decaying autocorrelation given as samples
/// `(u_i, φ_i)` with `u_0 = 0`, `φ_0 = 1`.
///
/// Between samples `φ` is interpolated log-linearly (exact for exponential
/// segments); past the last sample it continues as `φ_N e^{-κ(u-u_N)}`
/// with `κ` fitted on the last tenth of the support.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDecay {
    u: Vec<f64>,
    phi: Vec<f64>,
    tail_rate: f64,
}

const TAIL_FIT_FRACTION: f64 = 0.1;
const SEGMENT_NODES: usize = 8;

impl TabulatedDecay {
    pub fn new(u: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if u.len() != phi.len() || u.len() < 3 {
            return Err(Error::InvalidKernel("need at least three (u, phi) pairs of equal length".into()));
        }
        if u[0] != 0.0 {
            return Err(Error::InvalidKernel("first sample must be at u = 0".into()));
        }
        if u.windows(2).any(|w| !(w[1] > w[0])) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel("u must be finite and strictly increasing".into()));
        }
        if (phi[0] - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidKernel(format!("phi(0) = {} but must be 1", phi[0])));
        }
        if phi.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidKernel("phi must be finite and non-negative".into()));
        }
        let tail_rate = fit_tail_rate(&u, &phi)?;
        Ok(Self { u, phi, tail_rate })
    }

    /// Two-column `u,phi` file; `#` comments and a non-numeric header are skipped.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut u = Vec::new();
        let mut phi = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Config { path: path.to_path_buf(), line: i + 1, msg: "expected `u,phi`".into() });
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    u.push(x);
                    phi.push(y);
                }
                _ if u.is_empty() => continue,
                _ => return Err(Error::Config { path: path.to_path_buf(), line: i + 1, msg: format!("cannot parse `{line}`") }),
            }
        }
        Self::new(u, phi)
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.u, &self.phi)
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    pub fn value(&self, u: f64) -> f64 {
        let n = self.u.len();
        let last = self.u[n - 1];
        if u >= last {
            return self.phi[n - 1] * (-self.tail_rate * (u - last)).exp();
        }
        let i = self.u.partition_point(|&x| x <= u).saturating_sub(1);
        segment_value(self.u[i], self.u[i + 1], self.phi[i], self.phi[i + 1], u)
    }

    fn integrate_segments(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let rule = GaussLegendre::new(SEGMENT_NODES);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for i in 0..self.u.len() - 1 {
            let (a, b, pa, pb) = (self.u[i], self.u[i + 1], self.phi[i], self.phi[i + 1]);
            let seg: f64 = rule.integrate(a, b, |x| segment_value(a, b, pa, pb, x) * weight(x));
            // Kahan summation over segments
            let y = seg - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    fn laplace(&self, s: f64) -> f64 {
        let body = self.integrate_segments(|x| (-s * x).exp());
        let last = *self.u.last().expect("validated");
        let tail = self.phi.last().expect("validated") * (-s * last).exp() / (self.tail_rate + s);
        body + tail
    }

    fn laplace_gap(&self, s: f64) -> f64 {
        let body = self.integrate_segments(|x| -(-s * x).exp_m1());
        let last = *self.u.last().expect("validated");
        let k = self.tail_rate;
        let tail = self.phi.last().expect("validated") * (1.0 / k - (-s * last).exp() / (k + s));
        body + tail
    }
}

fn segment_value(a: f64, b: f64, pa: f64, pb: f64, x: f64) -> f64 {
    let w = (x - a) / (b - a);
    if pa > 0.0 && pb > 0.0 {
        pa * (pb / pa).powf(w)
    } else {
        pa + (pb - pa) * w
    }
}

fn fit_tail_rate(u: &[f64], phi: &[f64]) -> Result<f64> {
    let last = *u.last().expect("non-empty");
    if *phi.last().expect("non-empty") == 0.0 {
        // compact support: the tail contributes nothing
        return Ok(f64::INFINITY);
    }
    let start = last * (1.0 - TAIL_FIT_FRACTION);
    let pts: Vec<(f64, f64)> = u.iter().zip(phi).filter(|(x, p)| **x >= start && **p > 0.0).map(|(x, p)| (*x, p.ln())).collect();
    let pts = if pts.len() >= 2 {
        pts
    } else {
        let n = u.len();
        vec![(u[n - 2], phi[n - 2].ln()), (u[n - 1], phi[n - 1].ln())]
    };
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let rate = -sxy / sxx;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::KernelNotIntegrable(format!("tail of the tabulated kernel does not decay (fitted rate {rate})")));
    }
    Ok(rate)
}

/// Largest moment order that exists at equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentBound {
    Finite(u32),
    Unbounded,
}

impl MomentBound {
    pub fn admits(&self, n: u32) -> bool {
        match self {
            MomentBound::Finite(m) => n <= *m,
            MomentBound::Unbounded => true,
        }
    }
}

impl fmt::Display for MomentBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentBound::Finite(n) => write!(f, "{n}"),
            MomentBound::Unbounded => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    /// δ = ε τ.
    pub delta: f64,
    pub gamma_tau: f64,
    /// Memory time ϑ = (τ - φ̂(2γ)) / (γ τ).
    pub theta: f64,
    /// r = ε ϑ.
    pub r: f64,
    /// R = δ r, strength of the non-Fick flux term.
    pub big_r: f64,
    /// Far-tail exponent α = γτ/δ² + 1 (`f64::INFINITY` when δ = 0).
    /// JSON has no infinity, so it is written as `null`.
    #[serde(with = "infinite_as_null")]
    pub alpha_tail: f64,
    pub n_max_moment: MomentBound,
    /// R < 1: the second integrable solution of the equilibrium equation is excluded.
    pub weak_regime_ok: bool,
}

impl DerivedScales {
    /// δ² / (γτ), the ratio controlling moment existence and relaxation.
    pub fn delta2_over_gt(&self) -> f64 {
        self.delta * self.delta / self.gamma_tau
    }

    /// Whether the n-th moment exists: `1 - n δ²/(γτ) > 0`.
    pub fn moment_exists(&self, n: u32) -> bool {
        1.0 - n as f64 * self.delta2_over_gt() > 0.0
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub fn derived_scales(params: &ModelParams, kernel: &CorrelationKernel) -> Result<DerivedScales> {
    params.validate()?;
    if let CorrelationKernel::Tabulated(_) = kernel {
        let integral = kernel.integral();
        if ((integral - params.tau) / params.tau).abs() > 1e-6 {
            return Err(Error::InvalidParameter {
                name: "tau",
                value: params.tau,
                reason: "must equal the integral of the tabulated kernel",
            });
        }
    }
    let ModelParams { gamma, epsilon, tau, .. } = *params;
    let delta = epsilon * tau;
    let gamma_tau = gamma * tau;
    let theta = kernel.laplace_gap(2.0 * gamma) / gamma_tau;
    let r = epsilon * theta;
    let big_r = delta * r;
    let d2 = delta * delta;
    let alpha_tail = if d2 > 0.0 { gamma_tau / d2 + 1.0 } else { f64::INFINITY };
    let n_max_moment = if d2 > 0.0 {
        let ratio = d2 / gamma_tau;
        let exists = |n: u32| 1.0 - n as f64 * ratio > 0.0;
        let mut n = (gamma_tau / d2).floor().min(u32::MAX as f64 - 1.0) as u32 + 1;
        while n > 0 && !exists(n) {
            n -= 1;
        }
        MomentBound::Finite(n)
    } else {
        MomentBound::Unbounded
    };
    Ok(DerivedScales { delta, gamma_tau, theta, r, big_r, alpha_tail, n_max_moment, weak_regime_ok: big_r < 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moderate() -> ModelParams {
        ModelParams::new(0.4, 0.4, 1.0, 0.5).unwrap()
    }

    #[test]
    fn ou_laplace_values() {
        let k = CorrelationKernel::ou(0.5);
        assert_eq!(laplace_phi(&k, 0.0).unwrap(), 0.5);
        assert!((laplace_phi(&k, 4.0).unwrap() - 0.5 / 3.0).abs() < 1e-15);
        assert!(laplace_phi(&k, -1.0).is_err());
    }

    #[test]
    fn ou_laplace_matches_quadrature() {
        let tau = 0.5;
        let s = 4.0;
        let mut f = |u: f64| (-u / tau - s * u).exp();
        // integrand is negligible past u = 40
        let (v, _) = crate::quad::adaptive(&mut f, 0.0, 40.0, 1e-15, 1e-14, 200, |v: &f64| v.abs());
        let k = CorrelationKernel::ou(tau);
        assert!((laplace_phi(&k, s).unwrap() - v).abs() < 1e-13);
    }

    #[test]
    fn tabulated_exponential_matches_closed_form() {
        let tau = 0.7;
        let n = 241;
        let u: Vec<f64> = (0..n).map(|i| 12.0 * tau * i as f64 / (n - 1) as f64).collect();
        let phi: Vec<f64> = u.iter().map(|x| (-x / tau).exp()).collect();
        let k = CorrelationKernel::Tabulated(TabulatedDecay::new(u, phi).unwrap());
        let v = laplace_phi(&k, 1.0 / tau).unwrap();
        assert!((v - tau / 2.0).abs() < 1e-6, "{v}");
        assert!((k.integral() - tau).abs() < 1e-9);
        assert!((k.laplace_gap(0.8) - (tau - tau / (1.0 + 0.8 * tau))).abs() < 1e-9);
    }

    #[test]
    fn tabulated_rejects_growing_tail() {
        let u = vec![0.0, 1.0, 2.0, 3.0];
        let phi = vec![1.0, 0.5, 0.5, 0.6];
        assert!(matches!(TabulatedDecay::new(u, phi), Err(Error::KernelNotIntegrable(_))));
    }

    #[test]
    fn tabulated_rejects_bad_origin() {
        assert!(TabulatedDecay::new(vec![0.0, 1.0, 2.0], vec![0.9, 0.5, 0.2]).is_err());
        assert!(TabulatedDecay::new(vec![0.1, 1.0, 2.0], vec![1.0, 0.5, 0.2]).is_err());
        assert!(TabulatedDecay::new(vec![0.0, 1.0, 2.0], vec![1.0, -0.1, 0.2]).is_err());
    }

    #[test]
    fn strong_coupling_scales() {
        let p = ModelParams::new(2.0, 5.0, 0.5, 0.5).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).unwrap();
        assert!((s.delta - 2.5).abs() < 1e-15);
        assert!((s.gamma_tau - 1.0).abs() < 1e-15);
        assert!((s.theta - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.big_r - 25.0 / 6.0).abs() < 1e-13);
        assert!(!s.weak_regime_ok);
    }

    #[test]
    fn moderate_scales() {
        let p = moderate();
        let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).unwrap();
        assert!((s.theta - 2.0 / 1.8).abs() < 1e-14);
        assert!((s.big_r - 0.32 / 1.8).abs() < 1e-14);
        assert!((s.alpha_tail - 3.5).abs() < 1e-14);
        assert_eq!(s.n_max_moment, MomentBound::Finite(2));
        assert!(s.weak_regime_ok);
    }

    #[test]
    fn unperturbed_limit() {
        let p = ModelParams::new(0.4, 0.0, 1.0, 0.5).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).unwrap();
        assert_eq!(s.delta, 0.0);
        assert_eq!(s.big_r, 0.0);
        assert!(s.alpha_tail.is_infinite());
        assert_eq!(s.n_max_moment, MomentBound::Unbounded);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"alpha_tail\":null"));
        assert_eq!(serde_json::from_str::<DerivedScales>(&json).unwrap(), s);
    }

    #[test]
    fn moment_bound_uses_strict_inequality() {
        // γτ/δ² = 2 exactly: the second moment is marginal and reported missing
        let p = ModelParams::new(0.5, 0.5, 1.0, 0.5).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).unwrap();
        assert_eq!(s.n_max_moment, MomentBound::Finite(1));
        // Fig. 4 regime
        let p = ModelParams::from_dimensionless(0.5, 0.3, 1.0, 0.5).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou_for(&p)).unwrap();
        assert_eq!(s.n_max_moment, MomentBound::Finite(1));
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ModelParams::new(0.0, 0.1, 1.0, 0.5).is_err());
        assert!(ModelParams::new(1.0, -0.1, 1.0, 0.5).is_err());
        assert!(ModelParams::new(1.0, 0.1, f64::NAN, 0.5).is_err());
        assert!(ModelParams::new(1.0, 0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn tabulated_tau_must_match_params() {
        let u: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let phi: Vec<f64> = u.iter().map(|x| (-x).exp()).collect();
        let k = CorrelationKernel::Tabulated(TabulatedDecay::new(u, phi).unwrap());
        let bad = ModelParams::new(0.4, 0.4, 2.0, 0.5).unwrap();
        assert!(derived_scales(&bad, &k).is_err());
        let good = ModelParams::new(0.4, 0.4, 1.0, 0.5).unwrap();
        let s = derived_scales(&good, &k).unwrap();
        assert!((s.theta - 2.0 / 1.8).abs() < 1e-8);
    }
}
