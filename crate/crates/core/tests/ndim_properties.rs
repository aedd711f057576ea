mod support;

use cmnoise_core::master::flux_coefficients;
use cmnoise_core::ndim::{lie_evolved_coupling, nd_coefficients, noise_gramian, Horizon, NdModel};
use cmnoise_core::{derived_scales, CorrelationKernel, ModelParams};
use nalgebra::{dmatrix, DMatrix};
use proptest::prelude::*;

/// `e^{−E}·G·e^{E} = Σ_k (−1)^k ad_E^k(G) / k!`, summed until the terms fall
/// below the rounding level of the partial sum.
fn adjoint_series(e: &DMatrix<f64>, g: &DMatrix<f64>, u: f64) -> DMatrix<f64> {
    let mut term = g.clone();
    let mut sum = g.clone();
    for k in 1..200 {
        term = (e * &term - &term * e) * (-u / k as f64);
        sum += &term;
        if term.amax() < 1e-18 * sum.amax() {
            break;
        }
    }
    sum
}

#[test]
fn lie_coupling_matches_commutator_series() {
    let e = dmatrix![1.0, 1.0; 0.0, 2.0];
    let g = dmatrix![0.0, 1.0; 0.0, 0.0];
    let m = NdModel::new(e.clone(), DMatrix::identity(2, 2), g.clone(), 1.0, CorrelationKernel::ou(1.0)).unwrap();
    let got = lie_evolved_coupling(&m, 1.0).unwrap();
    assert!((&got - adjoint_series(&e, &g, 1.0)).amax() < 1e-10);
    let commuting = NdModel::new(e.clone(), DMatrix::zeros(2, 2), e.clone(), 1.0, CorrelationKernel::ou(1.0)).unwrap();
    for u in [0.3, 2.0] {
        assert!((lie_evolved_coupling(&commuting, u).unwrap() - &e).amax() < 1e-12);
    }
}

#[test]
fn quadrature_gramian_agrees_with_lyapunov_identity() {
    let e = dmatrix![1.2, 0.3; -0.4, 0.8];
    let d = dmatrix![1.0, 0.2; 0.2, 0.5];
    let m = NdModel::new(e.clone(), d, DMatrix::zeros(2, 2), 1.0, CorrelationKernel::ou(1.0)).unwrap();
    let inf = noise_gramian(&m, Horizon::Infinite).unwrap().m;
    for u in [0.1, 1.0, 5.0] {
        let q = noise_gramian(&m, Horizon::Finite(u)).unwrap();
        let p = (&e * -u).exp();
        let want = &inf - &p * &inf * p.transpose();
        assert!((&q.m - want).amax() < 1e-12, "u = {u}");
    }
}

#[test]
fn diagonal_model_reduces_componentwise() {
    let (g1, g2, d1, d2, tau) = (0.5, 1.5, 0.3, 2.0, 0.7);
    let m = NdModel::new(
        dmatrix![g1, 0.0; 0.0, g2],
        dmatrix![d1, 0.0; 0.0, d2],
        dmatrix![1.0, 0.0; 0.0, -2.0],
        1.0,
        CorrelationKernel::ou(tau),
    )
    .unwrap();
    let k = nd_coefficients(&m).unwrap();
    let third = |gamma: f64, d: f64, g: f64| g * d * 2.0 * tau / (2.0 * gamma * tau + 1.0) * tau;
    assert!((k.k_drift[(0, 0)] - tau).abs() < 1e-8 && (k.k_drift[(1, 1)] + 2.0 * tau).abs() < 1e-8);
    assert!((k.k_third[(0, 0)] - third(g1, d1, 1.0)).abs() < 1e-8);
    assert!((k.k_third[(1, 1)] - third(g2, d2, -2.0)).abs() < 1e-8);
    assert!(k.k_drift[(0, 1)].abs() < 1e-12 && k.k_third[(1, 0)].abs() < 1e-12);
}

#[test]
fn white_noise_limit_removes_third_order_term() {
    let e = dmatrix![1.0, 0.2; 0.0, 1.5];
    let g = dmatrix![0.3, 1.0; -0.5, 0.2];
    let mut last = f64::INFINITY;
    for c in [1.0f64, 10.0, 100.0, 1000.0] {
        let (tau, eps) = (1.0 / c, c.sqrt());
        let m = NdModel::new(e.clone(), DMatrix::identity(2, 2), g.clone(), eps, CorrelationKernel::ou(tau)).unwrap();
        let k = nd_coefficients(&m).unwrap();
        let size = (k.k_third * eps * eps).amax();
        assert!(size < last, "c = {c}");
        last = size;
    }
    assert!(last < 2e-3);
}

fn stable_matrix(v: [f64; 4]) -> DMatrix<f64> {
    // diagonal dominance keeps the spectrum in the right half-plane
    dmatrix![1.0 + v[0].abs(), 0.3 * v[1]; 0.3 * v[2], 1.0 + v[3].abs()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scalar_models_reproduce_flux_coefficients(
        gamma in 0.05f64..5.0, eps in 0.0f64..1.0, tau in 0.05f64..5.0, d_f in 0.01f64..5.0,
    ) {
        let p = ModelParams::new(gamma, eps, tau, d_f).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou(tau)).unwrap();
        let want = flux_coefficients(&s, &p);
        let m = NdModel::scalar(gamma, 1.0, d_f, eps, CorrelationKernel::ou(tau)).unwrap();
        let got = nd_coefficients(&m).unwrap().scalar_flux(&m).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * b.abs().max(1e-12);
        prop_assert!(close(got.a1, want.a1) && close(got.d2, want.d2) && close(got.c1, want.c1), "{got:?} vs {want:?}");
    }

    #[test]
    fn coefficients_transform_covariantly(
        ev in proptest::array::uniform4(-0.5f64..0.5),
        gv in proptest::array::uniform4(-1.0f64..1.0),
        sv in proptest::array::uniform4(-0.5f64..0.5),
        tau in 0.2f64..2.0,
    ) {
        let e = stable_matrix(ev);
        let g = DMatrix::from_row_slice(2, 2, &gv);
        let d = dmatrix![1.0, 0.3; 0.3, 0.8];
        let s = DMatrix::identity(2, 2) + DMatrix::from_row_slice(2, 2, &sv);
        prop_assume!(s.determinant().abs() > 0.2);
        let m = NdModel::new(e, d, g, 0.7, CorrelationKernel::ou(tau)).unwrap();
        let Ok(k) = nd_coefficients(&m) else { return Ok(()) };
        let mt = m.transformed(&s).unwrap();
        let kt = nd_coefficients(&mt).unwrap();
        let si = s.clone().try_inverse().unwrap();
        let drift = &si * &k.k_drift * &s;
        let third = &si * &k.k_third * si.transpose();
        let tol = 1e-8 * (1.0 + k.k_drift.amax().max(k.k_third.amax()));
        prop_assert!((&kt.k_drift - drift).amax() < tol);
        prop_assert!((&kt.k_third - third).amax() < tol);
    }
}
