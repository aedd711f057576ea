mod support;

use cmnoise_core::grid::Grid;
use cmnoise_core::master::{equilibrium_pdf_fick, equilibrium_pdf_third, flux_coefficients};
use cmnoise_core::moments::{equilibrium_moment, equilibrium_moment_fick, evolve_moments, moment_generator_matrix, MomentState};
use cmnoise_core::pde::{build_generator, evolve, gaussian_initial, EvolveConfig};
use cmnoise_core::{derived_scales, CorrelationKernel, ModelParams, MomentValue};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn existing_moments_have_positive_factors(
        lg in -2.0f64..2.0, lt in -2.0f64..2.0, eps in 0.0f64..3.0, d_f in 0.01f64..5.0,
    ) {
        let (gamma, tau) = (10f64.powf(lg), 10f64.powf(lt));
        let p = ModelParams::new(gamma, eps, tau, d_f).unwrap();
        let s = derived_scales(&p, &CorrelationKernel::ou(tau)).unwrap();
        for n in (2..=40u32).step_by(2) {
            if !s.moment_exists(n) {
                prop_assert_eq!(equilibrium_moment(n, &s, &p), MomentValue::Divergent);
                continue;
            }
            for j in 1..=n / 2 {
                prop_assert!(1.0 - 2.0 * j as f64 * s.big_r > 0.0, "n = {n}, j = {j}");
            }
            let v = equilibrium_moment(n, &s, &p).finite().unwrap();
            prop_assert!(v > 0.0);
        }
    }
}

#[test]
fn closed_form_moments_match_quadrature() {
    for (name, p) in support::finite_variance_sets() {
        let s = support::scales(&p);
        let grid = Grid::symmetric(60.0, 8192).unwrap();
        let third = equilibrium_pdf_third(&s, &p, &grid).unwrap().pdf.moment(2);
        let want = equilibrium_moment(2, &s, &p).finite().unwrap();
        assert!(((third - want) / want).abs() < 5e-3, "{name}: {third} vs {want}");
        let fick = equilibrium_pdf_fick(&s, &p, &grid).unwrap().pdf.moment(2);
        let want = equilibrium_moment_fick(2, &s, &p).finite().unwrap();
        assert!(((fick - want) / want).abs() < 5e-3, "{name} Fick: {fick} vs {want}");
    }
}

#[test]
fn moderate_values() {
    let p = support::moderate();
    let s = support::scales(&p);
    let m = moment_generator_matrix(2, &s, &p).unwrap();
    assert!((m.diagonal[2] + 0.16).abs() < 1e-14);
    assert!((m.coupling[2] - 2.0 * 0.5 * (1.0 - 2.0 * 0.32 / 1.8)).abs() < 1e-14);
    assert!((equilibrium_moment(2, &s, &p).finite().unwrap() - 1.25 * (1.0 - 0.64 / 1.8) / 0.2).abs() < 1e-12);
    assert_eq!(equilibrium_moment(4, &s, &p), MomentValue::Divergent);
}

#[test]
fn hierarchy_tracks_pde_second_moment() {
    let p = support::moderate();
    let s = support::scales(&p);
    // edge density below 1e-10 of the peak; the x² integrand only decays
    // like x^{-1.5}, so narrower walls visibly cut the second moment
    let grid = Grid::symmetric(1000.0, 16384).unwrap();
    let gen = build_generator(flux_coefficients(&s, &p), &grid).unwrap();
    let p0 = gaussian_initial(&grid, 9.0).unwrap();
    let times = vec![1.0, 2.0, 5.0, 10.0];
    let cfg = EvolveConfig { snapshot_times: times.clone(), ..EvolveConfig::new(0.01, 10.0) };
    let ev = evolve(&p0, &gen, &cfg).unwrap();
    let matrix = moment_generator_matrix(2, &s, &p).unwrap();
    let start = MomentState::new(vec![1.0, 0.0, p0.grid_moment(2)]);
    for snap in &ev.snapshots {
        let want = evolve_moments(&start, &matrix, snap.t).unwrap().state.values[2];
        let got = snap.pdf.grid_moment(2) / snap.mass;
        assert!(((got - want) / want).abs() < 0.02, "t = {}: PDE {got} vs hierarchy {want}", snap.t);
    }
}
