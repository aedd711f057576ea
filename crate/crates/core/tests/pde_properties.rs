mod support;

use cmnoise_core::grid::{Grid, GridPdf};
use cmnoise_core::master::flux_coefficients;
use cmnoise_core::moments::moment_generator_matrix;
use cmnoise_core::pde::{build_generator, evolve, gaussian_initial, steady_state, EvolveConfig};

#[test]
fn mass_is_conserved_over_many_steps() {
    let p = support::moderate();
    let s = support::scales(&p);
    let grid = Grid::symmetric(30.0, 256).unwrap();
    let gen = build_generator(flux_coefficients(&s, &p), &grid).unwrap();
    let p0 = gaussian_initial(&grid, 2.0).unwrap();
    let ev = evolve(&p0, &gen, &EvolveConfig::new(0.01, 1000.0)).unwrap();
    assert_eq!(ev.steps, 100_000);
    assert!((ev.last.mass - 1.0).abs() < 1e-10, "{}", ev.last.mass);
    assert!(ev.max_step_mass_drift < 1e-12);
}

#[test]
fn second_moment_rate_matches_hierarchy() {
    for (name, p) in support::finite_variance_sets() {
        let s = support::scales(&p);
        // the x² integrand reaches far into the developing tails; walls at
        // 1000 and h = 0.06 keep truncation and differencing errors small
        let grid = Grid::symmetric(1000.0, 32768).unwrap();
        let gen = build_generator(flux_coefficients(&s, &p), &grid).unwrap();
        let p0 = gaussian_initial(&grid, 9.0).unwrap();
        let h = 0.05;
        let cfg = EvolveConfig { snapshot_times: vec![2.0 - h, 2.0, 2.0 + h], ..EvolveConfig::new(0.005, 2.0 + h) };
        let ev = evolve(&p0, &gen, &cfg).unwrap();
        let m = |k: usize, n: u32| ev.snapshots[k].pdf.grid_moment(n);
        let measured = (m(2, 2) - m(0, 2)) / (2.0 * h);
        let matrix = moment_generator_matrix(2, &s, &p).unwrap();
        let rhs = matrix.diagonal[2] * m(1, 2) + matrix.coupling[2] * m(1, 0);
        assert!(((measured - rhs) / rhs).abs() < 0.02, "{name}: {measured} vs {rhs}");
    }
}

fn steady(n: usize, third: bool) -> GridPdf {
    let p = support::moderate();
    let s = support::scales(&p);
    let grid = Grid::symmetric(30.0, n).unwrap();
    let c = flux_coefficients(&s, &p);
    let gen = build_generator(if third { c } else { c.fick() }, &grid).unwrap();
    let p0 = gaussian_initial(&grid, 1.0).unwrap();
    let cfg = EvolveConfig { steady_tol: 1e-9, ..EvolveConfig::new(0.05, 2000.0) };
    steady_state(&gen, &cfg, &p0).unwrap().pdf
}

/// L1 distance after averaging the fine profile onto the coarse cells.
fn coarse_l1(coarse: &GridPdf, fine: &GridPdf) -> f64 {
    let h = coarse.dx();
    coarse.values.iter().enumerate().map(|(i, v)| (v - 0.5 * (fine.values[2 * i] + fine.values[2 * i + 1])).abs() * h).sum()
}

#[test]
fn steady_state_converges_at_second_order() {
    let (a, b, c) = (steady(256, true), steady(512, true), steady(1024, true));
    let (e1, e2) = (coarse_l1(&a, &b), coarse_l1(&b, &c));
    assert!(e1 / e2 >= 3.0, "{e1} then {e2}");
}

#[test]
fn third_order_term_narrows_the_steady_state() {
    let (third, fick) = (steady(1024, true), steady(1024, false));
    assert!(third.grid_moment(2) < fick.grid_moment(2));
}
