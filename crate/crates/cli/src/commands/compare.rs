use std::io::Write;

use cmnoise_core::moments::{equilibrium_moment, equilibrium_moment_fick};
use cmnoise_core::pde::{build_generator, gaussian_initial, steady_state};
use cmnoise_core::sde::ensemble_stats;
use cmnoise_core::{equilibrium_pdf_fick, equilibrium_pdf_third, flux_coefficients};
use serde::Serialize;

use super::evolve::operator;
use super::{ensemble_json, model, pde_setup, peq_grid, require_ou, show_moment, sim_config, write_ensemble};
use crate::{CliError, Ctx, Report};

/// Acceptance thresholds; `fick_ratio = 0` disables the Fick comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// Largest accepted L1(MC, third-order).
    pub l1_max: f64,
    /// Required L1(MC, Fick) / L1(MC, third-order).
    pub fick_ratio: f64,
    /// Pairwise bound between the densities when δ = 0.
    pub collapse_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distances {
    pub mc_third: f64,
    pub mc_fick: f64,
    pub mc_pde: f64,
    pub third_fick: f64,
    pub third_pde: f64,
    pub fick_pde: f64,
}

/// PASS/FAIL with the reason for each failed check.
pub fn compare_verdict(d: &Distances, delta: f64, t: &Thresholds) -> (bool, Vec<String>) {
    let mut failures = Vec::new();
    if !(d.mc_third < t.l1_max) {
        failures.push(format!("L1(MC, third) = {:.4} is not below {}", d.mc_third, t.l1_max));
    }
    if delta == 0.0 {
        for (name, v) in [("third/Fick", d.third_fick), ("third/PDE", d.third_pde), ("Fick/PDE", d.fick_pde)] {
            if !(v < t.collapse_l1) {
                failures.push(format!("delta = 0 but L1({name}) = {v:.4} is not below {}", t.collapse_l1));
            }
        }
    } else if t.fick_ratio > 0.0 && !(d.mc_fick >= t.fick_ratio * d.mc_third) {
        failures.push(format!("L1(MC, Fick) = {:.4} is less than {} x L1(MC, third) = {:.4}", d.mc_fick, t.fick_ratio, d.mc_third));
    }
    (failures.is_empty(), failures)
}

pub fn run(ctx: &mut Ctx) -> Result<Report, CliError> {
    let (params, kernel, scales) = model(ctx)?;
    require_ou(&kernel, "compare")?;
    let sim = sim_config(ctx, &params)?;
    let grid = peq_grid(ctx, &params, &scales)?;
    let (pde_grid, pde_cfg) = pde_setup(ctx, &params, &scales, 1000.0)?;
    let pde_coeffs = operator(ctx, flux_coefficients(&scales, &params))?;
    let thresholds = Thresholds {
        l1_max: ctx.settings.get_or("compare_l1_max", 0.03)?,
        fick_ratio: ctx.settings.get_or("compare_fick_ratio", 2.0)?,
        collapse_l1: ctx.settings.get_or("compare_collapse_l1", 0.01)?,
    };
    ctx.freeze();
    let header = ctx.out.header().to_vec();

    log::info!("stage: equilibria");
    let third = equilibrium_pdf_third(&scales, &params, &grid)?;
    let fick = equilibrium_pdf_fick(&scales, &params, &grid)?;
    ctx.out.write_with("peq_third.csv", |w| third.pdf.write_csv(w, &header))?;
    ctx.out.write_with("peq_fick.csv", |w| fick.pdf.write_csv(w, &header))?;

    log::info!("stage: pde steady state");
    let gen = build_generator(pde_coeffs, &pde_grid)?;
    let p0 = gaussian_initial(&pde_grid, params.d_f / params.gamma)?;
    let steady = steady_state(&gen, &pde_cfg, &p0)?;
    ctx.out.write_with("pde_steady.csv", |w| steady.pdf.write_csv(w, &header))?;
    let third_on_pde = equilibrium_pdf_third(&scales, &params, &pde_grid)?;
    let fick_on_pde = equilibrium_pdf_fick(&scales, &params, &pde_grid)?;

    log::info!("stage: ensemble ({} trajectories)", sim.n_traj);
    let stats = ensemble_stats(&params, &sim)?;
    write_ensemble(ctx, &stats)?;

    let hist = &stats.histogram;
    let d = Distances {
        mc_third: hist.l1_distance(|x| third.density(x))?,
        mc_fick: hist.l1_distance(|x| fick.density(x))?,
        mc_pde: hist.l1_distance(|x| Ok(steady.pdf.interpolate(x)))?,
        third_fick: third.pdf.l1_distance(&fick.pdf)?,
        third_pde: third_on_pde.pdf.l1_distance(&steady.pdf)?,
        fick_pde: fick_on_pde.pdf.l1_distance(&steady.pdf)?,
    };
    let (pass, failures) = compare_verdict(&d, scales.delta, &thresholds);

    let density = hist.density();
    let mut curves = Vec::with_capacity(density.len());
    for (i, &mc) in density.iter().enumerate() {
        let x = hist.center(i);
        curves.push((x, mc, third.density(x)?, fick.density(x)?, steady.pdf.interpolate(x)));
    }
    ctx.out.write_csv("compare_curves.csv", |w| {
        writeln!(w, "x,mc,third,fick,pde")?;
        for (x, mc, t, f, p) in &curves {
            writeln!(w, "{x:.10e},{mc:.12e},{t:.12e},{f:.12e},{p:.12e}")?;
        }
        Ok(())
    })?;

    let moments: Vec<_> = (1..=4u32)
        .map(|n| {
            let mc = stats.moments[n as usize - 1];
            (
                n,
                equilibrium_moment(n, &scales, &params),
                equilibrium_moment_fick(n, &scales, &params),
                third.pdf.moment(n),
                steady.pdf.grid_moment(n),
                mc,
            )
        })
        .collect();
    ctx.out.write_csv("compare_moments.csv", |w| {
        writeln!(w, "n,third,fick,third_quadrature,pde_grid,mc,mc_se")?;
        for (n, t, f, q, p, mc) in &moments {
            writeln!(w, "{n},{t},{f},{q:.10e},{p:.10e},{:.10e},{:.4e}", mc.mean, mc.se)?;
        }
        Ok(())
    })?;

    let mut text = String::new();
    text.push_str(&format!("L1(MC, third-order) = {:.5}\n", d.mc_third));
    text.push_str(&format!("L1(MC, Fick)        = {:.5}\n", d.mc_fick));
    text.push_str(&format!("L1(MC, PDE)         = {:.5}\n", d.mc_pde));
    text.push_str(&format!("L1(third, PDE)      = {:.5}\n", d.third_pde));
    text.push_str(&format!("\n{:>3} {:>12} {:>12} {:>12} {:>22}\n", "n", "third", "fick", "quadrature", "Monte Carlo"));
    for (n, t, f, q, _, mc) in &moments {
        let exists = scales.moment_exists(*n);
        text.push_str(&format!(
            "{n:>3} {:>12} {:>12} {q:>12.6} {:>12.6} +- {:<7.4}\n",
            show_moment(*t, exists),
            show_moment(*f, exists),
            mc.mean,
            mc.se
        ));
    }
    text.push_str(&format!("\nverdict: {}\n", if pass { "PASS" } else { "FAIL" }));
    for f in &failures {
        text.push_str(&format!("  {f}\n"));
    }

    let summary = serde_json::json!({
        "distances": d,
        "thresholds": thresholds,
        "verdict": if pass { "PASS" } else { "FAIL" },
        "failures": failures,
        "moments": moments.iter().map(|(n, t, f, q, p, mc)| serde_json::json!({
            "n": n, "third": t, "fick": f, "third_quadrature": q, "pde_grid": p, "mc": mc.mean, "mc_se": mc.se,
        })).collect::<Vec<_>>(),
        "pde": {
            "t": steady.t,
            "steps": steady.steps,
            "residual": steady.residual,
            "mass_drift": steady.mass_drift,
            "warnings": steady.warnings,
        },
        "ensemble": ensemble_json(&stats),
    });
    ctx.out.write_json("compare.json", &summary)?;
    Ok(Report { summary, text, verdict: Some(pass) })
}
