use cmnoise_core::pde::{build_generator, evolve, gaussian_initial};
use cmnoise_core::{flux_coefficients, FluxCoefficients};

use super::{model, pde_setup};
use crate::{CliError, Ctx, Report};

/// `pde_operator = third | fick` selects the flux.
pub(super) fn operator(ctx: &mut Ctx, coeffs: FluxCoefficients) -> Result<FluxCoefficients, CliError> {
    let op: String = ctx.settings.get_or("pde_operator", "third".to_string())?;
    match op.as_str() {
        "third" => Ok(coeffs),
        "fick" => Ok(coeffs.fick()),
        other => Err(CliError::Usage(format!("pde_operator: expected `third` or `fick`, got `{other}`"))),
    }
}

pub fn run(ctx: &mut Ctx) -> Result<Report, CliError> {
    let (params, _, scales) = model(ctx)?;
    let (grid, mut cfg) = pde_setup(ctx, &params, &scales, 20.0)?;
    let coeffs = operator(ctx, flux_coefficients(&scales, &params))?;
    let variance = ctx.settings.get_or("pde_init_variance", params.d_f / params.gamma)?;
    cfg.snapshot_times = ctx.settings.list_or("pde_snapshots", &[0.0, 1.0, 2.0, 5.0, 10.0, 20.0])?;
    ctx.freeze();

    let gen = build_generator(coeffs, &grid)?;
    let p0 = gaussian_initial(&grid, variance)?;
    let ev = evolve(&p0, &gen, &cfg)?;
    let header = ctx.out.header().to_vec();
    for (k, snap) in ev.snapshots.iter().enumerate() {
        let mut h = header.clone();
        h.push(("t".into(), format!("{}", snap.t)));
        ctx.out.write_with(&format!("snapshot_{k:03}.csv"), |w| snap.pdf.write_csv(w, &h))?;
    }
    let summary = serde_json::json!({
        "evolution": ev.manifest(),
        "steps": ev.steps,
        "worst_undershoot": ev.worst_undershoot,
    });
    ctx.out.write_json("evolution.json", &summary)?;
    let mut text = String::from("       t       mass     <x^2>_grid       defect\n");
    for s in &ev.snapshots {
        text.push_str(&format!("{:>8.3} {:>10.8} {:>14.6} {:>12.3e}\n", s.t, s.mass, s.pdf.grid_moment(2), s.defect));
    }
    text.push_str(&format!("mass drift {:.3e} over {} steps\n", ev.mass_drift, ev.steps));
    for w in &ev.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    Ok(Report { summary, text, verdict: None })
}
