use cmnoise_core::master::{curvature_at_origin, flux_residual, second_solution_check, tail_slope};
use cmnoise_core::{equilibrium_pdf_fick, equilibrium_pdf_third, flux_coefficients, Equilibrium, FluxCoefficients};

use super::{model, peq_grid};
use crate::{CliError, Ctx, Report};

fn describe(eq: &Equilibrium, coeffs: &FluxCoefficients, tail: Option<(f64, f64)>) -> Result<serde_json::Value, CliError> {
    let res = flux_residual(&eq.pdf, coeffs)?;
    let slope = match tail {
        Some((lo, hi)) => Some(tail_slope(&eq.pdf, lo, hi)?),
        None => None,
    };
    Ok(serde_json::json!({
        "law": format!("{:?}", eq.law),
        "norm": eq.norm,
        "grid_mass": eq.pdf.mass,
        "tail_mass": eq.pdf.tail_mass,
        "second_moment": eq.pdf.moment(2),
        "flux_residual": res.residual,
        "flux_residual_inconclusive": res.inconclusive,
        "tail_slope": slope,
        "warnings": eq.warnings,
    }))
}

pub fn run(ctx: &mut Ctx) -> Result<Report, CliError> {
    let (params, _, scales) = model(ctx)?;
    let grid = peq_grid(ctx, &params, &scales)?;
    let tail = if scales.delta > 0.0 {
        let lo = ctx.settings.get_or("tail_lo", 0.5 * grid.x_max)?;
        let hi = ctx.settings.get_or("tail_hi", grid.x_max)?;
        Some((lo, hi))
    } else {
        None
    };
    ctx.freeze();

    let coeffs = flux_coefficients(&scales, &params);
    let third = equilibrium_pdf_third(&scales, &params, &grid)?;
    let fick = equilibrium_pdf_fick(&scales, &params, &grid)?;
    let header = ctx.out.header().to_vec();
    ctx.out.write_with("peq_third.csv", |w| third.pdf.write_csv(w, &header))?;
    ctx.out.write_with("peq_fick.csv", |w| fick.pdf.write_csv(w, &header))?;

    let summary = serde_json::json!({
        "third": describe(&third, &coeffs, tail)?,
        "fick": describe(&fick, &coeffs.fick(), tail)?,
        "curvature_at_origin": curvature_at_origin(&scales, &params),
        "second_solution": second_solution_check(&scales),
        "expected_tail_exponent": -scales.alpha_tail,
    });
    let mut text = format!(
        "third-order: <x^2> = {:.6}  mass on grid {:.8}\nFick:        <x^2> = {:.6}  mass on grid {:.8}\n",
        third.pdf.moment(2),
        third.pdf.mass,
        fick.pdf.moment(2),
        fick.pdf.mass
    );
    if let Some((lo, hi)) = tail {
        text.push_str(&format!(
            "tail slope on [{lo}, {hi}]: third {:.4}, Fick {:.4}, theory {:.4}\n",
            summary["third"]["tail_slope"].as_f64().unwrap_or(f64::NAN),
            summary["fick"]["tail_slope"].as_f64().unwrap_or(f64::NAN),
            -scales.alpha_tail
        ));
    }
    ctx.out.write_json("peq.json", &summary)?;
    Ok(Report { summary, text, verdict: None })
}
