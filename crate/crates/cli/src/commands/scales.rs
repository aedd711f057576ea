use std::io::Write;

use cmnoise_core::{derived_scales, CorrelationKernel, ModelParams};

use super::{model, scales_json, scales_line};
use crate::{CliError, Ctx, Report, Sweep};

pub fn run(ctx: &mut Ctx, sweep: Option<&str>) -> Result<Report, CliError> {
    let (params, kernel, scales) = model(ctx)?;
    let sweep = sweep.map(Sweep::parse).transpose().map_err(CliError::Usage)?;
    let deltas = match sweep {
        Some(sw) => {
            ctx.settings.record("sweep", format!("gamma_tau={}:{}:{}", sw.lo, sw.hi, sw.n));
            ctx.settings.list_or("sweep_delta", &[0.1, 0.2, 0.3, 0.4, 0.5])?
        }
        None => Vec::new(),
    };
    ctx.freeze();

    let mut text = scales_line(&scales);
    let mut summary = serde_json::json!({ "scales": scales_json(&scales) });
    ctx.out.write_json("scales.json", &summary)?;

    if let Some(sw) = sweep {
        let points = sw.points();
        let mut rows = Vec::with_capacity(points.len());
        for &gt in &points {
            let mut row = Vec::with_capacity(deltas.len());
            for &delta in &deltas {
                let p = ModelParams::from_dimensionless(delta, gt, params.tau, params.d_f)?;
                // An OU kernel follows τ; a tabulated one is fixed.
                let k = match &kernel {
                    CorrelationKernel::OrnsteinUhlenbeck { .. } => CorrelationKernel::ou(p.tau),
                    other => other.clone(),
                };
                row.push(derived_scales(&p, &k)?.big_r);
            }
            rows.push(row);
        }
        ctx.out.write_csv("scales_sweep.csv", |w| {
            let cols: Vec<String> = deltas.iter().map(|d| format!("R_delta_{d}")).collect();
            writeln!(w, "gamma_tau,{}", cols.join(","))?;
            for (gt, row) in points.iter().zip(&rows) {
                let cells: Vec<String> = row.iter().map(|r| format!("{r:.12e}")).collect();
                writeln!(w, "{gt:.10e},{}", cells.join(","))?;
            }
            Ok(())
        })?;
        text.push_str(&format!(
            "sweep: {} points of gamma_tau in [{}, {}] for delta in {:?} -> scales_sweep.csv\n",
            sw.n, sw.lo, sw.hi, deltas
        ));
        summary["sweep"] = serde_json::json!({ "gamma_tau": points, "delta": deltas, "big_r": rows });
    }
    Ok(Report { summary, text, verdict: None })
}
