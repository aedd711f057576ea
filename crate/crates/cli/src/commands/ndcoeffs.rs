use std::fs::File;
use std::io::BufReader;

use cmnoise_core::ndim::{nd_coefficients, read_matrix_csv, write_matrix_csv, DMatrix};
use cmnoise_core::NdModel;

use crate::{CliError, Ctx, Report};

fn matrix(ctx: &mut Ctx, key: &str) -> Result<DMatrix<f64>, CliError> {
    let path = ctx.settings.path(key)?;
    let file = File::open(&path).map_err(|e| CliError::Usage(format!("{key} = {}: {e}", path.display())))?;
    Ok(read_matrix_csv(BufReader::new(file))?)
}

/// Keys: `nd_e`, `nd_d`, `nd_g` (CSV matrix files), `nd_epsilon`, and the
/// kernel keys with `tau`.
pub fn run(ctx: &mut Ctx) -> Result<Report, CliError> {
    let e = matrix(ctx, "nd_e")?;
    let d = matrix(ctx, "nd_d")?;
    let g = matrix(ctx, "nd_g")?;
    let epsilon = ctx.settings.get_or("nd_epsilon", 1.0)?;
    let tau = ctx.settings.get_or("tau", 1.0)?;
    let kernel = ctx.settings.kernel(tau)?;
    ctx.freeze();

    let model = NdModel::new(e, d, g, epsilon, kernel)?;
    let c = nd_coefficients(&model)?;
    ctx.out.write_csv("k_drift.csv", |w| write_matrix_csv(w, &c.k_drift))?;
    ctx.out.write_csv("k_third.csv", |w| write_matrix_csv(w, &c.k_third))?;
    let mut summary = serde_json::json!({ "n": model.n, "coefficients": c.to_json() });
    let mut text =
        format!("n = {}  K_drift error {:.2e}  K_third error {:.2e}  cutoff {:.3}\n", model.n, c.k_drift_error, c.k_third_error, c.cutoff);
    if model.n == 1 {
        let f = c.scalar_flux(&model)?;
        summary["scalar_flux"] = serde_json::to_value(f).unwrap_or_default();
        text.push_str(&format!("scalar flux: a1 {:.10} d0 {:.10} d2 {:.10} c1 {:.10}\n", f.a1, f.d0, f.d2, f.c1));
    }
    ctx.out.write_json("ndcoeffs.json", &summary)?;
    Ok(Report { summary, text, verdict: None })
}
