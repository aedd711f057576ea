use cmnoise_core::sde::ensemble_stats;

use super::{ensemble_json, model, require_ou, sim_config, write_ensemble};
use crate::{CliError, Ctx, Report};

pub fn run(ctx: &mut Ctx) -> Result<Report, CliError> {
    let (params, kernel, _) = model(ctx)?;
    require_ou(&kernel, "simulate")?;
    let cfg = sim_config(ctx, &params)?;
    ctx.freeze();
    log::info!("ensemble: {} trajectories x {} samples", cfg.n_traj, cfg.samples_per_traj());
    let stats = ensemble_stats(&params, &cfg)?;
    write_ensemble(ctx, &stats)?;
    let m2 = stats.second_moment();
    let text = format!(
        "samples {}  <x> = {:.6} +- {:.6}  <x^2> = {:.6} +- {:.6}  divergent {}\n",
        stats.samples, stats.moments[0].mean, stats.moments[0].se, m2.mean, m2.se, stats.divergent
    );
    Ok(Report { summary: serde_json::json!({ "ensemble": ensemble_json(&stats) }), text, verdict: None })
}
