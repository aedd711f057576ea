use std::io::Write;

use cmnoise_core::moments::{equilibrium_moment_fick, evolve_moments, moment_generator_matrix, moment_table, write_moment_csv};
use cmnoise_core::MomentState;

use super::{model, show_moment};
use crate::{CliError, Ctx, Report};

pub fn run(ctx: &mut Ctx) -> Result<Report, CliError> {
    let (params, _, scales) = model(ctx)?;
    let n_max = ctx.settings.get_or("moments_n_max", 6usize)?;
    if n_max == 0 {
        return Err(CliError::Usage("moments_n_max must be >= 1".into()));
    }
    let x0 = ctx.settings.get_or("moments_x0", 0.0)?;
    let times = ctx.settings.list_or("moments_times", &[0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0])?;
    ctx.freeze();

    let rows = moment_table(n_max, &scales, &params)?;
    ctx.out.write_csv("moments_table.csv", |w| write_moment_csv(w, &rows))?;

    let matrix = moment_generator_matrix(n_max, &scales, &params)?;
    let start = MomentState::point(x0, n_max);
    let mut traj = Vec::with_capacity(times.len());
    for &t in &times {
        traj.push((t, evolve_moments(&start, &matrix, t)?));
    }
    ctx.out.write_csv("moments_evolution.csv", |w| {
        let cols: Vec<String> = (1..=n_max).map(|n| format!("m{n}")).collect();
        writeln!(w, "t,{}", cols.join(","))?;
        for (t, ev) in &traj {
            let vals: Vec<String> = ev.state.values.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{t},{}", vals.join(","))?;
        }
        Ok(())
    })?;

    let mut text = format!("{:>3} {:>14} {:>14} {:>12}\n", "n", "third", "fick", "rate");
    for r in &rows {
        let fick = equilibrium_moment_fick(r.n, &scales, &params);
        text.push_str(&format!(
            "{:>3} {:>14} {:>14} {:>12.6}\n",
            r.n,
            show_moment(r.equilibrium, r.exists),
            show_moment(fick, r.exists),
            r.rate
        ));
    }
    let summary = serde_json::json!({
        "table": rows,
        "evolution": traj.iter().map(|(t, ev)| serde_json::json!({
            "t": t,
            "moments": ev.state.values,
            "transient_only": ev.transient_only,
            "used_expm": ev.used_expm,
        })).collect::<Vec<_>>(),
    });
    ctx.out.write_json("moments.json", &summary)?;
    Ok(Report { summary, text, verdict: None })
}
