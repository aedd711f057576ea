mod compare;
mod evolve;
mod moments;
mod ndcoeffs;
mod peq;
mod scales;
mod simulate;

use std::fmt::Write as _;
use std::io::Write;

use cmnoise_core::master::default_grid;
use cmnoise_core::pde::{EvolveConfig, PdeScheme};
use cmnoise_core::sde::{EnsembleStats, HistogramSpec, InitialState, SimConfig};
use cmnoise_core::{derived_scales, CorrelationKernel, DerivedScales, Error, Grid, ModelParams, MomentValue, Result};

use crate::{CliError, Command, Ctx, Report};

pub use compare::{compare_verdict, Thresholds};

pub fn dispatch(cmd: &Command, ctx: &mut Ctx) -> std::result::Result<Report, CliError> {
    match cmd {
        Command::Scales { sweep } => scales::run(ctx, sweep.as_deref()),
        Command::Simulate => simulate::run(ctx),
        Command::Peq => peq::run(ctx),
        Command::Evolve => evolve::run(ctx),
        Command::Moments => moments::run(ctx),
        Command::Compare => compare::run(ctx),
        Command::Ndcoeffs => ndcoeffs::run(ctx),
    }
}

/// Parameters, kernel and scales; the scales go into the manifest.
fn model(ctx: &mut Ctx) -> Result<(ModelParams, CorrelationKernel, DerivedScales)> {
    let params = ctx.settings.params()?;
    let kernel = ctx.settings.kernel(params.tau)?;
    let scales = derived_scales(&params, &kernel)?;
    ctx.scales = Some(scales);
    Ok((params, kernel, scales))
}

fn require_ou(kernel: &CorrelationKernel, what: &str) -> Result<()> {
    match kernel {
        CorrelationKernel::OrnsteinUhlenbeck { .. } => Ok(()),
        _ => Err(Error::Unsupported(format!("{what} needs the ou kernel; tabulated kernels have no exact noise update"))),
    }
}

/// Ensemble settings: `n_traj`, `samples_per_traj`, `dt`, `t_burn`,
/// `stride`, `hist_lo`, `hist_hi`, `hist_bins`, `burst_threshold`, `x0`.
fn sim_config(ctx: &mut Ctx, params: &ModelParams) -> Result<SimConfig> {
    let seed = ctx.seed()?;
    let s = &mut ctx.settings;
    let n_traj = s.get_or("n_traj", 1000usize)?;
    let per_traj = s.get_or("samples_per_traj", 1000usize)?;
    let sigma = (params.d_f / params.gamma).sqrt().max(f64::MIN_POSITIVE);
    let mut c = SimConfig::defaults(params, sigma, n_traj, per_traj, seed);
    c.dt = s.get_or("dt", c.dt)?;
    c.t_burn = s.get_or("t_burn", c.t_burn)?;
    c.stride = s.get_or("stride", (1.0 / c.dt).round().max(1.0) as usize)?;
    c.t_end = c.t_burn + (per_traj * c.stride) as f64 * c.dt;
    c.histogram = HistogramSpec {
        lo: s.get_or("hist_lo", c.histogram.lo)?,
        hi: s.get_or("hist_hi", c.histogram.hi)?,
        bins: s.get_or("hist_bins", c.histogram.bins)?,
    };
    c.burst_threshold = s.get_or("burst_threshold", c.burst_threshold)?;
    if let Some(x0) = s.get::<f64>("x0")? {
        c.initial = InitialState::Fixed(x0);
    }
    s.record("scheme", "heun_stratonovich");
    c.validate(params)?;
    Ok(c)
}

/// Equilibrium grid: `peq_half_width` (default from the scales), `peq_cells`.
fn peq_grid(ctx: &mut Ctx, params: &ModelParams, scales: &DerivedScales) -> Result<Grid> {
    let d = default_grid(scales, params);
    let half = ctx.settings.get_or("peq_half_width", d.x_max)?;
    let cells = ctx.settings.get_or("peq_cells", d.n_cells)?;
    Grid::symmetric(half, cells)
}

/// PDE grid and stepping: `pde_half_width`, `pde_cells`, `pde_dt`,
/// `pde_t_end`, `pde_steady_tol`, `pde_startup_steps`.
fn pde_setup(ctx: &mut Ctx, params: &ModelParams, scales: &DerivedScales, t_end: f64) -> Result<(Grid, EvolveConfig)> {
    let d = default_grid(scales, params);
    let s = &mut ctx.settings;
    let grid = Grid::symmetric(s.get_or("pde_half_width", d.x_max)?, s.get_or("pde_cells", 2048usize)?)?;
    let mut cfg = EvolveConfig::new(s.get_or("pde_dt", 0.01)?, s.get_or("pde_t_end", t_end)?);
    cfg.steady_tol = s.get_or("pde_steady_tol", cfg.steady_tol)?;
    cfg.startup_steps = s.get_or("pde_startup_steps", cfg.startup_steps)?;
    cfg.scheme = PdeScheme::CrankNicolsonBanded;
    s.record("pde_scheme", "crank_nicolson_banded");
    cfg.validate()?;
    Ok((grid, cfg))
}

fn write_ensemble(ctx: &mut Ctx, stats: &EnsembleStats) -> std::io::Result<()> {
    let header = ctx.out.header().to_vec();
    ctx.out.write_with("histogram.csv", |w| stats.histogram.write_csv(w, &header))?;
    ctx.out.write_csv("abs_histogram.csv", |w| {
        writeln!(w, "abs_x,density")?;
        for (x, d) in stats.abs_histogram.density(stats.samples) {
            writeln!(w, "{x:.10e},{d:.12e}")?;
        }
        Ok(())
    })?;
    ctx.out.write_csv("mc_moments.csv", |w| {
        writeln!(w, "k,mean,se")?;
        for (k, e) in stats.moments.iter().enumerate() {
            writeln!(w, "{},{:.12e},{:.6e}", k + 1, e.mean, e.se)?;
        }
        Ok(())
    })?;
    ctx.out.write_csv("running_second_moment.csv", |w| {
        writeln!(w, "samples,mean_x2")?;
        for (n, m) in &stats.running_second_moment {
            writeln!(w, "{n},{m:.12e}")?;
        }
        Ok(())
    })
}

fn ensemble_json(stats: &EnsembleStats) -> serde_json::Value {
    serde_json::json!({
        "samples": stats.samples,
        "n_traj": stats.n_traj,
        "divergent": stats.divergent,
        "moments": stats.moments.iter().map(|e| serde_json::json!({"mean": e.mean, "se": e.se})).collect::<Vec<_>>(),
        "negative_fraction": stats.negative_fraction.mean,
        "burst_fraction": stats.burst_fraction.mean,
        "running_second_moment": stats.running_second_moment,
        "out_of_range": stats.histogram.below + stats.histogram.above,
    })
}

fn scales_json(s: &DerivedScales) -> serde_json::Value {
    serde_json::to_value(s).unwrap_or(serde_json::Value::Null)
}

fn scales_line(s: &DerivedScales) -> String {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:>10} {:>10} {:>12} {:>12} {:>12} {:>10} {:>6} {:>6}",
        "delta", "gamma_tau", "theta", "r", "R", "alpha", "n_max", "weak"
    );
    let _ = writeln!(
        t,
        "{:>10.6} {:>10.6} {:>12.6} {:>12.6} {:>12.6} {:>10.6} {:>6} {:>6}",
        s.delta, s.gamma_tau, s.theta, s.r, s.big_r, s.alpha_tail, s.n_max_moment, s.weak_regime_ok
    );
    t
}

/// Table cell for an equilibrium moment. Odd moments are zero by symmetry,
/// but they are shown as divergent once `⟨|x|ⁿ⟩` no longer exists.
fn show_moment(v: MomentValue, exists: bool) -> String {
    match v {
        MomentValue::Finite(x) if exists => format!("{x:.6}"),
        _ => "Divergent".into(),
    }
}
