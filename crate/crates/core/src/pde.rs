//! Finite-volume evolution of `∂ₜP = ∂ₓJ` on a truncated domain with
//! zero-flux walls.
//!
//! Cell averages `P_i` change by `(J_{i+1} − J_i)/h`, where `J_f` is the
//! current at face `f`. Both wall currents are zero, so the discrete mass
//! `Σ P_i·h` is conserved up to rounding. The face stencils reach two cells on
//! each side, which makes the operator pentadiagonal.

use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridPdf};
use crate::master::FluxCoefficients;

const MIN_CELLS: usize = 64;
const ASSEMBLY_TOL: f64 = 1e-13;
const UNDERSHOOT: f64 = 1e-6;

/// Discrete `P ↦ ∂ₓJ[P]`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub grid: Grid,
    pub coeffs: FluxCoefficients,
    matrix: BandMatrix,
}

impl Generator {
    pub fn matrix(&self) -> &BandMatrix {
        &self.matrix
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.matrix.matvec(p)
    }

    /// `max |∂ₓJ[P]|`, the stationarity defect of `P`.
    pub fn defect(&self, p: &[f64]) -> f64 {
        self.apply(p).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Whether `⟨x²⟩` is finite for the untruncated equation.
    pub fn second_moment_finite(&self) -> bool {
        let gt = self.coeffs.a1 - self.coeffs.d2;
        gt > 0.0 && 2.0 * self.coeffs.d2 < gt
    }
}

/// Cells and weights making up `J_f` for an interior face `f`.
fn face_stencil(c: &FluxCoefficients, grid: &Grid, f: usize) -> Vec<(usize, f64)> {
    let n = grid.n_cells;
    let h = grid.dx();
    let x = grid.face(f);
    let mut w: Vec<(usize, f64)> = Vec::with_capacity(8);
    // drift a1·x·P: upwind-biased extrapolation from the side the
    // deterministic flow comes from (it points towards the origin)
    let a = c.a1 * x;
    if x > 0.0 && f + 1 < n {
        w.extend([(f, 1.5 * a), (f + 1, -0.5 * a)]);
    } else if x < 0.0 && f >= 2 {
        w.extend([(f - 1, 1.5 * a), (f - 2, -0.5 * a)]);
    } else {
        w.extend([(f - 1, 0.5 * a), (f, 0.5 * a)]);
    }
    let diff = (c.d0 + c.d2 * x * x) / h;
    w.extend([(f - 1, -diff), (f, diff)]);
    let third = c.c1 * x / (h * h);
    if third != 0.0 {
        if f >= 2 && f + 1 < n {
            let t = 0.5 * third;
            w.extend([(f - 2, t), (f - 1, -t), (f, -t), (f + 1, t)]);
        } else if f < 2 {
            w.extend([(f - 1, third), (f, -2.0 * third), (f + 1, third)]);
        } else {
            w.extend([(f - 2, third), (f - 1, -2.0 * third), (f, third)]);
        }
    }
    w
}

pub fn build_generator(coeffs: FluxCoefficients, grid: &Grid) -> Result<Generator> {
    let n = grid.n_cells;
    if n < MIN_CELLS {
        return Err(Error::InvalidGrid(format!("PDE grid needs at least {MIN_CELLS} cells, got {n}")));
    }
    for (name, v) in [("a1", coeffs.a1), ("d0", coeffs.d0), ("d2", coeffs.d2), ("c1", coeffs.c1)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidParameter { name, value: v, reason: "flux coefficients must be finite and non-negative" });
        }
    }
    let h = grid.dx();
    let mut m = BandMatrix::zeros(n, 2, 2);
    // faces 0 and n carry no current
    for f in 1..n {
        for (cell, w) in face_stencil(&coeffs, grid, f) {
            // J_f enters cell f with + and cell f-1 with -
            m.add(f - 1, cell, w / h);
            m.add(f, cell, -w / h);
        }
    }
    let sums = m.column_sums();
    for (j, s) in sums.iter().enumerate() {
        let scale = (j.saturating_sub(2)..(j + 3).min(n)).map(|i| m.get(i, j).abs()).fold(0.0, f64::max);
        if s.abs() > ASSEMBLY_TOL * scale {
            return Err(Error::Assembly { column: j, residual: s.abs() });
        }
    }
    Ok(Generator { grid: *grid, coeffs, matrix: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PdeScheme {
    #[default]
    CrankNicolsonBanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: PdeScheme,
    /// Threshold on `‖P(t+Δ) − P(t)‖₁ / Δ`.
    pub steady_tol: f64,
    /// Requested snapshot times; each is taken at the first step on or after it.
    pub snapshot_times: Vec<f64>,
    /// Leading steps replaced by two implicit Euler half steps each, which
    /// damps the stiff modes Crank–Nicolson would otherwise carry along.
    pub startup_steps: usize,
}

impl EvolveConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self { dt, t_end, scheme: PdeScheme::CrankNicolsonBanded, steady_tol: 1e-7, snapshot_times: Vec::new(), startup_steps: 2 }
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_param("dt", self.dt, self.dt > 0.0 && self.dt.is_finite(), "must be positive")?;
        crate::error::check_param("t_end", self.t_end, self.t_end > 0.0 && self.t_end.is_finite(), "must be positive")?;
        crate::error::check_param("steady_tol", self.steady_tol, self.steady_tol > 0.0, "must be positive")?;
        for &t in &self.snapshot_times {
            crate::error::check_param("snapshot time", t, t >= 0.0 && t.is_finite(), "must be finite and non-negative")?;
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_end`.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_end / self.dt).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub pdf: GridPdf,
    pub mass: f64,
    pub min_density: f64,
    /// `max |∂ₓJ|` at this time.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub snapshots: Vec<Snapshot>,
    pub last: GridPdf,
    pub t: f64,
    pub steps: usize,
    /// Largest `|Δ mass|` over a single step.
    pub max_step_mass_drift: f64,
    /// `|mass(t_end) − mass(0)|`.
    pub mass_drift: f64,
    /// Most negative `min P / max P` seen.
    pub worst_undershoot: f64,
    pub warnings: Vec<String>,
}

/// Serializable summary of an evolution, without the profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_density: Vec<f64>,
    pub defect: Vec<f64>,
    pub max_step_mass_drift: f64,
    pub mass_drift: f64,
    pub warnings: Vec<String>,
}

impl Evolution {
    pub fn manifest(&self) -> SnapshotManifest {
        SnapshotManifest {
            times: self.snapshots.iter().map(|s| s.t).collect(),
            mass: self.snapshots.iter().map(|s| s.mass).collect(),
            min_density: self.snapshots.iter().map(|s| s.min_density).collect(),
            defect: self.snapshots.iter().map(|s| s.defect).collect(),
            max_step_mass_drift: self.max_step_mass_drift,
            mass_drift: self.mass_drift,
            warnings: self.warnings.clone(),
        }
    }
}

struct Stepper<'a> {
    gen: &'a Generator,
    lu: BandLu,
    rhs: BandMatrix,
}

impl<'a> Stepper<'a> {
    fn new(gen: &'a Generator, dt: f64) -> Result<Self> {
        let lhs = gen.matrix.scaled_plus_identity(-0.5 * dt, 1.0);
        let rhs = gen.matrix.scaled_plus_identity(0.5 * dt, 1.0);
        Ok(Self { gen, lu: lhs.lu()?, rhs })
    }

    fn crank_nicolson(&self, p: &mut Vec<f64>) {
        let mut next = self.rhs.matvec(p);
        self.lu.solve_in_place(&mut next);
        *p = next;
    }

    /// Two implicit Euler steps of `dt/2`; `(I − dt/2·A)` is the CN matrix.
    fn implicit_halves(&self, p: &mut [f64]) {
        self.lu.solve_in_place(p);
        self.lu.solve_in_place(p);
    }

    fn step(&self, p: &mut Vec<f64>, index: usize, startup: usize) {
        if index < startup {
            self.implicit_halves(p);
        } else {
            self.crank_nicolson(p);
        }
    }

    fn snapshot(&self, t: f64, p: &[f64]) -> Result<Snapshot> {
        let pdf = GridPdf::from_values(self.gen.grid, p.to_vec())?;
        Ok(Snapshot { t, mass: pdf.mass, min_density: pdf.min_value(), defect: self.gen.defect(p), pdf })
    }
}

fn check_initial(p0: &GridPdf, gen: &Generator) -> Result<()> {
    if p0.grid != gen.grid {
        return Err(Error::InvalidGrid("initial density lives on a different grid than the generator".into()));
    }
    let mass = p0.values.iter().sum::<f64>() * p0.dx();
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidGrid(format!("initial density has grid mass {mass}, expected 1")));
    }
    Ok(())
}

fn undershoot(p: &[f64]) -> f64 {
    let max = p.iter().fold(0.0f64, |a, &v| a.max(v));
    let min = p.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    if max > 0.0 {
        (min / max).min(0.0)
    } else {
        0.0
    }
}

fn mass_of(p: &[f64], h: f64) -> f64 {
    p.iter().sum::<f64>() * h
}

fn regularization_warning(gen: &Generator) -> Option<String> {
    (!gen.second_moment_finite()).then(|| "second moment diverges for these coefficients; the finite domain regularizes it".to_string())
}

pub fn evolve(p0: &GridPdf, gen: &Generator, config: &EvolveConfig) -> Result<Evolution> {
    config.validate()?;
    check_initial(p0, gen)?;
    let (n_steps, dt) = config.steps();
    let stepper = Stepper::new(gen, dt)?;
    let h = gen.grid.dx();
    let mut wanted: Vec<(usize, f64)> = config
        .snapshot_times
        .iter()
        .map(|&t| (((t / dt) - 1e-9).ceil().max(0.0) as usize).min(n_steps))
        .map(|k| (k, k as f64 * dt))
        .collect();
    wanted.sort_by_key(|w| w.0);
    wanted.dedup_by_key(|w| w.0);
    let mut next_snap = wanted.iter().peekable();

    let mut p = p0.values.clone();
    let mass0 = mass_of(&p, h);
    let mut mass = mass0;
    let mut max_drift = 0.0f64;
    let mut worst = undershoot(&p);
    let mut snapshots = Vec::with_capacity(wanted.len());
    while let Some(&&(k, t)) = next_snap.peek() {
        if k > 0 {
            break;
        }
        snapshots.push(stepper.snapshot(t, &p)?);
        next_snap.next();
    }
    for k in 0..n_steps {
        stepper.step(&mut p, k, config.startup_steps);
        let m = mass_of(&p, h);
        max_drift = max_drift.max((m - mass).abs());
        mass = m;
        worst = worst.min(undershoot(&p));
        while let Some(&&(ks, t)) = next_snap.peek() {
            if ks != k + 1 {
                break;
            }
            snapshots.push(stepper.snapshot(t, &p)?);
            next_snap.next();
        }
    }
    let mut warnings = Vec::new();
    if worst < -UNDERSHOOT {
        let w = format!("density undershoot down to {worst:.3e} of the peak");
        log::warn!("{w}");
        warnings.push(w);
    }
    if let Some(w) = regularization_warning(gen) {
        log::warn!("{w}");
        warnings.push(w);
    }
    Ok(Evolution {
        snapshots,
        last: GridPdf::from_values(gen.grid, p)?,
        t: n_steps as f64 * dt,
        steps: n_steps,
        max_step_mass_drift: max_drift,
        mass_drift: (mass - mass0).abs(),
        worst_undershoot: worst,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    /// Normalized to unit grid mass.
    pub pdf: GridPdf,
    /// `‖P(t+Δ) − P(t)‖₁ / Δ` at the last step.
    pub residual: f64,
    pub t: f64,
    pub steps: usize,
    pub mass_drift: f64,
    pub max_step_mass_drift: f64,
    pub worst_undershoot: f64,
    pub warnings: Vec<String>,
}

/// Step until the L1 rate of change drops below `steady_tol`, giving up at
/// `t_end`.
pub fn steady_state(gen: &Generator, config: &EvolveConfig, p_init: &GridPdf) -> Result<SteadyState> {
    config.validate()?;
    check_initial(p_init, gen)?;
    let (n_steps, dt) = config.steps();
    let stepper = Stepper::new(gen, dt)?;
    let h = gen.grid.dx();
    let mut p = p_init.values.clone();
    let mass0 = mass_of(&p, h);
    let mut mass = mass0;
    let mut max_drift = 0.0f64;
    let mut worst = undershoot(&p);
    let mut rate = f64::INFINITY;
    let mut prev = p.clone();
    for k in 0..n_steps {
        prev.copy_from_slice(&p);
        stepper.step(&mut p, k, config.startup_steps);
        let m = mass_of(&p, h);
        max_drift = max_drift.max((m - mass).abs());
        mass = m;
        worst = worst.min(undershoot(&p));
        rate = p.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>() * h / dt;
        if k >= config.startup_steps && rate < config.steady_tol {
            let mut warnings = Vec::new();
            if worst < -UNDERSHOOT {
                warnings.push(format!("density undershoot down to {worst:.3e} of the peak"));
            }
            if let Some(w) = regularization_warning(gen) {
                warnings.push(w);
            }
            for w in &warnings {
                log::warn!("{w}");
            }
            return Ok(SteadyState {
                pdf: GridPdf::from_values(gen.grid, p)?.renormalized(),
                residual: rate,
                t: (k + 1) as f64 * dt,
                steps: k + 1,
                mass_drift: (mass - mass0).abs(),
                max_step_mass_drift: max_drift,
                worst_undershoot: worst,
                warnings,
            });
        }
    }
    Err(Error::NotConverged { t: n_steps as f64 * dt, rate, tol: config.steady_tol })
}

/// Gaussian cell values of the given variance, normalized to unit grid mass.
pub fn gaussian_initial(grid: &Grid, variance: f64) -> Result<GridPdf> {
    crate::error::check_param("variance", variance, variance > 0.0 && variance.is_finite(), "must be positive")?;
    let values = grid.centers().iter().map(|x| (-x * x / (2.0 * variance)).exp()).collect();
    Ok(GridPdf::from_values(*grid, values)?.renormalized())
}
