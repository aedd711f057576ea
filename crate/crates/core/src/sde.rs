//! Monte Carlo ensembles of `dx/dt = −γx + f(t) − εξ(t)x`.
//!
//! `ξ` is the unit-variance Ornstein–Uhlenbeck process, advanced with its
//! exact transition. Since `ξ` is smooth on the scale of `dt`, the
//! multiplicative part is a random ODE and is integrated with Heun's
//! predictor-corrector using `ξ` at both ends of the step, which is the
//! Stratonovich-consistent reading. The white forcing with
//! `⟨f(t)f(t′)⟩ = 2D_f δ(t−t′)` enters as `√(2D_f dt)·η` per step.
//!
//! Every trajectory owns a ChaCha8 stream selected by its index under the
//! master seed, and ensembles are reduced in index order, so results do not
//! depend on the number of threads.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Trajectories per work unit; fixed so the reduction order never changes.
const CHUNK: usize = 32;
const DIVERGED: f64 = 1e300;
/// Largest tolerated fraction of divergent trajectories.
const MAX_DIVERGENT_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    HeunStratonovich,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    /// `x ~ N(0, D_f/γ)`, the law without multiplicative noise.
    Stationary,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_burn: f64,
    /// Total simulated time, burn-in included.
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Steps between recorded samples.
    pub stride: usize,
    pub initial: InitialState,
    pub histogram: HistogramSpec,
    /// `|x|` threshold for the exceedance fraction.
    pub burst_threshold: f64,
}

impl SimConfig {
    /// Largest admissible step, `0.05·min(τ, 1/γ, 1/(γ+4ε))`.
    pub fn max_dt(params: &ModelParams) -> f64 {
        0.05 * params.tau.min(1.0 / params.gamma).min(1.0 / (params.gamma + 4.0 * params.epsilon))
    }

    /// Shortest admissible burn-in, `10·max(τ, 1/γ)`.
    pub fn min_burn(params: &ModelParams) -> f64 {
        10.0 * params.tau.max(1.0 / params.gamma)
    }

    /// Defaults: largest admissible `dt`, minimal burn-in, one sample per
    /// time unit (at least one step), 201 bins over `±5σ`.
    pub fn defaults(params: &ModelParams, sigma_est: f64, n_traj: usize, samples_per_traj: usize, seed: u64) -> Self {
        let dt = Self::max_dt(params);
        let stride = (1.0 / dt).round().max(1.0) as usize;
        let t_burn = Self::min_burn(params);
        Self {
            dt,
            t_burn,
            t_end: t_burn + (samples_per_traj * stride) as f64 * dt,
            n_traj,
            seed,
            scheme: Scheme::HeunStratonovich,
            stride,
            initial: InitialState::Stationary,
            histogram: HistogramSpec { lo: -5.0 * sigma_est, hi: 5.0 * sigma_est, bins: 201 },
            burst_threshold: 5.0,
        }
    }

    pub fn burn_steps(&self) -> usize {
        (self.t_burn / self.dt).round() as usize
    }

    pub fn total_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn samples_per_traj(&self) -> usize {
        (self.total_steps() - self.burn_steps()) / self.stride
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        let max_dt = Self::max_dt(params);
        if !(self.dt > 0.0 && self.dt <= max_dt * (1.0 + 1e-12)) {
            return bad("dt", self.dt, "must satisfy 0 < dt <= 0.05·min(tau, 1/gamma, 1/(gamma+4·epsilon))");
        }
        if !(self.t_burn >= Self::min_burn(params) * (1.0 - 1e-12)) {
            return bad("t_burn", self.t_burn, "must be >= 10·max(tau, 1/gamma)");
        }
        if !(self.t_end > self.t_burn) || !self.t_end.is_finite() {
            return bad("t_end", self.t_end, "must exceed t_burn");
        }
        if self.n_traj < 2 {
            return bad("n_traj", self.n_traj as f64, "need at least 2 trajectories for standard errors");
        }
        if self.stride == 0 || self.samples_per_traj() == 0 {
            return bad("stride", self.stride as f64, "must be >= 1 and leave at least one sample");
        }
        let h = self.histogram;
        if !(h.hi > h.lo && h.bins > 0) {
            return bad("histogram", h.bins as f64, "needs lo < hi and bins > 0");
        }
        Ok(())
    }
}

/// Exact Ornstein–Uhlenbeck transition for unit stationary variance.
pub fn ou_step(xi: f64, dt: f64, noise: f64, tau: f64) -> f64 {
    let a = (-dt / tau).exp();
    xi * a + (-(-2.0 * dt / tau).exp_m1()).sqrt() * noise
}

/// Per-run constants of the update.
#[derive(Clone, Copy)]
struct Stepper {
    gamma: f64,
    epsilon: f64,
    dt: f64,
    ou_decay: f64,
    ou_kick: f64,
    additive: f64,
}

impl Stepper {
    fn new(params: &ModelParams, dt: f64) -> Self {
        Self {
            gamma: params.gamma,
            epsilon: params.epsilon,
            dt,
            ou_decay: (-dt / params.tau).exp(),
            ou_kick: (-(-2.0 * dt / params.tau).exp_m1()).sqrt(),
            additive: (2.0 * params.d_f * dt).sqrt(),
        }
    }

    #[inline(always)]
    fn step(&self, x: f64, xi: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let eta_xi: f64 = rng.sample(StandardNormal);
        let eta_f: f64 = rng.sample(StandardNormal);
        let xi_next = xi * self.ou_decay + self.ou_kick * eta_xi;
        let dw = self.additive * eta_f;
        let f0 = -(self.gamma + self.epsilon * xi) * x;
        let predictor = x + f0 * self.dt + dw;
        let f1 = -(self.gamma + self.epsilon * xi_next) * predictor;
        (x + 0.5 * (f0 + f1) * self.dt + dw, xi_next)
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn initial(params: &ModelParams, init: InitialState, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let xi: f64 = rng.sample(StandardNormal);
    let x = match init {
        InitialState::Stationary => {
            let z: f64 = rng.sample(StandardNormal);
            z * (params.d_f / params.gamma).sqrt()
        }
        InitialState::Fixed(x0) => x0,
    };
    (x, xi)
}

/// Drive one trajectory, calling `visit(step, x)` after every step.
/// Returns `false` if it diverged (|x| above 1e300 or non-finite).
fn drive(params: &ModelParams, dt: f64, steps: usize, init: InitialState, rng: &mut ChaCha8Rng, mut visit: impl FnMut(usize, f64)) -> bool {
    let stepper = Stepper::new(params, dt);
    let (mut x, mut xi) = initial(params, init, rng);
    for k in 1..=steps {
        (x, xi) = stepper.step(x, xi, rng);
        if !(x.abs() < DIVERGED) {
            return false;
        }
        visit(k, x);
    }
    true
}

/// Recorded path of a single trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub divergent: bool,
}

/// One trajectory of stream `stream_index` under `config.seed`, sampled
/// every `stride` steps after burn-in.
pub fn integrate_trajectory(params: &ModelParams, config: &SimConfig, stream_index: u64) -> Result<Trajectory> {
    config.validate(params)?;
    let mut rng = stream(config.seed, stream_index);
    let burn = config.burn_steps();
    let mut times = Vec::with_capacity(config.samples_per_traj());
    let mut xs = Vec::with_capacity(config.samples_per_traj());
    let ok = drive(params, config.dt, config.total_steps(), config.initial, &mut rng, |k, x| {
        if k > burn && (k - burn) % config.stride == 0 {
            times.push(k as f64 * config.dt);
            xs.push(x);
        }
    });
    Ok(Trajectory { times, x: xs, divergent: !ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    fn new(spec: HistogramSpec) -> Self {
        Self { lo: spec.lo, hi: spec.hi, counts: vec![0; spec.bins], below: 0, above: 0 }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }

    #[inline]
    fn add(&mut self, x: f64) {
        if x < self.lo {
            self.below += 1;
        } else if x >= self.hi {
            self.above += 1;
        } else {
            let last = self.counts.len() - 1;
            let i = ((x - self.lo) / self.width()) as usize;
            self.counts[i.min(last)] += 1;
        }
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.below += other.below;
        self.above += other.above;
    }

    /// Density estimate per bin, normalized by all samples (in and out of range).
    pub fn density(&self) -> Vec<f64> {
        let n = self.total() as f64;
        let w = self.width();
        self.counts.iter().map(|&c| c as f64 / (n * w)).collect()
    }

    /// `Σ |ĥᵢ − p̄ᵢ|·w` with `p̄ᵢ` the bin average of `pdf` (3-point Gauss).
    pub fn l1_distance(&self, mut pdf: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let w = self.width();
        let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
        let weights = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        let dens = self.density();
        let mut l1 = 0.0;
        for (i, h) in dens.iter().enumerate() {
            let c = self.center(i);
            let mut avg = 0.0;
            for (t, wt) in nodes.iter().zip(weights) {
                avg += wt * pdf(c + 0.5 * w * t)?;
            }
            l1 += (h - avg).abs() * w;
        }
        Ok(l1)
    }

    /// CSV `bin_center,density`.
    pub fn write_csv<W: Write>(&self, mut w: W, header: &[(String, String)]) -> std::io::Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "bin_center,density")?;
        for (i, d) in self.density().iter().enumerate() {
            writeln!(w, "{:.10e},{:.12e}", self.center(i), d)?;
        }
        Ok(())
    }
}

/// Log-spaced histogram of `|x|`, ten bins per decade over `[1e-3, 1e8)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl LogHistogram {
    const LO_EXP: i32 = -30;
    const HI_EXP: i32 = 80;

    fn new() -> Self {
        let edges = (Self::LO_EXP..=Self::HI_EXP).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
        Self { edges, counts: vec![0; (Self::HI_EXP - Self::LO_EXP) as usize] }
    }

    #[inline]
    fn add(&mut self, x: f64) {
        let a = x.abs();
        if a < self.edges[0] {
            return;
        }
        let k = (10.0 * a.log10()).floor() as i64 - Self::LO_EXP as i64;
        if let Some(c) = self.counts.get_mut(k as usize) {
            *c += 1;
        }
    }

    fn merge(&mut self, other: &LogHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Density of `|x|` per bin given the total number of samples.
    pub fn density(&self, total: u64) -> Vec<(f64, f64)> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let (a, b) = (self.edges[i], self.edges[i + 1]);
                ((a * b).sqrt(), c as f64 / (total as f64 * (b - a)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error from the spread of per-trajectory means.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub histogram: Histogram,
    pub abs_histogram: LogHistogram,
    pub samples: u64,
    /// `⟨x⟩, ⟨x²⟩, ⟨x³⟩, ⟨x⁴⟩`
    pub moments: [Estimate; 4],
    /// Fraction of samples with `x < 0`.
    pub negative_fraction: Estimate,
    /// Fraction of samples with `|x| > burst_threshold`.
    pub burst_fraction: Estimate,
    /// Running `⟨x²⟩` over the first whole trajectories: one entry each time
    /// the sample count first reaches a power of ten.
    pub running_second_moment: Vec<(u64, f64)>,
    pub divergent: usize,
    pub n_traj: usize,
    pub config: SimConfig,
}

impl EnsembleStats {
    pub fn second_moment(&self) -> Estimate {
        self.moments[1]
    }
}

/// Sufficient per-trajectory data, merged in index order.
#[derive(Clone)]
struct Accum {
    hist: Histogram,
    abs_hist: LogHistogram,
    samples: u64,
    // sums over trajectories of per-trajectory means
    block: [Vec<f64>; 6],
    divergent: usize,
}

fn block_estimate(v: &[f64]) -> Estimate {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    Estimate { mean, se: (var / n).sqrt() }
}

/// Run the ensemble and reduce it to [`EnsembleStats`].
pub fn ensemble_stats(params: &ModelParams, config: &SimConfig) -> Result<EnsembleStats> {
    config.validate(params)?;
    let per_traj = config.samples_per_traj();
    let n_chunks = config.n_traj.div_ceil(CHUNK);
    let chunks: Vec<Accum> = (0..n_chunks)
        .into_par_iter()
        .map(|c| run_chunk(params, config, c * CHUNK..((c + 1) * CHUNK).min(config.n_traj), per_traj))
        .collect();

    let mut hist = Histogram::new(config.histogram);
    let mut abs_hist = LogHistogram::new();
    let mut samples = 0u64;
    let mut blocks: [Vec<f64>; 6] = Default::default();
    let mut divergent = 0;
    for ch in &chunks {
        hist.merge(&ch.hist);
        abs_hist.merge(&ch.abs_hist);
        for (dst, src) in blocks.iter_mut().zip(&ch.block) {
            dst.extend_from_slice(src);
        }
        divergent += ch.divergent;
        samples += ch.samples;
    }
    let mut running = Vec::new();
    let mut decade = 1u64;
    let mut n = 0u64;
    let mut x2_sum = 0.0;
    for &m in &blocks[1] {
        n += per_traj as u64;
        x2_sum += m * per_traj as f64;
        if n >= decade {
            running.push((n, x2_sum / n as f64));
            while decade <= n {
                decade *= 10;
            }
        }
    }
    if divergent as f64 > MAX_DIVERGENT_FRACTION * config.n_traj as f64 {
        return Err(Error::DivergentEnsemble { divergent, total: config.n_traj });
    }
    if divergent > 0 {
        log::warn!("{divergent} of {} trajectories diverged and were excluded", config.n_traj);
    }
    if blocks[0].len() < 2 {
        return Err(Error::DivergentEnsemble { divergent, total: config.n_traj });
    }
    let est: Vec<Estimate> = blocks.iter().map(|b| block_estimate(b)).collect();
    Ok(EnsembleStats {
        histogram: hist,
        abs_histogram: abs_hist,
        samples,
        moments: [est[0], est[1], est[2], est[3]],
        negative_fraction: est[4],
        burst_fraction: est[5],
        running_second_moment: running,
        divergent,
        n_traj: config.n_traj,
        config: config.clone(),
    })
}

fn run_chunk(params: &ModelParams, config: &SimConfig, range: std::ops::Range<usize>, per_traj: usize) -> Accum {
    let mut acc = Accum {
        hist: Histogram::new(config.histogram),
        abs_hist: LogHistogram::new(),
        samples: 0,
        block: Default::default(),
        divergent: 0,
    };
    let burn = config.burn_steps();
    let stride = config.stride;
    let threshold = config.burst_threshold;
    let mut recorded = Vec::with_capacity(per_traj);
    for index in range {
        let mut rng = stream(config.seed, index as u64);
        recorded.clear();
        let ok = drive(params, config.dt, config.total_steps(), config.initial, &mut rng, |k, x| {
            if k > burn && (k - burn) % stride == 0 {
                recorded.push(x);
            }
        });
        if !ok {
            acc.divergent += 1;
            continue;
        }
        let mut sums = [0.0f64; 6];
        for &x in &recorded {
            acc.hist.add(x);
            acc.abs_hist.add(x);
            let x2 = x * x;
            sums[0] += x;
            sums[1] += x2;
            sums[2] += x2 * x;
            sums[3] += x2 * x2;
            sums[4] += (x < 0.0) as u8 as f64;
            sums[5] += (x.abs() > threshold) as u8 as f64;
            acc.samples += 1;
        }
        let m = recorded.len() as f64;
        for (b, s) in acc.block.iter_mut().zip(sums) {
            b.push(s / m);
        }
    }
    acc
}

/// Ensemble mean of `x²` at one recording time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationPoint {
    pub t: f64,
    pub mean_x2: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub x0: f64,
    /// Steps between recorded times.
    pub record_every: usize,
}

/// `⟨x²⟩(t)` for an ensemble started at `x0` with stationary `ξ`.
pub fn relaxation_curve(params: &ModelParams, config: &RelaxationConfig) -> Result<Vec<RelaxationPoint>> {
    params.validate()?;
    let max_dt = SimConfig::max_dt(params);
    if !(config.dt > 0.0 && config.dt <= max_dt * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: config.dt,
            reason: "must satisfy 0 < dt <= 0.05·min(tau, 1/gamma, 1/(gamma+4·epsilon))",
        });
    }
    if config.n_traj < 2 || config.record_every == 0 {
        return Err(Error::InvalidParameter {
            name: "n_traj",
            value: config.n_traj as f64,
            reason: "need >= 2 trajectories and record_every >= 1",
        });
    }
    let steps = (config.t_end / config.dt).round() as usize;
    let n_rec = steps / config.record_every;
    let n_chunks = config.n_traj.div_ceil(CHUNK);
    let init = InitialState::Fixed(config.x0);
    let partial: Vec<(Vec<f64>, Vec<f64>, usize, usize)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut s1 = vec![0.0; n_rec];
            let mut s2 = vec![0.0; n_rec];
            let mut good = 0;
            let mut bad = 0;
            let mut row = vec![0.0; n_rec];
            for index in c * CHUNK..((c + 1) * CHUNK).min(config.n_traj) {
                let mut rng = stream(config.seed, index as u64);
                let ok = drive(params, config.dt, steps, init, &mut rng, |k, x| {
                    if k % config.record_every == 0 {
                        row[k / config.record_every - 1] = x * x;
                    }
                });
                if ok {
                    good += 1;
                    for (j, v) in row.iter().enumerate() {
                        s1[j] += v;
                        s2[j] += v * v;
                    }
                } else {
                    bad += 1;
                }
            }
            (s1, s2, good, bad)
        })
        .collect();
    let mut s1 = vec![0.0; n_rec];
    let mut s2 = vec![0.0; n_rec];
    let (mut good, mut bad) = (0usize, 0usize);
    for (a, b, g, d) in partial {
        for j in 0..n_rec {
            s1[j] += a[j];
            s2[j] += b[j];
        }
        good += g;
        bad += d;
    }
    if bad as f64 > MAX_DIVERGENT_FRACTION * config.n_traj as f64 {
        return Err(Error::DivergentEnsemble { divergent: bad, total: config.n_traj });
    }
    let n = good as f64;
    Ok((0..n_rec)
        .map(|j| {
            let mean = s1[j] / n;
            let var = (s2[j] / n - mean * mean).max(0.0) * n / (n - 1.0);
            RelaxationPoint { t: ((j + 1) * config.record_every) as f64 * config.dt, mean_x2: mean, se: (var / n).sqrt() }
        })
        .collect())
}

/// Decay rate `k` of `⟨x²⟩(t) − m_eq ∝ e^{−kt}` over `t ∈ [t_lo, t_hi]`,
/// by weighted least squares on `ln|⟨x²⟩ − m_eq|` with weights `(D/se)²`.
pub fn fit_relaxation_rate(curve: &[RelaxationPoint], m_eq: f64, t_lo: f64, t_hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64, f64)> = curve
        .iter()
        .filter(|p| p.t >= t_lo - 1e-9 && p.t <= t_hi + 1e-9)
        .map(|p| {
            let d = p.mean_x2 - m_eq;
            let w = if p.se > 0.0 { (d / p.se).powi(2) } else { 1.0 };
            (p.t, d.abs().ln(), w)
        })
        .filter(|p| p.1.is_finite())
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidParameter { name: "fit window", value: t_hi - t_lo, reason: "fewer than two usable points" });
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mt = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sty: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.1 - my)).sum();
    let stt: f64 = pts.iter().map(|p| p.2 * (p.0 - mt) * (p.0 - mt)).sum();
    Ok(-sty / stt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_step_limits() {
        assert_eq!(ou_step(0.0, 0.1, 0.0, 1.0), 0.0);
        assert!((ou_step(5.0, 100.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        // variance preserved: a² + (1 − a²) = 1
        let a = (-0.3f64).exp();
        let b = ou_step(0.0, 0.3, 1.0, 1.0);
        assert!((a * a + b * b - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_decay_is_second_order() {
        let p = ModelParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
        let dt = SimConfig::max_dt(&p);
        let steps = (1.0 / dt).round() as usize;
        let mut rng = stream(1, 0);
        let mut last = 0.0;
        drive(&p, dt, steps, InitialState::Fixed(1.0), &mut rng, |_, x| last = x);
        let exact = (-2.0f64).exp();
        assert!(((last - exact) / exact).abs() < 2.0 * dt * dt, "{last} vs {exact}");
    }

    #[test]
    fn validation() {
        let p = ModelParams::new(0.4, 0.4, 1.0, 0.5).unwrap();
        let mut c = SimConfig::defaults(&p, 2.0, 4, 10, 1);
        assert!(c.validate(&p).is_ok());
        assert!((c.dt - 0.025).abs() < 1e-15);
        c.dt = 0.03;
        assert!(c.validate(&p).is_err());
        let mut c = SimConfig::defaults(&p, 2.0, 4, 10, 1);
        c.t_burn = 5.0;
        assert!(c.validate(&p).is_err());
    }

    #[test]
    fn histogram_bins_and_l1() {
        let mut h = Histogram::new(HistogramSpec { lo: -1.0, hi: 1.0, bins: 4 });
        for x in [-0.9, -0.1, 0.1, 0.2, 0.9, 5.0] {
            h.add(x);
        }
        assert_eq!(h.counts, vec![1, 1, 2, 1]);
        assert_eq!(h.above, 1);
        assert_eq!(h.total(), 6);
        let l1 = h.l1_distance(|_| Ok(0.5)).unwrap();
        let d = h.density();
        let expect: f64 = d.iter().map(|v| (v - 0.5).abs() * 0.5).sum();
        assert!((l1 - expect).abs() < 1e-15);
    }

    #[test]
    fn ensemble_is_thread_count_independent() {
        let p = ModelParams::new(0.4, 0.4, 1.0, 0.5).unwrap();
        let c = SimConfig::defaults(&p, 2.0, 70, 20, 9);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| ensemble_stats(&p, &c)).unwrap();
        let b = three.install(|| ensemble_stats(&p, &c)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples, 70 * 20);
        assert_eq!(a.histogram.total(), a.samples);
        assert_eq!(a.running_second_moment.iter().map(|r| r.0).collect::<Vec<_>>(), vec![20, 100, 1000]);
    }

    #[test]
    fn trajectory_matches_ensemble_stream() {
        let p = ModelParams::new(0.4, 0.4, 1.0, 0.5).unwrap();
        let c = SimConfig::defaults(&p, 2.0, 2, 5, 3);
        let t0 = integrate_trajectory(&p, &c, 0).unwrap();
        let t1 = integrate_trajectory(&p, &c, 1).unwrap();
        assert_eq!(t0.x.len(), 5);
        assert_ne!(t0.x, t1.x);
        let stats = ensemble_stats(&p, &c).unwrap();
        let m: f64 = t0.x.iter().chain(&t1.x).map(|x| x * x).sum::<f64>() / 10.0;
        assert!((stats.moments[1].mean - m).abs() < 1e-12);
    }
}
