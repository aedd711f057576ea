//! Kummer's confluent hypergeometric function `₁F₁(a; b; z)` for real arguments.
//!
//! Evaluation strategy, in order:
//!
//! 1. Identities: `z = 0` or `a = 0` gives 1, `a = b` gives `e^z`.
//! 2. `z > 0`: the defining power series.
//! 3. `z < 0` with `|z| > 30 + |a| + |b|`: the large-argument expansion
//!    `Γ(b)/Γ(b-a) |z|^{-a} Σ (a)_k (a-b+1)_k / (k! |z|^k)`, truncated at its
//!    smallest term and accepted only when that term, the cancellation in
//!    the partial sums and the exponentially small companion term are all
//!    below the target error.
//! 4. Otherwise `z < 0` goes through the Kummer transformation
//!    `₁F₁(a; b; z) = e^z ₁F₁(b-a; b; -z)`, whose series has non-negative
//!    terms whenever `b ≥ a`.
//!
//! Every series is summed in `f64` with overflow-safe rescaling and a running
//! estimate of `Σ|t_k| / |Σ t_k|`. When that condition number makes the
//! `f64` sum unreliable, the same series is re-summed in exact fixed-point
//! integer arithmetic with as many fraction bits as the cancellation needs.

use super::gamma::ln_gamma;
use super::wide;
use crate::error::{Error, Result};

/// Relative error bound accepted from an `f64` evaluation path. The bound
/// `ε·cond·(8 + terms)` is pessimistic; observed errors are far smaller.
const F64_ACCEPT: f64 = 1e-11;
/// Target of the extended-precision path.
const WIDE_ACCEPT: f64 = 1e-14;
const EPS: f64 = f64::EPSILON;
const RESCALE: f64 = 1e150;
const RESCALE_LOG2: i64 = 498; // log2(1e150) rounded down; exact power used below
                               // ln 2 split so that k·LN2_HI is exact for |k| < 2^20
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

/// Arguments of `₁F₁(a; b; z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kummer13Args {
    pub a: f64,
    pub b: f64,
    pub z: f64,
}

impl Kummer13Args {
    pub fn new(a: f64, b: f64, z: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && z.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "1F1 argument",
                value: if !a.is_finite() {
                    a
                } else if !b.is_finite() {
                    b
                } else {
                    z
                },
                reason: "must be finite",
            });
        }
        if b <= 0.0 && b == b.floor() {
            return Err(Error::InvalidB { b });
        }
        Ok(Self { a, b, z })
    }

    /// Large-|z| crossover between series and asymptotic expansion.
    pub fn crossover(&self) -> f64 {
        30.0 + self.a.abs() + self.b.abs()
    }
}

/// `₁F₁(a; b; z)`.
pub fn kummer_1f1(args: Kummer13Args) -> Result<f64> {
    let Kummer13Args { a, b, z } = Kummer13Args::new(args.a, args.b, args.z)?;
    if z == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if a == b {
        return Ok(z.exp());
    }
    if z > 0.0 || is_nonpositive_integer(a) {
        // direct series; for z < 0 only reached when it terminates
        return sum_series(a, b, z).map(|s| s.value(0.0));
    }
    let x = -z;
    if !is_nonpositive_integer(b - a) && x > args.crossover() {
        if let Some(v) = asymptotic_negative(a, b, x) {
            return Ok(v);
        }
    }
    sum_series(b - a, b, x).map(|s| s.value(-x))
}

/// Convenience wrapper over [`kummer_1f1`].
pub fn hyp1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    kummer_1f1(Kummer13Args { a, b, z })
}

fn is_nonpositive_integer(v: f64) -> bool {
    v <= 0.0 && v == v.floor()
}

/// A series sum `mantissa · 2^exp2`.
struct ScaledSum {
    mantissa: f64,
    exp2: i64,
}

impl ScaledSum {
    /// `mantissa · 2^exp2 · e^{shift}` without intermediate overflow.
    fn value(&self, shift: f64) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        let e = self.exp2 as f64;
        let arg = (e * LN2_HI + shift) + e * LN2_LO + self.mantissa.abs().ln();
        self.mantissa.signum() * arg.exp()
    }
}

struct F64Series {
    sum: f64,
    abs_sum: f64,
    exp2: i64,
    terms: usize,
    converged: bool,
}

/// `Σ (α)_k w^k / ((β)_k k!)` in `f64`.
fn series_f64(alpha: f64, beta: f64, w: f64) -> F64Series {
    let max_terms = (20.0 * (w.abs() + alpha.abs() + beta.abs()) + 5000.0) as usize;
    let mut t = 1.0f64;
    let mut sum = 1.0f64;
    let mut abs_sum = 1.0f64;
    let mut exp2 = 0i64;
    let mut compensation = 0.0f64;
    let settle = alpha.abs().max(beta.abs()) + 1.0;
    for k in 0..max_terms {
        let kf = k as f64;
        let num = alpha + kf;
        if num == 0.0 {
            return F64Series { sum, abs_sum, exp2, terms: k + 1, converged: true };
        }
        let ratio = num * w / ((beta + kf) * (kf + 1.0));
        t *= ratio;
        // Kahan-compensated running sum
        let y = t - compensation;
        let s_new = sum + y;
        compensation = (s_new - sum) - y;
        sum = s_new;
        abs_sum += t.abs();
        if abs_sum > RESCALE {
            let f = 2f64.powi(-(RESCALE_LOG2 as i32));
            t *= f;
            sum *= f;
            abs_sum *= f;
            compensation *= f;
            exp2 += RESCALE_LOG2;
        }
        if kf + 1.0 > settle && kf + 2.0 > w.abs() {
            let grow = ((alpha + kf + 1.0) / (beta + kf + 1.0)).max(1.0);
            let r_bar = w.abs() * grow / (kf + 2.0);
            if r_bar < 1.0 {
                let remainder = t.abs() * r_bar / (1.0 - r_bar);
                if remainder <= 1e-17 * sum.abs().max(f64::MIN_POSITIVE) {
                    return F64Series { sum, abs_sum, exp2, terms: k + 2, converged: true };
                }
            }
        }
    }
    F64Series { sum, abs_sum, exp2, terms: max_terms, converged: false }
}

fn sum_series(alpha: f64, beta: f64, w: f64) -> Result<ScaledSum> {
    let s = series_f64(alpha, beta, w);
    let cond = if s.sum != 0.0 { s.abs_sum / s.sum.abs() } else { f64::INFINITY };
    let est = EPS * cond * (8.0 + s.terms as f64);
    if s.converged && est <= F64_ACCEPT {
        return Ok(ScaledSum { mantissa: s.sum, exp2: s.exp2 });
    }
    let cond_bits = if cond.is_finite() { cond.log2().max(0.0) } else { 64.0 };
    let hint = (cond_bits + 64.0 + (s.terms as f64).log2()).ceil() as u64;
    let wide = wide::series(alpha, beta, w, hint).map_err(|e| match e {
        Error::AccuracyUnreachable { .. } => Error::AccuracyUnreachable { a: alpha, b: beta, z: w, achieved: est },
        other => other,
    })?;
    if wide.rel_err > WIDE_ACCEPT {
        return Err(Error::AccuracyUnreachable { a: alpha, b: beta, z: w, achieved: wide.rel_err });
    }
    Ok(ScaledSum { mantissa: wide.mantissa, exp2: wide.exp2 })
}

/// Large negative argument: `₁F₁(a; b; -x)` for `x → +∞`.
fn asymptotic_negative(a: f64, b: f64, x: f64) -> Option<f64> {
    let c = a - b + 1.0;
    let mut t = 1.0f64;
    let mut sum = 1.0f64;
    let mut abs_sum = 1.0f64;
    let err;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let next = t * (a + kf) * (c + kf) / ((kf + 1.0) * x);
        if next == 0.0 {
            err = 0.0;
            break;
        }
        if next.abs() >= t.abs() && k > 0 {
            // smallest term reached; series starts to diverge
            err = t.abs();
            break;
        }
        t = next;
        sum += t;
        abs_sum += t.abs();
        if t.abs() < 1e-17 * sum.abs() {
            err = t.abs();
            break;
        }
        k += 1;
        if k > 100_000 {
            return None;
        }
    }
    if sum == 0.0 {
        return None;
    }
    let rel = err / sum.abs() + EPS * abs_sum / sum.abs() * 4.0;
    if rel > 1e-14 {
        return None;
    }
    let (lg_b, sg_b) = ln_gamma(b);
    let (lg_ba, sg_ba) = ln_gamma(b - a);
    let log_dominant = lg_b - lg_ba - a * x.ln() + sum.abs().ln();
    // exponentially small companion ~ Γ(b)/Γ(a) e^{-x} x^{a-b}
    let (lg_a, _) = ln_gamma(a);
    let log_sub = lg_b - lg_a - x + (a - b) * x.ln();
    if log_sub - log_dominant > (1e-16f64).ln() {
        return None;
    }
    Some(sg_b * sg_ba * sum.signum() * log_dominant.exp())
}
