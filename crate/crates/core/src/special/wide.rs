//! Fixed-point big-integer summation of `Σ (α)_k w^k / ((β)_k k!)` for
//! series whose partial sums cancel beyond what `f64` can resolve.
//!
//! `α`, `β` and `w` are `f64` and therefore exact dyadic rationals, so each
//! term ratio is an exact integer fraction. Terms are carried as integers
//! scaled by `2^F`; the only rounding is one truncation per term, which is
//! propagated through the term ratios to bound the error of the sum.

use num_bigint::BigInt;
use num_traits::{Float, One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Result of a wide summation: `mantissa · 2^exp2` with a relative error bound.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WideSum {
    pub mantissa: f64,
    pub exp2: i64,
    pub rel_err: f64,
}

const MAX_FRACTION_BITS: u64 = 1 << 17;
const TARGET_REL: f64 = 1e-15;

fn dyadic(v: f64) -> (BigInt, i64) {
    if v == 0.0 {
        return (BigInt::zero(), 0);
    }
    let (m, e, s) = Float::integer_decode(v);
    let mut n = BigInt::from(m);
    if s < 0 {
        n = -n;
    }
    (n, e as i64)
}

/// Number of significant bits of `|v|`.
fn bitlen(v: &BigInt) -> u64 {
    v.bits()
}

pub(crate) fn series(alpha: f64, beta: f64, w: f64, fraction_bits_hint: u64) -> Result<WideSum> {
    let (ma, ea) = dyadic(alpha);
    let (mb, eb) = dyadic(beta);
    let (mw, ew) = dyadic(w);
    let s = [0, -ea, -eb, -ew].into_iter().max().unwrap_or(0) as usize;
    let lift = |m: BigInt, e: i64| -> BigInt {
        if m.is_zero() {
            m
        } else {
            m << (e + s as i64) as usize
        }
    };
    let a_num = lift(ma, ea);
    let b_num = lift(mb, eb);
    let w_num = lift(mw, ew);
    let unit = BigInt::one() << s;
    let max_terms = (10.0 * (w.abs() + alpha.abs() + beta.abs()) + 2000.0) as usize;
    let growth_zone = w.abs() + alpha.abs() + beta.abs();

    let mut frac_bits = fraction_bits_hint.max(64);
    loop {
        if frac_bits > MAX_FRACTION_BITS {
            return Err(Error::AccuracyUnreachable { a: alpha, b: beta, z: w, achieved: f64::INFINITY });
        }
        let mut term = BigInt::one() << frac_bits as usize;
        let mut sum = term.clone();
        // absolute truncation error of the current term and of the sum, in
        // units of 2^(err_exp - F); rescaled to stay inside f64 range
        let mut term_err = 0.0f64;
        let mut sum_err = 0.0f64;
        let mut err_exp = 0i32;
        let mut underflow = false;
        let mut a_k = a_num.clone();
        let mut b_k = b_num.clone();
        for k in 0..max_terms {
            if a_k.is_zero() {
                break; // terminating series
            }
            let num = &a_k * &w_num;
            let den = &unit * &b_k * BigInt::from(k as u64 + 1);
            term = term * num / den;
            a_k += &unit;
            b_k += &unit;
            if term.is_zero() {
                if (k as f64) < growth_zone {
                    underflow = true;
                }
                break;
            }
            sum += &term;
            let kf = k as f64;
            let ratio = ((alpha + kf) * w / ((beta + kf) * (kf + 1.0))).abs() * (1.0 + 1e-12);
            term_err = term_err * ratio + 2f64.powi(-err_exp);
            sum_err += term_err;
            if sum_err > 1e250 {
                term_err *= 2f64.powi(-800);
                sum_err *= 2f64.powi(-800);
                err_exp += 800;
            }
        }
        if underflow {
            frac_bits += 64;
            continue;
        }
        if sum.is_zero() {
            frac_bits *= 2;
            continue;
        }
        let sum_bits = bitlen(&sum) as f64;
        let rel_err = (sum_err * 2.0).log2() + err_exp as f64 - (sum_bits - 1.0);
        let rel_err = 2f64.powf(rel_err);
        if rel_err > TARGET_REL {
            let extra = ((rel_err / TARGET_REL).log2().ceil().min(1e6) as u64 + 16).min(MAX_FRACTION_BITS);
            frac_bits += extra;
            continue;
        }
        let shift = bitlen(&sum).saturating_sub(62);
        let mantissa = (&sum >> shift as usize).to_f64().unwrap_or(f64::NAN);
        return Ok(WideSum { mantissa, exp2: shift as i64 - frac_bits as i64, rel_err });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(w: WideSum) -> f64 {
        w.mantissa * 2f64.powi(w.exp2 as i32)
    }

    #[test]
    fn exponential_series() {
        // (α)_k / (α)_k = 1 → Σ w^k / k! = e^w
        let r = series(2.5, 2.5, 3.0, 64).unwrap();
        assert!((value(r) - 3f64.exp()).abs() < 1e-15 * 3f64.exp());
    }

    #[test]
    fn cancelling_exponential() {
        // e^{-30} via its alternating Taylor series: needs ~45 extra bits
        let r = series(1.0, 1.0, -30.0, 64).unwrap();
        let v = value(r);
        assert!(((v - (-30f64).exp()) / (-30f64).exp()).abs() < 1e-14, "{v}");
    }

    #[test]
    fn terminating_polynomial() {
        // 1F1(-2; 1; w) = 1 - 2w + w²/2 (Laguerre L2)
        let w = 0.75;
        let r = series(-2.0, 1.0, w, 64).unwrap();
        assert!((value(r) - (1.0 - 2.0 * w + w * w / 2.0)).abs() < 1e-15);
    }
}
