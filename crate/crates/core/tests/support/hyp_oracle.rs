//! Reference `₁F₁(a; b; z)` from the untransformed power series summed in
//! exact fixed-point integer arithmetic.
//!
//! `a`, `b`, `z` are binary floats, hence exact dyadic rationals, so every
//! term ratio is an exact integer fraction. The only rounding is one integer
//! truncation per term. The working precision is sized from a first pass
//! that locates the largest term and the magnitude of the result, and the
//! value is accepted only when two runs at different precisions agree.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

fn dyadic(v: f64) -> (BigInt, u64) {
    // v = n / 2^s with s >= 0
    if v == 0.0 {
        return (BigInt::zero(), 0);
    }
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let mut n = BigInt::from(mant);
    if v < 0.0 {
        n = -n;
    }
    if e >= 0 {
        (n << e as usize, 0)
    } else {
        (n, (-e) as u64)
    }
}

fn to_f64_scaled(v: &BigInt, frac_bits: u64) -> f64 {
    let len = v.bits();
    let shift = len.saturating_sub(60);
    let m = (v >> shift as usize).to_f64().unwrap();
    m * 2f64.powf(shift as f64 - frac_bits as f64)
}

fn sum_at(a: f64, b: f64, z: f64, frac_bits: u64, max_terms: usize) -> f64 {
    let (an, ash) = dyadic(a);
    let (bn, bsh) = dyadic(b);
    let (zn, zsh) = dyadic(z);
    // ratio_k = (a + k)(z) / ((b + k)(k + 1)) with a = an/2^ash etc.
    // = (an + k 2^ash) zn 2^bsh / ((bn + k 2^bsh) (k+1) 2^ash 2^zsh)
    let one_a = BigInt::from(1u8) << ash as usize;
    let one_b = BigInt::from(1u8) << bsh as usize;
    let mut term = BigInt::from(1u8) << frac_bits as usize;
    let mut sum = term.clone();
    let mut num_a = an.clone();
    let mut den_b = bn.clone();
    for k in 0..max_terms {
        if num_a.is_zero() {
            break;
        }
        let num = &term * &num_a * &zn * &one_b;
        let den = (&den_b * BigInt::from(k as u64 + 1) * &one_a) << zsh as usize;
        term = num / den;
        if term.is_zero() && (k as f64) > z.abs() + a.abs() + b.abs() {
            break;
        }
        sum += &term;
        num_a += &one_a;
        den_b += &one_b;
    }
    if sum.is_zero() {
        return 0.0;
    }
    let s = to_f64_scaled(&sum.abs(), frac_bits);
    if sum.is_negative() {
        -s
    } else {
        s
    }
}

/// Largest |term| (log2) and number of terms needed, from an f64 log pass.
fn survey(a: f64, b: f64, z: f64) -> (f64, usize) {
    let mut log_t = 0.0f64;
    let mut log_max = 0.0f64;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        if a + kf == 0.0 {
            return (log_max, k + 1);
        }
        log_t += ((a + kf) * z / ((b + kf) * (kf + 1.0))).abs().log2();
        log_max = log_max.max(log_t);
        k += 1;
        if kf > z.abs() + a.abs() + b.abs() && log_t < log_max - 200.0 && log_t < -200.0 {
            return (log_max, k + 10);
        }
    }
}

/// Reference value to about 1e-15 relative, or `None` if two precisions
/// disagree beyond 1e-14.
pub fn reference_1f1(a: f64, b: f64, z: f64) -> Option<f64> {
    let (log_max, terms) = survey(a, b, z);
    let guard = 96 + (terms as f64).log2().ceil() as u64;
    let first_bits = log_max.max(0.0).ceil() as u64 + guard;
    let rough = sum_at(a, b, z, first_bits, terms * 2);
    let result_log = if rough != 0.0 { rough.abs().log2().min(0.0) } else { -(first_bits as f64) };
    let bits = first_bits + (-result_log).ceil() as u64 + 16;
    let v1 = sum_at(a, b, z, bits, terms * 2);
    let v2 = sum_at(a, b, z, bits + 64, terms * 2);
    if v2 == 0.0 || ((v1 - v2) / v2).abs() > 1e-14 {
        return None;
    }
    Some(v2)
}
