use std::f64::consts::PI;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1)) for k = 1..=10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

/// `(ln |Γ(x)|, sign Γ(x))`. Poles return `(+inf, 1)`.
pub fn ln_gamma(x: f64) -> (f64, f64) {
    if x.is_nan() {
        return (f64::NAN, 1.0);
    }
    if x <= 0.0 && x == x.floor() {
        return (f64::INFINITY, 1.0);
    }
    if x < 0.5 {
        // reflection: Γ(x) Γ(1-x) = π / sin(πx)
        let s = (PI * x).sin();
        let (lg, _) = ln_gamma(1.0 - x);
        return ((PI / s.abs()).ln() - lg, s.signum());
    }
    (ln_gamma_positive(x), 1.0)
}

fn ln_gamma_positive(x: f64) -> f64 {
    const SHIFT: f64 = 16.0;
    if x >= SHIFT {
        return stirling(x);
    }
    let mut prod = 1.0;
    let mut y = x;
    while y < SHIFT {
        prod *= y;
        y += 1.0;
    }
    stirling(y) - prod.ln()
}

fn stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in STIRLING {
        series += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// `1 / Γ(x)`, zero at the poles.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    let (lg, s) = ln_gamma(x);
    s * (-lg).exp()
}
