//! Quadrature rules shared by the kernel, special-function and N-D code.

use std::ops::{Add, Mul};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order Gauss–Legendre rule on `[a, b]`.
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<V, F>(&self, a: f64, b: f64, mut f: F) -> V
    where
        V: Add<Output = V> + Mul<f64, Output = V>,
        F: FnMut(f64) -> V,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc: Option<V> = None;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let v = f(mid + half * x) * (w * half);
            acc = Some(match acc {
                None => v,
                Some(s) => s + v,
            });
        }
        acc.expect("rule has nodes")
    }
}

// Gauss–Kronrod 7/15 abscissae and weights (positive half, centre last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// One G7/K15 panel: returns (Kronrod value, |K15 − G7| error estimate).
pub fn gk15<V, F, N>(a: f64, b: f64, f: &mut F, norm: &N) -> (V, f64)
where
    V: Clone + Add<Output = V> + Mul<f64, Output = V>,
    F: FnMut(f64) -> V,
    N: Fn(&V) -> f64,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = fc.clone() * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        let pair = f1 + f2;
        kron = kron + pair.clone() * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let k = kron * half;
    let g = gauss * half;
    let diff = k.clone() + g * -1.0;
    let err = norm(&diff);
    (k, err)
}

/// Globally adaptive G7/K15 on a finite interval. Returns (value, error estimate).
pub fn adaptive<V, F, N>(f: &mut F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_panels: usize, norm: N) -> (V, f64)
where
    V: Clone + Add<Output = V> + Mul<f64, Output = V>,
    F: FnMut(f64) -> V,
    N: Fn(&V) -> f64,
{
    let mut panels: Vec<(f64, f64, V, f64)> = Vec::new();
    let (v, e) = gk15(a, b, f, &norm);
    panels.push((a, b, v, e));
    loop {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        let total = sum_values(&panels);
        if total_err <= abs_tol.max(rel_tol * norm(&total)) || panels.len() >= max_panels {
            return (total, total_err);
        }
        let (idx, _) = panels.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty");
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let pm = 0.5 * (pa + pb);
        let (v1, e1) = gk15(pa, pm, f, &norm);
        let (v2, e2) = gk15(pm, pb, f, &norm);
        panels.push((pa, pm, v1, e1));
        panels.push((pm, pb, v2, e2));
    }
}

fn sum_values<V>(panels: &[(f64, f64, V, f64)]) -> V
where
    V: Clone + Add<Output = V>,
{
    let mut sorted: Vec<&(f64, f64, V, f64)> = panels.iter().collect();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut it = sorted.into_iter();
    let first = it.next().expect("non-empty").2.clone();
    it.fold(first, |acc, p| acc + p.2.clone())
}

/// Composite Simpson rule on uniformly spaced samples. Falls back to a
/// trapezoid correction on the last interval when the count is even.
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let intervals = n - 1;
            let even_part = if intervals % 2 == 0 { intervals } else { intervals - 3 };
            let mut s = values[0] + values[even_part];
            for (i, v) in values.iter().enumerate().take(even_part).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = s * h / 3.0;
            if intervals % 2 == 1 {
                // Simpson 3/8 on the trailing three intervals.
                let k = even_part;
                total += 3.0 * h / 8.0 * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(10);
        // degree 19 is the limit for 10 nodes
        let v: f64 = rule.integrate(0.0, 2.0, |x: f64| x.powi(19));
        let exact = 2f64.powi(20) / 20.0;
        assert!((v - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let (_, w) = gauss_legendre(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let mut f = |x: f64| 1.0 / (1e-4 + x * x);
        let (v, err) = adaptive(&mut f, -1.0, 1.0, 1e-12, 1e-12, 2000, |v: &f64| v.abs());
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((v - exact).abs() / exact < 1e-10, "{v} vs {exact}, err {err}");
    }

    #[test]
    fn simpson_both_parities() {
        for n in [5usize, 6, 101, 102] {
            let h = 1.0 / (n - 1) as f64;
            let vals: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
            assert!((simpson_uniform(&vals, h) - 0.25).abs() < 1e-14, "n={n}");
        }
    }
}
