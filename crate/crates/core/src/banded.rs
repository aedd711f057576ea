//! Banded matrices and their LU factorization with partial pivoting.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// `n × n` matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage is row-major with each row holding columns `i-kl ..= i+ku+kl`;
/// the extra `kl` columns on the right receive fill-in during pivoting.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku + self.kl || j >= self.n {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map(|s| self.data[s]).unwrap_or(0.0)
    }

    /// Panics if `(i, j)` lies outside the declared band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        let s = self.slot(i, j).expect("inside band");
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        let s = self.slot(i, j).expect("inside band");
        self.data[s] += v;
    }

    pub fn columns(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.columns(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// `a·self + b·I`
    pub fn scaled_plus_identity(&self, a: f64, b: f64) -> Self {
        let mut m = Self::zeros(self.n, self.kl, self.ku);
        for i in 0..self.n {
            for j in self.columns(i) {
                m.set(i, j, a * self.get(i, j));
            }
            m.add(i, i, b);
        }
        m
    }

    /// Column sums, i.e. row sums of the transpose.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for i in 0..self.n {
            for j in self.columns(i) {
                s[j] += self.get(i, j);
            }
        }
        s
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self.clone())
    }
}

/// `P·A = L·U` for a band matrix; `U` has `kl + ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    fn factor(mut m: BandMatrix) -> Result<Self> {
        let n = m.n;
        let kl = m.kl;
        let reach = m.ku + m.kl;
        let scale = m.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = m.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = m.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= f64::EPSILON * scale * 1e-3 || best == 0.0 {
                return Err(Error::SingularMatrix { row: k });
            }
            pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = m.get(k, j);
                    let b = m.get(p, j);
                    let sk = m.slot(k, j).expect("band");
                    let sp = m.slot(p, j).expect("band");
                    m.data[sk] = b;
                    m.data[sp] = a;
                }
            }
            let pivot = m.get(k, k);
            for i in k + 1..=last_row {
                let si = m.slot(i, k).expect("band");
                let l = m.data[si] / pivot;
                m.data[si] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let u = m.get(k, j);
                        if let Some(s) = m.slot(i, j) {
                            m.data[s] -= l * u;
                        }
                    }
                }
            }
        }
        Ok(Self { m, pivots })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let reach = self.m.ku + kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.m.get(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= self.m.get(k, j) * b[j];
            }
            b[k] = s / self.m.get(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn sample(n: usize) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, 2, 2);
        for i in 0..n {
            for j in m.columns(i) {
                // small diagonal forces pivoting
                let v = ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 0.01 } else { 0.0 };
                m.set(i, j, v);
            }
        }
        m
    }

    #[test]
    fn solve_matches_dense() {
        let n = 40;
        let m = sample(n);
        let dense = DMatrix::from_fn(n, n, |i, j| m.get(i, j));
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let exact = dense.lu().solve(&DVector::from_column_slice(&rhs)).unwrap();
        let mut x = rhs.clone();
        m.lu().unwrap().solve_in_place(&mut x);
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-9 * exact.amax(), "{i}");
        }
        let back = m.matvec(&x);
        for i in 0..n {
            assert!((back[i] - rhs[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_is_reported() {
        let m = BandMatrix::zeros(5, 1, 1);
        assert!(matches!(m.lu(), Err(Error::SingularMatrix { row: 0 })));
    }
}
