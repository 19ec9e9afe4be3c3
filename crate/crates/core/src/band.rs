//! Banded LU factorization without pivoting.
//!
//! Only used for `I + iτH` with Hermitian `H`: its Hermitian part is the
//! identity, so elimination without pivoting cannot break down.

use crate::fock::C64;

#[derive(Clone, Debug)]
pub(crate) struct BandedLu {
    n: usize,
    lower: usize,
    upper: usize,
    // row-major band storage: entry (i, j) lives at i * width + (j + lower - i)
    data: Vec<C64>,
}

impl BandedLu {
    pub(crate) fn new(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![C64::new(0.0, 0.0); n * (lower + upper + 1)],
        }
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.lower - i)
    }

    /// Overwrites the stored matrix with `entry(i, j)` on the band and factors it.
    /// Returns `false` if a zero pivot was met.
    pub(crate) fn factor_from<F>(&mut self, mut entry: F) -> bool
    where
        F: FnMut(usize, usize) -> C64,
    {
        let n = self.n;
        for i in 0..n {
            let lo = i.saturating_sub(self.lower);
            let hi = (i + self.upper).min(n - 1);
            for j in lo..=hi {
                let k = self.idx(i, j);
                self.data[k] = entry(i, j);
            }
        }
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot == C64::new(0.0, 0.0) {
                return false;
            }
            let row_end = (k + self.lower).min(n - 1);
            let col_end = (k + self.upper).min(n - 1);
            for i in k + 1..=row_end {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                for j in k + 1..=col_end {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        true
    }

    /// Solves `A x = b` in place.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve(&self, b: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let lo = i.saturating_sub(self.lower);
            let mut acc = b[i];
            for k in lo..i {
                acc -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + self.upper).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=hi {
                acc -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn matches_dense_solve() {
        let n = 9;
        let (lower, upper) = (2, 3);
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i > j + lower || j > i + upper {
                C64::new(0.0, 0.0)
            } else if i == j {
                C64::new(4.0 + i as f64, 0.5)
            } else {
                C64::new(0.3 * (i as f64 - j as f64), 0.2 * (i + j) as f64 / n as f64)
            }
        });
        let b = DVector::from_fn(n, |i, _| C64::new(i as f64 - 3.0, 1.0 / (i + 1) as f64));
        let dense = a.clone().lu().solve(&b).unwrap();
        let mut lu = BandedLu::new(n, lower, upper);
        assert!(lu.factor_from(|i, j| a[(i, j)]));
        let mut x: Vec<C64> = b.iter().copied().collect();
        lu.solve(&mut x);
        for (u, v) in x.iter().zip(dense.iter()) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
