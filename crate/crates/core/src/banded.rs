//! Symmetric banded matrices stored by lower diagonals, with Cholesky solves.

use crate::error::{Error, Result};

/// Symmetric `n × n` matrix with half-bandwidth `kd`.
///
/// Row `i` stores `A[i][i-kd..=i]`, so `data[i * (kd + 1) + kd - (i - j)] = A[i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self { n, kd, data: vec![0.0; n * (kd + 1)] }
    }

    pub fn from_diagonal(d: &[f64], kd: usize) -> Self {
        let mut m = Self::zeros(d.len(), kd);
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.kd {
            None
        } else {
            Some(i * (self.kd + 1) + self.kd - (i - j))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Sets both `(i, j)` and `(j, i)`. Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let kd = self.kd;
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(kd);
            let hi = (i + kd).min(self.n - 1);
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.get(i, j) * x[j];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `a·self + b·other`; bandwidth is the larger one.
    pub fn combine(&self, a: f64, other: &SymBand, b: f64) -> SymBand {
        assert_eq!(self.n, other.n);
        let kd = self.kd.max(other.kd);
        let mut out = SymBand::zeros(self.n, kd);
        for i in 0..self.n {
            for j in i.saturating_sub(kd)..=i {
                out.set(i, j, a * self.get(i, j) + b * other.get(i, j));
            }
        }
        out
    }

    /// Principal submatrix on the sorted index list `keep`.
    pub fn restrict(&self, keep: &[usize]) -> SymBand {
        let mut out = SymBand::zeros(keep.len(), self.kd);
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate().take(a + 1) {
                let v = self.get(i, j);
                if v != 0.0 {
                    out.set(a, b, v);
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, kd) = (self.n, self.kd);
        let w = kd + 1;
        let mut l = self.data.clone();
        for j in 0..n {
            let lo = j.saturating_sub(kd);
            let mut d = l[j * w + kd];
            for k in lo..j {
                let v = l[j * w + kd - (j - k)];
                d -= v * v;
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[j * w + kd] = d;
            for i in (j + 1)..(j + kd + 1).min(n) {
                let mut s = l[i * w + kd - (i - j)];
                let lo_i = i.saturating_sub(kd);
                for k in lo_i.max(lo)..j {
                    s -= l[i * w + kd - (i - k)] * l[j * w + kd - (j - k)];
                }
                l[i * w + kd - (i - j)] = s / d;
            }
        }
        Ok(BandCholesky { n, kd, l })
    }
}

/// Lower factor `L` with `A = L Lᵀ`, same storage as [`SymBand`].
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kd, w) = (self.n, self.kd, self.kd + 1);
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(kd)..i {
                s -= self.l[i * w + kd - (i - k)] * b[k];
            }
            b[i] = s / self.l[i * w + kd];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + kd + 1).min(n) {
                s -= self.l[k * w + kd - (k - i)] * b[k];
            }
            b[i] = s / self.l[i * w + kd];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tridiag(n: usize) -> SymBand {
        let mut a = SymBand::zeros(n, 1);
        for i in 0..n {
            a.set(i, i, 2.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn symmetric_access() {
        let mut a = SymBand::zeros(4, 2);
        a.set(3, 1, 5.0);
        assert_eq!(a.get(1, 3), 5.0);
        assert_eq!(a.get(0, 3), 0.0);
        a.add(1, 3, 1.0);
        assert_eq!(a.get(3, 1), 6.0);
    }

    #[test]
    fn solves_laplacian() {
        let a = tridiag(10);
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let b = a.mul(&x);
        let y = a.cholesky().unwrap().solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_indefinite() {
        let mut a = tridiag(5);
        a.set(2, 2, -1.0);
        assert!(matches!(a.cholesky(), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn restrict_drops_rows() {
        let a = tridiag(5);
        let r = a.restrict(&[0, 1, 3, 4]);
        assert_eq!(r.get(1, 2), 0.0);
        assert_eq!(r.get(2, 3), -1.0);
        assert_eq!(r.dim(), 4);
    }

    proptest! {
        #[test]
        fn prop_cholesky_roundtrip(n in 1usize..30, kd in 0usize..4, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut a = SymBand::zeros(n, kd);
            for i in 0..n {
                for j in i.saturating_sub(kd)..i {
                    a.set(i, j, rng.gen_range(-1.0..1.0));
                }
            }
            for i in 0..n {
                a.set(i, i, 2.0 * kd as f64 + 1.0 + rng.gen::<f64>());
            }
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = a.cholesky().unwrap().solve(&a.mul(&x));
            for (p, q) in x.iter().zip(&y) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }
}
