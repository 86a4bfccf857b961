//! Banded LU factorization without pivoting, for the M-matrices produced by
//! frozen policies. Nonsingular M-matrices admit this factorization with
//! positive pivots and no fill outside the band.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// In-place `A = LU` with unit lower `L`.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        for k in 0..n {
            let pivot = self.data[k * w + kl];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::invalid("linear system", format!("zero pivot in row {k}")));
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let ik = i * w + (k + kl - i);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let src = self.data[k * w + (j + kl - k)];
                    self.data[i * w + (j + kl - i)] -= l * src;
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let BandMatrix { n, kl, ku, ref data } = self.m;
        let w = kl + ku + 1;
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(kl)..i {
                s -= data[i * w + (j + kl - i)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + ku).min(n - 1) {
                s -= data[i * w + (j + kl - i)] * x[j];
            }
            x[i] = s / data[i * w + kl];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve_on_random_m_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, kl, ku) = (40, 5, 3);
        let mut band = BandMatrix::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            let mut off = 0.0;
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                if j != i {
                    let v = -rng.gen_range(0.0..1.0);
                    band.add(i, j, v);
                    dense[(i, j)] = v;
                    off -= v;
                }
            }
            let d = off + rng.gen_range(0.01..0.5);
            band.add(i, i, d);
            dense[(i, i)] = d;
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = dense.lu().solve(&DVector::from_vec(rhs.clone())).unwrap();
        let mut x = rhs;
        band.factor().unwrap().solve_in_place(&mut x);
        for i in 0..n {
            assert!((x[i] - oracle[i]).abs() < 1e-11, "{i}: {} vs {}", x[i], oracle[i]);
        }
    }

    #[test]
    fn zero_pivot_is_an_error() {
        let band = BandMatrix::zeros(3, 1, 1);
        assert!(band.factor().is_err());
    }
}
