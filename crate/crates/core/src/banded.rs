//! Complex banded LU with partial pivoting (LAPACK gbtrf layout).
//!
//! The mode resolvent matrices are tridiagonal except for 3-point one-sided
//! boundary rows, so kl = ku = 2 covers everything at O(n) cost.

use crate::error::{Error, Result};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Banded matrix with kl sub- and ku super-diagonals.
///
/// Entry (i, j) is stored at data[j * ldab + (kl + ku + i - j)], leaving kl
/// rows of fill space for pivoting.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, data: vec![ZERO; ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i + self.ku < j || j + self.kl < i {
            ZERO
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside band kl={}, ku={}",
            self.kl,
            self.ku
        );
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// y = A x.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] += self.get(i, j) * x[j];
            }
        }
        y
    }

    /// Conjugate transpose as a banded matrix (kl and ku swap).
    pub fn adjoint(&self) -> BandedMatrix {
        let mut out = BandedMatrix::new(self.n, self.ku, self.kl);
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                let v = self.get(i, j);
                if v != ZERO {
                    out.set(j, i, v.conj());
                }
            }
        }
        out
    }

    /// In-place LU factorization with partial pivoting.
    pub fn lu(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let kue = self.kl + self.ku; // effective upper bandwidth after fill
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // Pivot search in column j, rows j..=j+km.
            let mut jp = 0usize;
            let mut best = self.data[self.slot(j, j)].norm();
            for p in 1..=km {
                let v = self.data[self.slot(j + p, j)].norm();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            let piv = self.data[self.slot(j + jp, j)];
            if piv.norm() == 0.0 {
                return Err(Error::Numerical(format!(
                    "banded LU hit a zero pivot at column {j} of {n}"
                )));
            }
            let ju = (j + kue).min(n - 1);
            if jp != 0 {
                for c in j..=ju {
                    let a = self.slot(j, c);
                    let b = self.slot(j + jp, c);
                    self.data.swap(a, b);
                }
            }
            if km > 0 {
                let d = self.data[self.slot(j, j)];
                for p in 1..=km {
                    let s = self.slot(j + p, j);
                    self.data[s] /= d;
                }
                for c in (j + 1)..=ju {
                    let ajc = self.data[self.slot(j, c)];
                    if ajc == ZERO {
                        continue;
                    }
                    for p in 1..=km {
                        let l = self.data[self.slot(j + p, j)];
                        let s = self.slot(j + p, c);
                        self.data[s] -= l * ajc;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, ipiv })
    }
}

/// Factored banded matrix.
#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [Complex64]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let kue = self.m.kl + self.m.ku;
        // L solve with interchanges.
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let km = kl.min(n - 1 - j);
            for i in 1..=km {
                let l = self.m.data[self.m.slot(j + i, j)];
                b[j + i] -= l * b[j];
            }
        }
        // U solve.
        for j in (0..n).rev() {
            let hi = (j + kue).min(n - 1);
            let mut s = b[j];
            for c in (j + 1)..=hi {
                s -= self.m.data[self.m.slot(j, c)] * b[c];
            }
            b[j] = s / self.m.data[self.m.slot(j, j)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_banded_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[5usize, 17, 64] {
            let mut a = BandedMatrix::new(n, 2, 2);
            let mut dense = DMatrix::<Complex64>::zeros(n, n);
            for i in 0..n {
                for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                    let v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let v = if i == j { v + Complex64::new(4.0, 0.0) } else { v };
                    a.set(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let x_true: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut b = a.matvec(&x_true);
            let lu = a.clone().lu().unwrap();
            lu.solve(&mut b);
            for (xa, xb) in b.iter().zip(&x_true) {
                assert!((xa - xb).norm() < 1e-10);
            }
            // Adjoint solve agrees with the dense adjoint.
            let rhs: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let mut y = rhs.clone();
            a.adjoint().lu().unwrap().solve(&mut y);
            let dense_sol = dense
                .adjoint()
                .lu()
                .solve(&nalgebra::DVector::from_vec(rhs))
                .unwrap();
            for (ya, yb) in y.iter().zip(dense_sol.iter()) {
                assert!((ya - yb).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn pivoting_handles_weak_diagonal() {
        // First diagonal entry zero forces an interchange.
        let mut a = BandedMatrix::new(3, 2, 2);
        a.set(0, 0, ZERO);
        a.set(0, 1, Complex64::new(1.0, 0.0));
        a.set(1, 0, Complex64::new(2.0, 0.0));
        a.set(1, 1, Complex64::new(1.0, 0.0));
        a.set(1, 2, Complex64::new(-1.0, 0.0));
        a.set(2, 1, Complex64::new(3.0, 0.0));
        a.set(2, 2, Complex64::new(1.0, 0.0));
        let x_true = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-2.0, 0.5),
            Complex64::new(0.25, 0.0),
        ];
        let mut b = a.matvec(&x_true);
        let lu = a.lu().unwrap();
        lu.solve(&mut b);
        for (xa, xb) in b.iter().zip(&x_true) {
            assert!((xa - xb).norm() < 1e-12);
        }
    }
}
