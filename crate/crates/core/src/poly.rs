//! Dense complex polynomials in one variable, ascending coefficient order.

use num_complex::Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    /// coeffs[k] multiplies z^k; trailing exact zeros are trimmed.
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&ZERO) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(ZERO);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![ZERO] }
    }

    pub fn one() -> Self {
        Self { coeffs: vec![ONE] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial z.
    pub fn z() -> Self {
        Self { coeffs: vec![ZERO, ONE] }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Monic product of (z - r) over the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Poly::one();
        for &r in roots {
            p = p.mul(&Poly::new(vec![-r, ONE]));
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    /// Largest coefficient magnitude; scale reference for tolerances.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![ZERO; n];
        for (k, slot) in out.iter_mut().enumerate() {
            if k < self.coeffs.len() {
                *slot += self.coeffs[k];
            }
            if k < other.coeffs.len() {
                *slot += other.coeffs[k];
            }
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(k, &c)| c * Complex64::new(k as f64 + 1.0, 0.0))
                .collect(),
        )
    }

    /// Taylor shift: coefficients of p(z + sigma) in ascending order, i.e.
    /// the Taylor coefficients of p at sigma. Synthetic (Horner) shift.
    pub fn shift(&self, sigma: Complex64) -> Poly {
        let n = self.coeffs.len();
        let mut work = self.coeffs.clone();
        let mut out = vec![ZERO; n];
        for slot in out.iter_mut() {
            // Synthetic division of `work` by (z - sigma): remainder is the
            // next Taylor coefficient.
            let mut rem = ZERO;
            for c in work.iter_mut().rev() {
                let t = *c + rem * sigma;
                rem = t;
                *c = t;
            }
            *slot = work.remove(0);
            if work.is_empty() {
                break;
            }
        }
        Poly::new(out)
    }

    /// Synthetic division by (z - r); the remainder is discarded (use only
    /// when p(r) is known to vanish to within tolerance).
    pub fn deflate(&self, r: Complex64) -> Poly {
        let n = self.coeffs.len();
        if n == 1 {
            return Poly::zero();
        }
        let mut out = vec![ZERO; n - 1];
        let mut carry = ZERO;
        for k in (0..n - 1).rev() {
            carry = self.coeffs[k + 1] + carry * r;
            out[k] = carry;
        }
        Poly::new(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn shift_quadratic() {
        // (z + rho)^2 with rho = -1 gives (z - 1)^2 = z^2 - 2z + 1.
        let p = Poly::from_real(&[0.0, 0.0, 1.0]);
        let shifted = p.shift(c(-1.0, 0.0));
        assert_eq!(shifted.coeffs(), &[c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]);
        // Identity shift.
        assert_eq!(p.shift(ZERO), p);
    }

    #[test]
    fn from_roots_and_eval() {
        let p = Poly::from_roots(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert_eq!(p.coeffs(), &[c(-1.0, 0.0), ZERO, c(1.0, 0.0)]);
        assert!((p.eval(c(2.0, 0.0)) - c(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn deflate_inverts_root_multiplication() {
        let q = Poly::from_real(&[2.0, 0.0, 3.0]);
        let r = c(0.5, -0.25);
        let p = q.mul(&Poly::new(vec![-r, ONE]));
        let back = p.deflate(r);
        for (a, b) in back.coeffs().iter().zip(q.coeffs()) {
            assert!((a - b).norm() < 1e-14);
        }
    }
}
