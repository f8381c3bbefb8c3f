//! Rational functions of one complex variable with factored denominators.
//!
//! The denominator is kept as a monic multiset of roots, never expanded and
//! re-factored, so Laurent expansions at a pole are computed from the known
//! multiplicity instead of by numerical root finding. Coefficients are
//! complex doubles; identity checks downstream are sampling-based.

use crate::poly::{Poly, ONE, ZERO};
use num_complex::Complex64;

/// Tolerance for declaring two denominator roots equal and for cancelling a
/// numerator zero against a denominator root. The admissible spectra keep
/// genuine roots far apart compared to this.
const MERGE_TOL: f64 = 1e-9;

/// num(z) / prod_i (z - root_i)^{m_i}; the denominator is monic.
#[derive(Clone, Debug)]
pub struct RationalFn {
    num: Poly,
    den: Vec<(Complex64, usize)>,
}

impl RationalFn {
    pub fn zero() -> Self {
        Self { num: Poly::zero(), den: Vec::new() }
    }

    pub fn one() -> Self {
        Self { num: Poly::one(), den: Vec::new() }
    }

    pub fn from_poly(p: Poly) -> Self {
        Self { num: p, den: Vec::new() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::from_poly(Poly::constant(c))
    }

    /// num / prod (z - r_i)^{m_i}.
    pub fn new(num: Poly, den: Vec<(Complex64, usize)>) -> Self {
        let mut out = Self { num, den };
        out.normalize();
        out
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den_factors(&self) -> &[(Complex64, usize)] {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// The expanded monic denominator polynomial.
    pub fn den_poly(&self) -> Poly {
        let mut p = Poly::one();
        for &(r, m) in &self.den {
            for _ in 0..m {
                p = p.mul(&Poly::new(vec![-r, ONE]));
            }
        }
        p
    }

    /// Pole order at sigma (0 if regular there).
    pub fn pole_order_at(&self, sigma: Complex64) -> usize {
        self.den
            .iter()
            .find(|(r, _)| (r - sigma).norm() <= MERGE_TOL)
            .map(|&(_, m)| m)
            .unwrap_or(0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut den = ONE;
        for &(r, m) in &self.den {
            den *= (z - r).powu(m as u32);
        }
        self.num.eval(z) / den
    }

    fn sort_den(&mut self) {
        self.den.sort_by(|a, b| {
            (a.0.re, a.0.im)
                .partial_cmp(&(b.0.re, b.0.im))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    }

    /// Merges equal roots, cancels numerator zeros against denominator
    /// roots, and clears the denominator of a zero function.
    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        // Merge duplicate roots.
        self.sort_den();
        let mut merged: Vec<(Complex64, usize)> = Vec::with_capacity(self.den.len());
        for &(r, m) in &self.den {
            if let Some(last) = merged.last_mut() {
                if (last.0 - r).norm() <= MERGE_TOL {
                    last.1 += m;
                    continue;
                }
            }
            merged.push((r, m));
        }
        self.den = merged;
        // Cancel num zeros at den roots.
        let scale = self.num.max_coeff();
        let mut k = 0;
        while k < self.den.len() {
            let (r, mut m) = self.den[k];
            let local = scale * (1.0 + r.norm()).powi(self.num.degree() as i32);
            while m > 0 && self.num.eval(r).norm() <= MERGE_TOL * local.max(1e-300) {
                self.num = self.num.deflate(r);
                m -= 1;
                if self.num.is_zero() {
                    self.den.clear();
                    return;
                }
            }
            if m == 0 {
                self.den.remove(k);
            } else {
                self.den[k].1 = m;
                k += 1;
            }
        }
    }

    pub fn neg(&self) -> Self {
        Self { num: self.num.scale(-ONE), den: self.den.clone() }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.num.scale(c), self.den.clone())
    }

    pub fn add(&self, other: &RationalFn) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        // Least common multiple of the factor multisets.
        let mut lcm: Vec<(Complex64, usize)> = self.den.clone();
        for &(r, m) in &other.den {
            match lcm.iter_mut().find(|(s, _)| (*s - r).norm() <= MERGE_TOL) {
                Some(entry) => entry.1 = entry.1.max(m),
                None => lcm.push((r, m)),
            }
        }
        let cofactor = |den: &[(Complex64, usize)]| -> Poly {
            let mut p = Poly::one();
            for &(r, m) in &lcm {
                let have = den
                    .iter()
                    .find(|(s, _)| (*s - r).norm() <= MERGE_TOL)
                    .map(|&(_, k)| k)
                    .unwrap_or(0);
                for _ in 0..m.saturating_sub(have) {
                    p = p.mul(&Poly::new(vec![-r, ONE]));
                }
            }
            p
        };
        let num = self.num.mul(&cofactor(&self.den)).add(&other.num.mul(&cofactor(&other.den)));
        Self::new(num, lcm)
    }

    pub fn sub(&self, other: &RationalFn) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RationalFn) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut den = self.den.clone();
        den.extend_from_slice(&other.den);
        Self::new(self.num.mul(&other.num), den)
    }

    /// Shift T^rho: z -> z + rho. Numerator coefficients are re-expanded and
    /// denominator roots translate.
    pub fn shift(&self, rho: f64) -> Self {
        let sigma = Complex64::new(rho, 0.0);
        Self {
            num: self.num.shift(sigma),
            den: self.den.iter().map(|&(r, m)| (r - sigma, m)).collect(),
        }
    }

    /// Laurent coefficients c_m at sigma for orders m = -M .. k_max, where M
    /// is the pole order at sigma. Returns (min_order, coefficients).
    ///
    /// With den = (z - sigma)^M * d(z), d(sigma) != 0, the series of num/d at
    /// sigma is divided term by term and shifted down by M.
    pub fn laurent_at(&self, sigma: Complex64, k_max: i32) -> (i32, Vec<Complex64>) {
        if self.is_zero() {
            return (0, vec![ZERO; (k_max + 1).max(1) as usize]);
        }
        let m = self.pole_order_at(sigma) as i32;
        let terms = (k_max + m + 1).max(1) as usize;
        // Taylor coefficients of the numerator at sigma.
        let num_taylor = self.num.shift(sigma);
        let mut a: Vec<Complex64> = num_taylor.coeffs().to_vec();
        a.resize(terms, ZERO);
        // Taylor coefficients of the pole-free denominator part at sigma.
        let mut d = Poly::one();
        for &(r, mm) in &self.den {
            if (r - sigma).norm() <= MERGE_TOL {
                continue;
            }
            for _ in 0..mm {
                d = d.mul(&Poly::new(vec![-r, ONE]));
            }
        }
        let d_taylor = d.shift(sigma);
        let mut b: Vec<Complex64> = d_taylor.coeffs().to_vec();
        b.resize(terms, ZERO);
        debug_assert!(b[0].norm() > 0.0, "pole-free part vanished at sigma");
        // Power-series division c = a / b.
        let mut c = vec![ZERO; terms];
        for k in 0..terms {
            let mut s = a[k];
            for i in 0..k {
                s -= c[i] * b[k - i];
            }
            c[k] = s / b[0];
        }
        (-m, c)
    }

    /// Residue at sigma: Laurent coefficient of (z - sigma)^{-1}.
    pub fn residue_at(&self, sigma: Complex64) -> Complex64 {
        let (min_order, coeffs) = self.laurent_at(sigma, 0);
        let idx = -1 - min_order;
        if idx < 0 {
            ZERO
        } else {
            coeffs.get(idx as usize).copied().unwrap_or(ZERO)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn shift_rational() {
        // 1/z shifted by rho = -1 is 1/(z-1).
        let f = RationalFn::new(Poly::one(), vec![(ZERO, 1)]);
        let g = f.shift(-1.0);
        assert!((g.eval(c(3.0, 0.0)) - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn partial_fraction_residues() {
        // 1/((z-1)(z+1)): residue at +1 is 1/2, at -1 is -1/2.
        let f = RationalFn::new(Poly::one(), vec![(c(1.0, 0.0), 1), (c(-1.0, 0.0), 1)]);
        assert!((f.residue_at(c(1.0, 0.0)) - c(0.5, 0.0)).norm() < 1e-14);
        assert!((f.residue_at(c(-1.0, 0.0)) + c(0.5, 0.0)).norm() < 1e-14);
        assert_eq!(f.residue_at(c(5.0, 0.0)), ZERO);
    }

    #[test]
    fn double_pole_laurent() {
        // 1/z^2 at 0: c_{-2} = 1, everything else 0 up to order 1.
        let f = RationalFn::new(Poly::one(), vec![(ZERO, 2)]);
        let (m0, coeffs) = f.laurent_at(ZERO, 1);
        assert_eq!(m0, -2);
        assert!((coeffs[0] - ONE).norm() < 1e-15);
        assert!(coeffs[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn add_cancels_to_polynomial() {
        // z/(z-1) - 1/(z-1) = 1 after cancellation of the (z-1) factor.
        let a = RationalFn::new(Poly::z(), vec![(c(1.0, 0.0), 1)]);
        let b = RationalFn::new(Poly::one(), vec![(c(1.0, 0.0), 1)]);
        let s = a.sub(&b);
        assert!(s.den_factors().is_empty(), "expected cancellation, got {s:?}");
        assert!((s.eval(c(7.0, 0.0)) - ONE).norm() < 1e-14);
    }

    #[test]
    fn laurent_resums_to_function() {
        // Check re-summation near a pole reproduces the function.
        let f = RationalFn::new(
            Poly::from_real(&[1.0, 2.0]),
            vec![(c(1.0, 0.0), 2), (c(-2.0, 0.0), 1)],
        );
        let sigma = c(1.0, 0.0);
        let (m0, coeffs) = f.laurent_at(sigma, 12);
        let w = c(0.05, 0.03);
        let z = sigma + w;
        let mut acc = ZERO;
        for (k, &ck) in coeffs.iter().enumerate() {
            acc += ck * w.powi(m0 + k as i32);
        }
        assert!((acc - f.eval(z)).norm() < 1e-10 * f.eval(z).norm().max(1.0));
    }

    #[test]
    fn den_roots_reproduce_denominator() {
        let f = RationalFn::new(
            Poly::from_real(&[3.0, 0.0, 1.0]),
            vec![(c(0.5, 0.0), 1), (c(-1.5, 1.0), 2)],
        );
        let dp = f.den_poly();
        for k in 0..8 {
            let z = c(0.3 + k as f64 * 0.77, -0.4 + k as f64 * 0.31);
            let mut prod = ONE;
            for &(r, m) in f.den_factors() {
                prod *= (z - r).powu(m as u32);
            }
            assert!((dp.eval(z) - prod).norm() <= 1e-10 * prod.norm().max(1.0));
        }
    }
}
