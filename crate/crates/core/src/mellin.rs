//! Conormal-symbol calculus in the truncated eigenbasis.
//!
//! The principal symbol family is f_0(z) = z^2 - (n-1)z + diag(lambda),
//! its lower-order companion under a conformal warp is
//! f_1(z) = Delta_Y'(0) - H'(0) z, and the recursion
//!
//!   g_0 = 1,   g_l = -(T^{-l} f_0^{-1}) sum_{j<l} (T^{-j} f_{l-j}) g_j
//!
//! produces the meromorphic families feeding the residue operators
//!
//!   (G_sigma^{(l)} u)(x) = x^l * oint x^{-z} g_l(z) Pi_sigma(f_0^{-1} u^)(z) dz.
//!
//! Evaluating the contour integral by residues turns Laurent coefficients
//! into asymptotic terms: the coefficient of (z - sigma)^{-k-1} contributes
//! x^{l - sigma} (log x)^k / k!. Exponents are stored in the x^{-q}
//! convention, q = sigma - l, so indicial-root values are usable verbatim.
//! Only the spans of the resulting spaces are canonical; the jet
//! parametrization fixes one representative normalization.

use crate::cross_section::{BoundaryCondition, Spectrum, WarpData};
use crate::error::{Error, Result};
use crate::poly::{Poly, ONE, ZERO};
use crate::rational::RationalFn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

/// Square matrix of rational functions of z over the flattened eigenbasis.
#[derive(Clone, Debug)]
pub struct RationalMatrix {
    dim: usize,
    /// Row-major entries.
    entries: Vec<RationalFn>,
}

impl RationalMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![RationalFn::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for d in 0..dim {
            *m.entry_mut(d, d) = RationalFn::one();
        }
        m
    }

    pub fn diagonal(entries: Vec<RationalFn>) -> Self {
        let dim = entries.len();
        let mut m = Self::zeros(dim);
        for (d, e) in entries.into_iter().enumerate() {
            *m.entry_mut(d, d) = e;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &RationalFn {
        &self.entries[i * self.dim + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut RationalFn {
        &mut self.entries[i * self.dim + j]
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.entry(i, j).is_zero()))
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }

    /// Entrywise shift T^rho: h(z) -> h(z + rho).
    pub fn shift(&self, rho: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|e| e.shift(rho)).collect() }
    }

    pub fn neg(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|e| e.neg()).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = RationalFn::zero();
                for k in 0..self.dim {
                    let a = self.entry(i, k);
                    let b = other.entry(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.mul(b));
                    }
                }
                *out.entry_mut(i, j) = acc;
            }
        }
        out
    }

    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            let e = self.entry(i, j);
            if e.is_zero() {
                ZERO
            } else {
                e.eval(z)
            }
        })
    }

    /// Largest denominator pole order at sigma across entries.
    pub fn pole_order_at(&self, sigma: Complex64) -> usize {
        self.entries.iter().map(|e| e.pole_order_at(sigma)).max().unwrap_or(0)
    }

    /// Distance from z to the nearest denominator root of any entry.
    pub fn pole_distance(&self, z: Complex64) -> f64 {
        self.entries
            .iter()
            .flat_map(|e| e.den_factors().iter().map(move |&(r, _)| (z - r).norm()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Laurent expansion around sigma up to order `k_max`.
    pub fn laurent_at(&self, sigma: Complex64, k_max: i32) -> MatrixLaurent {
        let m = self.pole_order_at(sigma) as i32;
        let min_order = -m;
        let len = (k_max - min_order + 1).max(0) as usize;
        let mut coeffs = vec![DMatrix::<Complex64>::zeros(self.dim, self.dim); len];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let e = self.entry(i, j);
                if e.is_zero() {
                    continue;
                }
                let (m0, c) = e.laurent_at(sigma, k_max);
                for (k, &ck) in c.iter().enumerate() {
                    let order = m0 + k as i32;
                    if order > k_max {
                        break;
                    }
                    let slot = (order - min_order) as usize;
                    coeffs[slot][(i, j)] = ck;
                }
            }
        }
        MatrixLaurent { sigma, min_order, coeffs }
    }
}

/// Matrix-valued Laurent series around an expansion point, truncated.
#[derive(Clone, Debug)]
pub struct MatrixLaurent {
    pub sigma: Complex64,
    /// Order of the first stored coefficient (-M for a pole of order M).
    pub min_order: i32,
    pub coeffs: Vec<DMatrix<Complex64>>,
}

impl MatrixLaurent {
    pub fn max_order(&self) -> i32 {
        self.min_order + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, order: i32) -> Option<&DMatrix<Complex64>> {
        let idx = order - self.min_order;
        if idx < 0 {
            None
        } else {
            self.coeffs.get(idx as usize)
        }
    }

    /// Pole order: index of the most negative nonzero coefficient.
    pub fn pole_order(&self) -> usize {
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.norm() > 0.0 {
                let order = self.min_order + k as i32;
                return if order < 0 { (-order) as usize } else { 0 };
            }
        }
        0
    }

    /// Principal part: the strictly negative orders.
    pub fn principal_part(&self) -> MatrixLaurent {
        let keep = (-self.min_order).max(0) as usize;
        MatrixLaurent {
            sigma: self.sigma,
            min_order: self.min_order,
            coeffs: self.coeffs.iter().take(keep).cloned().collect(),
        }
    }

    /// Sum of c_m (z - sigma)^m over the stored range.
    pub fn eval(&self, z: Complex64) -> DMatrix<Complex64> {
        let w = z - self.sigma;
        let dim = self.coeffs.first().map(|c| c.nrows()).unwrap_or(0);
        let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
        for (k, c) in self.coeffs.iter().enumerate() {
            let order = self.min_order + k as i32;
            acc += c * w.powi(order);
        }
        acc
    }
}

/// Vector-valued Laurent series around an expansion point.
#[derive(Clone, Debug)]
pub struct VecLaurent {
    pub sigma: Complex64,
    pub min_order: i32,
    pub coeffs: Vec<DVector<Complex64>>,
}

impl VecLaurent {
    pub fn coeff(&self, order: i32) -> Option<&DVector<Complex64>> {
        let idx = order - self.min_order;
        if idx < 0 {
            None
        } else {
            self.coeffs.get(idx as usize)
        }
    }

    pub fn principal_part(&self) -> VecLaurent {
        let keep = (-self.min_order).max(0) as usize;
        VecLaurent {
            sigma: self.sigma,
            min_order: self.min_order,
            coeffs: self.coeffs.iter().take(keep).cloned().collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm() == 0.0)
    }
}

/// Multiplies a matrix Laurent series by a vector Laurent series, keeping
/// orders up to `k_max`.
fn laurent_mat_vec(a: &MatrixLaurent, v: &VecLaurent, k_max: i32) -> VecLaurent {
    let dim = v.coeffs.first().map(|c| c.len()).unwrap_or(0);
    let min_order = a.min_order + v.min_order;
    let len = (k_max - min_order + 1).max(0) as usize;
    let mut coeffs = vec![DVector::<Complex64>::zeros(dim); len];
    for (ka, ca) in a.coeffs.iter().enumerate() {
        let oa = a.min_order + ka as i32;
        for (kv, cv) in v.coeffs.iter().enumerate() {
            let ov = v.min_order + kv as i32;
            let order = oa + ov;
            if order > k_max {
                continue;
            }
            let slot = (order - min_order) as usize;
            coeffs[slot] += ca * cv;
        }
    }
    VecLaurent { sigma: a.sigma, min_order, coeffs }
}

/// One term v * x^{-q} (log x)^k of an asymptotic expansion; the coefficient
/// vector lives in the flattened eigenbasis.
#[derive(Clone, Debug)]
pub struct AsymptoticTerm {
    pub exponent: Complex64,
    pub log_power: usize,
    pub coeff: DVector<Complex64>,
}

/// A finite sum of terms v x^{-q} log^k x; terms with identical (q, k) are
/// merged and zero coefficients pruned.
#[derive(Clone, Debug, Default)]
pub struct AsymptoticFunction {
    terms: Vec<AsymptoticTerm>,
}

const EXP_TOL: f64 = 1e-12;

impl AsymptoticFunction {
    pub fn new(terms: Vec<AsymptoticTerm>) -> Self {
        let mut f = Self { terms };
        f.normalize();
        f
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[AsymptoticTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, term: AsymptoticTerm) {
        self.terms.push(term);
        self.normalize();
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|t| AsymptoticTerm {
                    exponent: t.exponent,
                    log_power: t.log_power,
                    coeff: &t.coeff * c,
                })
                .collect(),
        )
    }

    /// Largest coefficient-vector norm across terms.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max)
    }

    /// The sub-sum of terms with exponent q (within tolerance).
    pub fn part_with_exponent(&self, q: Complex64) -> Self {
        Self::new(
            self.terms.iter().filter(|t| (t.exponent - q).norm() <= EXP_TOL).cloned().collect(),
        )
    }

    fn normalize(&mut self) {
        self.terms.sort_by(|a, b| {
            (a.exponent.re, a.exponent.im, a.log_power)
                .partial_cmp(&(b.exponent.re, b.exponent.im, b.log_power))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut merged: Vec<AsymptoticTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            if let Some(last) = merged.last_mut() {
                if (last.exponent - t.exponent).norm() <= EXP_TOL && last.log_power == t.log_power {
                    last.coeff += &t.coeff;
                    continue;
                }
            }
            merged.push(t);
        }
        let scale = merged.iter().map(|t| t.coeff.norm()).fold(0.0, f64::max);
        merged.retain(|t| t.coeff.norm() > 1e-14 * scale.max(1e-280));
        self.terms = merged;
    }

    /// Evaluates the sum at x > 0 (all coefficients contracted against a
    /// constant direction is not needed; this returns the full vector).
    pub fn eval(&self, x: f64) -> DVector<Complex64> {
        let dim = self.terms.first().map(|t| t.coeff.len()).unwrap_or(0);
        let mut acc = DVector::<Complex64>::zeros(dim);
        let lx = x.ln();
        for t in &self.terms {
            let factor = Complex64::new(x, 0.0).powc(-t.exponent) * lx.powi(t.log_power as i32);
            acc += &t.coeff * factor;
        }
        acc
    }
}

/// Principal (k = 0) and first-order (k = 1) conormal symbols of the reduced
/// Laplacian family in the truncated eigenbasis.
///
/// Boundary rows are already reduced away, so the family is mode-diagonal:
/// f_0 = z^2 - (n-1) z + lambda_d, f_1 = Delta_Y'(0)_d - H'(0) z.
pub fn conormal_f(
    k: usize,
    spectrum: &Spectrum,
    warp: &WarpData,
    _bc: BoundaryCondition,
) -> Result<RationalMatrix> {
    let n = spectrum.n() as f64;
    let modes = spectrum.mode_of_column();
    match k {
        0 => Ok(RationalMatrix::diagonal(
            modes
                .iter()
                .map(|&j| {
                    RationalFn::from_poly(Poly::from_real(&[spectrum.lambda(j), -(n - 1.0), 1.0]))
                })
                .collect(),
        )),
        1 => {
            let h_prime = warp.h_prime0();
            let delta_prime = warp.delta_y_prime0_diag(spectrum);
            Ok(RationalMatrix::diagonal(
                delta_prime
                    .iter()
                    .map(|&d| RationalFn::from_poly(Poly::from_real(&[d, -h_prime])))
                    .collect(),
            ))
        }
        _ => Err(Error::Unsupported(format!(
            "conormal symbols are computed only for k = 0, 1 (got k = {k})"
        ))),
    }
}

/// Inverts the diagonal principal symbol through its factored roots:
/// entry 1/((z - q_j^+)(z - q_j^-)).
///
/// The product f_0 f_0^{-1} = I is verified at 8 seeded sample points.
pub fn invert_f0(f0: &RationalMatrix, spectrum: &Spectrum) -> Result<RationalMatrix> {
    if !f0.is_diagonal() {
        return Err(Error::Unsupported("invert_f0 requires a mode-diagonal family".into()));
    }
    let modes = spectrum.mode_of_column();
    if modes.len() != f0.dim() {
        return Err(Error::Domain("family dimension does not match the spectrum".into()));
    }
    let mut entries = Vec::with_capacity(f0.dim());
    for &j in &modes {
        let (minus, plus) = crate::indicial::indicial_roots(spectrum, j)?;
        let den = if plus.is_double() {
            vec![(plus.value, 2)]
        } else {
            vec![(minus.value, 1), (plus.value, 1)]
        };
        entries.push(RationalFn::new(Poly::one(), den));
    }
    let inv = RationalMatrix::diagonal(entries);

    let mut rng = ChaCha8Rng::seed_from_u64(0x1db7);
    let mut checked = 0;
    while checked < 8 {
        let z = Complex64::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
        if inv.pole_distance(z) < 0.2 {
            continue;
        }
        let prod = f0.eval(z) * inv.eval(z);
        let err = (&prod - DMatrix::<Complex64>::identity(f0.dim(), f0.dim())).norm();
        if err > 1e-10 * prod.norm().max(1.0) {
            return Err(Error::Numerical(format!(
                "f0 * f0^-1 deviates from identity by {err} at z = {z}"
            )));
        }
        checked += 1;
    }
    Ok(inv)
}

/// Runs the conormal recursion up to `ell_max`, with f_k = 0 past the
/// supplied data. Returns [g_0, ..., g_ell_max].
pub fn g_recursion(
    f: &[RationalMatrix],
    spectrum: &Spectrum,
    ell_max: usize,
) -> Result<Vec<RationalMatrix>> {
    if f.is_empty() {
        return Err(Error::Domain("need at least the principal symbol f_0".into()));
    }
    let dim = f[0].dim();
    let f0_inv = invert_f0(&f[0], spectrum)?;
    let mut g: Vec<RationalMatrix> = vec![RationalMatrix::identity(dim)];
    for ell in 1..=ell_max {
        let mut sum = RationalMatrix::zeros(dim);
        for j in 0..ell {
            let k = ell - j;
            if k >= f.len() || f[k].is_zero() {
                continue;
            }
            let term = f[k].shift(-(j as f64)).mul(&g[j]);
            sum = sum.add(&term);
        }
        let g_ell = if sum.is_zero() {
            RationalMatrix::zeros(dim)
        } else {
            f0_inv.shift(-(ell as f64)).neg().mul(&sum)
        };
        g.push(g_ell);
    }
    Ok(g)
}

/// Frobenius norm of sum_{j<=ell} (T^{-j} f_{ell-j}) g_j evaluated at z;
/// vanishes identically for ell >= 1.
pub fn recursion_residual_at(
    f: &[RationalMatrix],
    g: &[RationalMatrix],
    ell: usize,
    z: Complex64,
) -> f64 {
    let dim = f[0].dim();
    let mut acc = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 0..=ell {
        let k = ell - j;
        if k >= f.len() || f[k].is_zero() {
            continue;
        }
        let fk = f[k].eval(z - Complex64::new(j as f64, 0.0));
        acc += fk * g[j].eval(z);
    }
    acc.norm()
}

/// Integer part mu_sigma = [re sigma + mu + gamma - (n+1)/2], clamped at 0.
///
/// An argument within tolerance of a nonnegative integer is rejected: the
/// count of contributing orders would jump there.
pub fn mu_sigma(sigma: Complex64, mu: f64, gamma: f64, n: usize) -> Result<usize> {
    let t = sigma.re + mu + gamma - (n as f64 + 1.0) / 2.0;
    let nearest = t.round();
    if (t - nearest).abs() <= 1e-12 && nearest >= 0.0 {
        return Err(Error::Domain(format!(
            "re sigma + mu + gamma - (n+1)/2 = {t} sits on an integer boundary"
        )));
    }
    Ok(t.floor().max(0.0) as usize)
}

/// The residue operator G_sigma^{(ell)} applied to a Mellin jet.
///
/// `jet[i]` is the i-th derivative of u^ at sigma (a vector in the
/// eigenbasis). The jet must resolve the pole: at least `pole order` entries.
pub fn g_sigma_ell(
    g_ell: &RationalMatrix,
    f0_inv: &RationalMatrix,
    sigma: Complex64,
    ell: usize,
    jet: &[DVector<Complex64>],
) -> Result<AsymptoticFunction> {
    let pole_order = f0_inv.pole_order_at(sigma) as i32;
    if pole_order == 0 {
        return Ok(AsymptoticFunction::zero());
    }
    if (jet.len() as i32) < pole_order {
        return Err(Error::Domain(format!(
            "jet of length {} cannot resolve a pole of order {pole_order}; need at least {pole_order} derivatives",
            jet.len()
        )));
    }
    let dim = f0_inv.dim();
    // Taylor series of u^ at sigma from the jet.
    let mut fact = 1.0;
    let taylor: Vec<DVector<Complex64>> = jet
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i > 0 {
                fact *= i as f64;
            }
            v / Complex64::new(fact, 0.0)
        })
        .collect();
    let u_series = VecLaurent { sigma, min_order: 0, coeffs: taylor };

    // Pi_sigma(f0^{-1} u^): principal part of the product.
    let f0_series = f0_inv.laurent_at(sigma, 0);
    let p = laurent_mat_vec(&f0_series, &u_series, -1).principal_part();
    if p.is_zero() {
        return Ok(AsymptoticFunction::zero());
    }

    // Multiply by g_ell, which may itself be singular at sigma.
    let g_series = g_ell.laurent_at(sigma, pole_order - 1);
    let product = laurent_mat_vec(&g_series, &p, -1);

    // Coefficient of (z - sigma)^{-k-1} feeds x^{ell - sigma} (log x)^k / k!.
    let mut terms = Vec::new();
    let exponent = sigma - Complex64::new(ell as f64, 0.0);
    let mut k_fact = 1.0;
    let max_k = (-product.min_order - 1).max(-1);
    for k in 0..=max_k {
        if k > 0 {
            k_fact *= k as f64;
        }
        if let Some(c) = product.coeff(-k - 1) {
            terms.push(AsymptoticTerm {
                exponent,
                log_power: k as usize,
                coeff: c / Complex64::new(k_fact, 0.0),
            });
        }
    }
    let _ = dim;
    Ok(AsymptoticFunction::new(terms))
}

/// Everything the asymptotics machinery needs about one configuration.
#[derive(Clone, Debug)]
pub struct ConormalData {
    pub spectrum: Spectrum,
    pub warp: WarpData,
    pub bc: BoundaryCondition,
}

impl ConormalData {
    pub fn new(spectrum: Spectrum, warp: WarpData, bc: BoundaryCondition) -> Self {
        Self { spectrum, warp, bc }
    }

    pub fn f_families(&self) -> Result<Vec<RationalMatrix>> {
        Ok(vec![
            conormal_f(0, &self.spectrum, &self.warp, self.bc)?,
            conormal_f(1, &self.spectrum, &self.warp, self.bc)?,
        ])
    }
}

/// Output of `f_sigma`: bases of F_sigma (full operator) and F^_sigma
/// (model cone) over a common jet basis, and the theta map between them.
#[derive(Clone, Debug)]
pub struct FSigmaData {
    pub sigma: Complex64,
    pub mu_sigma: usize,
    /// Basis of F_sigma: images of the retained jets under G_sigma.
    pub f_basis: Vec<AsymptoticFunction>,
    /// Basis of F^_sigma: images of the same jets under G_sigma^{(0)}.
    pub fhat_basis: Vec<AsymptoticFunction>,
    /// Matrix of the theta images in the canonical atom basis at exponent
    /// sigma (rows: (log_power, basis column) atoms; columns: basis index).
    pub theta: DMatrix<Complex64>,
}

/// Atom coordinates of an asymptotic function over a fixed key list.
fn atom_coords(
    f: &AsymptoticFunction,
    keys: &[(Complex64, usize, usize)],
) -> DVector<Complex64> {
    let mut v = DVector::<Complex64>::zeros(keys.len());
    for t in f.terms() {
        for (d, &c) in t.coeff.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let idx = keys
                .iter()
                .position(|&(q, k, col)| (q - t.exponent).norm() <= EXP_TOL && k == t.log_power && col == d)
                .expect("atom key missing");
            v[idx] = c;
        }
    }
    v
}

fn collect_atom_keys(funcs: &[AsymptoticFunction]) -> Vec<(Complex64, usize, usize)> {
    let mut keys: Vec<(Complex64, usize, usize)> = Vec::new();
    for f in funcs {
        for t in f.terms() {
            for (d, &c) in t.coeff.iter().enumerate() {
                if c.norm() == 0.0 {
                    continue;
                }
                if !keys
                    .iter()
                    .any(|&(q, k, col)| (q - t.exponent).norm() <= EXP_TOL && k == t.log_power && col == d)
                {
                    keys.push((t.exponent, t.log_power, d));
                }
            }
        }
    }
    keys.sort_by(|a, b| {
        (a.0.re, a.0.im, a.1, a.2)
            .partial_cmp(&(b.0.re, b.0.im, b.1, b.2))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    keys
}

/// Greedy rank selection: returns indices whose atom vectors are linearly
/// independent at relative tolerance 1e-10.
fn independent_subset(vectors: &[DVector<Complex64>]) -> Vec<usize> {
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut kept = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let scale = v.norm();
        if scale <= 1e-13 {
            continue;
        }
        let mut r = v.clone();
        for b in &basis {
            let proj = b.dotc(&r);
            r -= b * proj;
        }
        if r.norm() > 1e-10 * scale {
            basis.push(&r / Complex64::new(r.norm(), 0.0));
            kept.push(i);
        }
    }
    kept
}

/// Builds bases of F_sigma and F^_sigma over a saturating jet basis and the
/// theta map "drop the higher Taylor corrections" between them.
pub fn f_sigma(data: &ConormalData, sigma: Complex64, gamma: f64) -> Result<FSigmaData> {
    let spectrum = &data.spectrum;
    let f = data.f_families()?;
    let f0_inv = invert_f0(&f[0], spectrum)?;
    let pole_order = f0_inv.pole_order_at(sigma);
    let mu_s = mu_sigma(sigma, 2.0, gamma, spectrum.n())?;
    if pole_order == 0 {
        return Ok(FSigmaData {
            sigma,
            mu_sigma: mu_s,
            f_basis: Vec::new(),
            fhat_basis: Vec::new(),
            theta: DMatrix::zeros(0, 0),
        });
    }
    let g = g_recursion(&f, spectrum, mu_s)?;

    // Jet directions: columns of eigenspaces whose entry is singular at
    // sigma; jet length saturates the range.
    let dim = f0_inv.dim();
    let singular_cols: Vec<usize> =
        (0..dim).filter(|&d| f0_inv.entry(d, d).pole_order_at(sigma) > 0).collect();
    let jet_len = pole_order + mu_s + 1;

    let mut f_images = Vec::new();
    let mut fhat_images = Vec::new();
    for &col in &singular_cols {
        for order in 0..jet_len {
            let mut jet = vec![DVector::<Complex64>::zeros(dim); jet_len];
            jet[order][col] = ONE;
            let mut full = AsymptoticFunction::zero();
            for (ell, g_ell) in g.iter().enumerate() {
                full = full.add(&g_sigma_ell(g_ell, &f0_inv, sigma, ell, &jet)?);
            }
            let hat = g_sigma_ell(&g[0], &f0_inv, sigma, 0, &jet)?;
            f_images.push(full);
            fhat_images.push(hat);
        }
    }

    let keys = collect_atom_keys(&f_images);
    let coords: Vec<DVector<Complex64>> = f_images.iter().map(|f| atom_coords(f, &keys)).collect();
    let kept = independent_subset(&coords);

    let expected: usize = singular_cols.len() * pole_order;
    if kept.len() != expected {
        return Err(Error::Numerical(format!(
            "rank of G_sigma jet images is {} but {expected} was expected at sigma = {sigma}",
            kept.len()
        )));
    }

    let f_basis: Vec<AsymptoticFunction> = kept.iter().map(|&i| f_images[i].clone()).collect();
    let fhat_basis: Vec<AsymptoticFunction> = kept.iter().map(|&i| fhat_images[i].clone()).collect();

    // Theta images in the atom basis at exponent sigma.
    let hat_keys = collect_atom_keys(&fhat_basis);
    let hat_coords: Vec<DVector<Complex64>> =
        fhat_basis.iter().map(|f| atom_coords(f, &hat_keys)).collect();
    if independent_subset(&hat_coords).len() != fhat_basis.len() {
        return Err(Error::Numerical(format!(
            "theta is rank-deficient at sigma = {sigma}: the model-cone images of a jet basis are dependent"
        )));
    }
    let theta = DMatrix::from_fn(hat_keys.len(), fhat_basis.len(), |i, j| hat_coords[j][i]);

    Ok(FSigmaData { sigma, mu_sigma: mu_s, f_basis, fhat_basis, theta })
}

/// Applies the model-cone operator termwise and returns the exact residual.
///
/// A^ (v x^{-q} log^k x) = x^{-q-2} sum_i C(k,i) (-1)^i f_0^{(i)}(q) v
/// log^{k-i} x, so members of ker f_0-chains map to zero.
pub fn kernel_check(asym: &AsymptoticFunction, spectrum: &Spectrum) -> AsymptoticFunction {
    let n = spectrum.n() as f64;
    let modes = spectrum.mode_of_column();
    let dim = modes.len();
    let mut out_terms = Vec::new();
    for t in asym.terms() {
        let q = t.exponent;
        // f_0(q), f_0'(q), f_0''(q) per basis column.
        let evals: Vec<[Complex64; 3]> = modes
            .iter()
            .map(|&j| {
                let lam = Complex64::new(spectrum.lambda(j), 0.0);
                let nm1 = Complex64::new(n - 1.0, 0.0);
                [q * q - nm1 * q + lam, q * 2.0 - nm1, Complex64::new(2.0, 0.0)]
            })
            .collect();
        let mut binom = 1.0;
        for i in 0..=t.log_power.min(2) {
            if i > 0 {
                binom *= (t.log_power - i + 1) as f64 / i as f64;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut coeff = DVector::<Complex64>::zeros(dim);
            for d in 0..dim {
                coeff[d] = t.coeff[d] * evals[d][i] * Complex64::new(binom * sign, 0.0);
            }
            out_terms.push(AsymptoticTerm {
                exponent: q + Complex64::new(2.0, 0.0),
                log_power: t.log_power - i,
                coeff,
            });
        }
    }
    AsymptoticFunction::new(out_terms)
}

/// Seeded off-pole sample points for rational identity checks.
pub fn sample_points_off_poles(
    families: &[&RationalMatrix],
    count: usize,
    seed: u64,
) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let z = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        if families.iter().all(|f| f.pole_distance(z) > 0.15) {
            points.push(z);
        }
    }
    points
}
