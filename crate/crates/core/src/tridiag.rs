//! Eigenvalues of real symmetric tridiagonal matrices by Sturm bisection.
//!
//! Only eigenvalues are computed, which keeps the finite-difference spectrum
//! oracle cheap at a few thousand grid points. The Sturm count is the number
//! of sign agreements in the LDLᵀ recurrence, i.e. the number of eigenvalues
//! strictly below a shift.

/// Symmetric tridiagonal matrix: `diag` of length n, `off` of length n-1.
#[derive(Clone, Debug)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length mismatch");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly less than `x` (Sturm count).
    fn count_below(&self, x: f64) -> usize {
        let n = self.dim();
        let mut count = 0usize;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let e2 = self.off[i - 1] * self.off[i - 1];
            // Guard against exact zero pivots; the standard perturbation
            // keeps the count consistent.
            if q == 0.0 {
                q = f64::MIN_POSITIVE.sqrt();
            }
            q = self.diag[i] - x - e2 / q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin bounds on the spectrum.
    fn bounds(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i < n - 1 {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k` largest eigenvalues, in nonincreasing order.
    ///
    /// Each eigenvalue is bracketed by bisection on the Sturm count until the
    /// bracket width drops below `tol` (absolute) relative to the spectral
    /// diameter.
    pub fn largest_eigenvalues(&self, k: usize) -> Vec<f64> {
        let n = self.dim();
        assert!(k <= n, "requested more eigenvalues than the dimension");
        let (lo0, hi0) = self.bounds();
        let pad = 1e-12 * (hi0 - lo0).abs().max(1.0);
        let mut out = Vec::with_capacity(k);
        for idx in 0..k {
            // The (idx+1)-th largest eigenvalue lambda satisfies
            // count_below(lambda) = n - idx - 1 just below it.
            let target = n - idx - 1;
            let mut lo = lo0 - pad;
            let mut hi = hi0 + pad;
            // Bisect to floating-point resolution; the midpoint stalls at
            // the ulp scale regardless of the spectral diameter.
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let t = SymTridiag::new(vec![3.0, -1.0, 2.0], vec![0.0, 0.0]);
        let ev = t.largest_eigenvalues(3);
        assert!((ev[0] - 3.0).abs() < 1e-12);
        assert!((ev[1] - 2.0).abs() < 1e-12);
        assert!((ev[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_known_2x2() {
        // [[0, 1], [1, 0]] has eigenvalues +-1.
        let t = SymTridiag::new(vec![0.0, 0.0], vec![1.0]);
        let ev = t.largest_eigenvalues(2);
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_laplacian_closed_form() {
        // -(d/dy)^2 on [0, pi] with Dirichlet ends, h = pi/(n+1):
        // discrete eigenvalues are -(4/h^2) sin^2(j h / 2).
        let n = 200usize;
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let t = SymTridiag::new(vec![-2.0 / (h * h); n], vec![1.0 / (h * h); n - 1]);
        let ev = t.largest_eigenvalues(3);
        for (j, lam) in ev.iter().enumerate() {
            let exact = -(4.0 / (h * h)) * ((j as f64 + 1.0) * h / 2.0).sin().powi(2);
            assert!((lam - exact).abs() < 1e-8 * (1.0 + exact.abs()), "j={j}");
        }
    }
}
