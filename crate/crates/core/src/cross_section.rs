//! Spectral data of the cross-section Y.
//!
//! Everything downstream (indicial roots, conormal symbols, extension
//! choices, per-mode resolvent solves) consumes a `Spectrum`: the ordered
//! eigenvalues of the cross-section Laplacian together with multiplicities.
//! The sign convention is the analyst's nonpositive Laplacian, so a Neumann
//! spectrum starts at 0 and a Dirichlet spectrum starts strictly below 0.

use crate::error::{Error, Result};
use crate::tridiag::SymTridiag;
use serde::{Deserialize, Serialize};

/// Boundary condition imposed on the cross-section (and on the wedge faces).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

impl std::fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Dirichlet => write!(f, "dirichlet"),
            BoundaryCondition::Neumann => write!(f, "neumann"),
        }
    }
}

/// How the cross-section is described.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CrossSectionKind {
    /// An interval [0, L]; eigendata in closed form. Forces n = 1.
    IntervalAnalytic { length: f64 },
    /// Explicit nonpositive eigenvalues with multiplicities (any n >= 1).
    Tabulated { eigenvalues: Vec<f64>, multiplicities: Vec<usize> },
    /// Interval discretized by finite differences; the brute-force oracle.
    FdOracle { length: f64, gridpoints: usize },
}

/// A cross-section together with its dimension, boundary condition and
/// conformal warp data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossSection {
    pub kind: CrossSectionKind,
    pub n: usize,
    pub bc: BoundaryCondition,
    pub warp: WarpData,
}

impl CrossSection {
    pub fn new(kind: CrossSectionKind, n: usize, bc: BoundaryCondition, warp: WarpData) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("cross-section dimension n must be >= 1".into()));
        }
        match &kind {
            CrossSectionKind::IntervalAnalytic { length } | CrossSectionKind::FdOracle { length, .. } => {
                if *length <= 0.0 {
                    return Err(Error::Domain(format!("interval length must be positive, got {length}")));
                }
                if n != 1 {
                    return Err(Error::Domain("interval cross-sections are one-dimensional".into()));
                }
            }
            CrossSectionKind::Tabulated { eigenvalues, multiplicities } => {
                if eigenvalues.len() != multiplicities.len() {
                    return Err(Error::Domain("eigenvalues and multiplicities differ in length".into()));
                }
            }
        }
        Ok(Self { kind, n, bc, warp })
    }

    /// The spectrum carried by this cross-section, truncated to `j_max` modes.
    pub fn spectrum(&self, j_max: usize) -> Result<Spectrum> {
        match &self.kind {
            CrossSectionKind::IntervalAnalytic { length } => interval_spectrum(*length, self.bc, j_max),
            CrossSectionKind::FdOracle { length, gridpoints } => {
                fd_spectrum(*length, self.bc, *gridpoints, j_max)
            }
            CrossSectionKind::Tabulated { eigenvalues, multiplicities } => Spectrum::tabulated(
                self.n,
                self.bc,
                eigenvalues.iter().copied().take(j_max).collect(),
                multiplicities.iter().copied().take(j_max).collect(),
            ),
        }
    }
}

/// One spectral entry: eigenvalue, multiplicity and its mode index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub mode: usize,
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Ordered cross-section spectrum. Eigenvalues are nonincreasing and
/// nonpositive; eigenspaces are represented by coordinate blocks per mode
/// in an L2(Y)-orthonormal eigenbasis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    entries: Vec<SpectrumEntry>,
    n: usize,
    bc: BoundaryCondition,
}

impl Spectrum {
    /// Builds a spectrum from raw data, enforcing the ordering and sign
    /// invariants and the bc-dependent constraint on the first eigenvalue.
    pub fn tabulated(
        n: usize,
        bc: BoundaryCondition,
        eigenvalues: Vec<f64>,
        multiplicities: Vec<usize>,
    ) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("spectrum dimension n must be >= 1".into()));
        }
        if eigenvalues.is_empty() {
            return Err(Error::Domain("spectrum must contain at least one eigenvalue".into()));
        }
        if eigenvalues.len() != multiplicities.len() {
            return Err(Error::Domain("eigenvalues and multiplicities differ in length".into()));
        }
        for (j, &lam) in eigenvalues.iter().enumerate() {
            if lam > 0.0 {
                return Err(Error::Domain(format!(
                    "eigenvalue lambda_{j} = {lam} is positive; the cross-section Laplacian is nonpositive"
                )));
            }
            if j > 0 && lam > eigenvalues[j - 1] + 1e-14 {
                return Err(Error::Domain(format!(
                    "eigenvalues must be nonincreasing; lambda_{j} = {lam} exceeds lambda_{} = {}",
                    j - 1,
                    eigenvalues[j - 1]
                )));
            }
        }
        match bc {
            BoundaryCondition::Neumann => {
                if eigenvalues[0].abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "Neumann spectrum must start at lambda_0 = 0, got {}",
                        eigenvalues[0]
                    )));
                }
            }
            BoundaryCondition::Dirichlet => {
                if eigenvalues[0] >= 0.0 {
                    return Err(Error::Domain(format!(
                        "Dirichlet spectrum must start at lambda_0 < 0, got {}",
                        eigenvalues[0]
                    )));
                }
            }
        }
        if multiplicities.contains(&0) {
            return Err(Error::Domain("multiplicities must be positive".into()));
        }
        let entries = eigenvalues
            .into_iter()
            .zip(multiplicities)
            .enumerate()
            .map(|(mode, (lambda, multiplicity))| SpectrumEntry { mode, lambda, multiplicity })
            .collect();
        Ok(Self { entries, n, bc })
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    pub fn modes(&self) -> usize {
        self.entries.len()
    }

    pub fn lambda(&self, mode: usize) -> f64 {
        self.entries[mode].lambda
    }

    pub fn multiplicity(&self, mode: usize) -> usize {
        self.entries[mode].multiplicity
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    /// Total dimension of the truncated eigenbasis (sum of multiplicities).
    pub fn basis_dim(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Offset of each mode's coordinate block in the flattened eigenbasis.
    pub fn mode_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.entries.len());
        let mut off = 0;
        for e in &self.entries {
            offsets.push(off);
            off += e.multiplicity;
        }
        offsets
    }

    /// Mode index owning each flattened basis column.
    pub fn mode_of_column(&self) -> Vec<usize> {
        let mut modes = Vec::with_capacity(self.basis_dim());
        for e in &self.entries {
            for _ in 0..e.multiplicity {
                modes.push(e.mode);
            }
        }
        modes
    }
}

/// Metric-warp derivatives at the tip for the conformal family
/// h(x) = phi(x)^2 h(0) with phi(0) = 1.
///
/// H(0) = 0 always: 2H(x) = x d/dx log det h(x) carries the factor x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpData {
    /// phi'(0), the conformal warp derivative.
    pub phi_prime0: f64,
    /// Cross-section dimension, fixing H'(0) = n phi'(0).
    pub n: usize,
}

impl WarpData {
    pub fn unwarped(n: usize) -> Self {
        Self { phi_prime0: 0.0, n }
    }

    /// H'(0) = n phi'(0).
    pub fn h_prime0(&self) -> f64 {
        self.n as f64 * self.phi_prime0
    }

    /// Diagonal of Delta_Y'(0) in the eigenbasis: -2 phi'(0) lambda_j per
    /// flattened basis column. Exact for conformal 1-D warps; adopted as the
    /// model for n > 1.
    pub fn delta_y_prime0_diag(&self, spectrum: &Spectrum) -> Vec<f64> {
        spectrum
            .mode_of_column()
            .iter()
            .map(|&j| -2.0 * self.phi_prime0 * spectrum.lambda(j))
            .collect()
    }
}

/// Closed-form eigenvalues of d^2/dy^2 on [0, L].
///
/// Neumann: lambda_j = -(j pi / L)^2, j = 0..J-1 (cos(j pi y / L)).
/// Dirichlet: lambda_j = -((j+1) pi / L)^2, j = 0..J-1 (sin((j+1) pi y / L)).
pub fn interval_spectrum(length: f64, bc: BoundaryCondition, j_max: usize) -> Result<Spectrum> {
    if length <= 0.0 {
        return Err(Error::Domain(format!("interval length must be positive, got {length}")));
    }
    if j_max < 1 {
        return Err(Error::Domain("need at least one mode".into()));
    }
    let eigenvalues: Vec<f64> = (0..j_max)
        .map(|j| {
            let k = match bc {
                BoundaryCondition::Neumann => j as f64,
                BoundaryCondition::Dirichlet => j as f64 + 1.0,
            };
            -(k * std::f64::consts::PI / length).powi(2)
        })
        .collect();
    Spectrum::tabulated(1, bc, eigenvalues, vec![1; j_max])
}

/// Finite-difference spectrum of d^2/dy^2 on [0, L]: the independent
/// brute-force oracle for `interval_spectrum`.
///
/// Second-order central differences; Neumann ends use ghost-point reflection
/// so the constant mode stays exactly in the kernel. Agreement with the
/// analytic spectrum is O(h^2).
pub fn fd_spectrum(
    length: f64,
    bc: BoundaryCondition,
    gridpoints: usize,
    j_max: usize,
) -> Result<Spectrum> {
    if length <= 0.0 {
        return Err(Error::Domain(format!("interval length must be positive, got {length}")));
    }
    if gridpoints < 16 {
        return Err(Error::Domain(format!("need at least 16 gridpoints, got {gridpoints}")));
    }
    if j_max > gridpoints / 4 {
        return Err(Error::Domain(format!(
            "requested {j_max} modes from {gridpoints} gridpoints; need J <= gridpoints/4"
        )));
    }

    let tri = match bc {
        BoundaryCondition::Dirichlet => {
            // Interior nodes y_i = i h, i = 1..gridpoints-1, h = L/gridpoints.
            let m = gridpoints - 1;
            let h = length / gridpoints as f64;
            let inv_h2 = 1.0 / (h * h);
            SymTridiag::new(vec![-2.0 * inv_h2; m], vec![inv_h2; m - 1])
        }
        BoundaryCondition::Neumann => {
            // Nodes y_i = i h, i = 0..gridpoints, h = L/gridpoints. Ghost
            // reflection doubles the first off-diagonal entries; the diagonal
            // similarity with sqrt(2) end weights restores symmetry without
            // moving eigenvalues.
            let m = gridpoints + 1;
            let h = length / gridpoints as f64;
            let inv_h2 = 1.0 / (h * h);
            let mut off = vec![inv_h2; m - 1];
            off[0] = std::f64::consts::SQRT_2 * inv_h2;
            off[m - 2] = std::f64::consts::SQRT_2 * inv_h2;
            SymTridiag::new(vec![-2.0 * inv_h2; m], off)
        }
    };

    let mut eigenvalues = tri.largest_eigenvalues(j_max);
    // Bisection brackets to ~1e-14 of the spectral diameter (about 4/h^2), so
    // the zero Neumann eigenvalue can come back a hair positive.
    let h = length / gridpoints as f64;
    let gate = 4.0 / (h * h) * 1e-11;
    for lam in eigenvalues.iter_mut() {
        if *lam > 0.0 {
            if *lam > gate {
                return Err(Error::Numerical(format!(
                    "FD eigensolve returned positive eigenvalue {lam} (L = {length}, bc = {bc}, gridpoints = {gridpoints})"
                )));
            }
            *lam = 0.0;
        }
    }
    if bc == BoundaryCondition::Neumann {
        eigenvalues[0] = 0.0;
    }
    Spectrum::tabulated(1, bc, eigenvalues, vec![1; j_max])
}

/// Packages the tip derivatives of the conformal warp family for a spectrum.
///
/// Returns H'(0) = n phi'(0) and the rule Delta_Y'(0) = -2 phi'(0) Delta_Y(0)
/// in the eigenbasis.
pub fn warp_family(phi_prime0: f64, spectrum: &Spectrum) -> WarpData {
    WarpData { phi_prime0, n: spectrum.n() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn interval_neumann_l_pi() {
        let s = interval_spectrum(PI, BoundaryCondition::Neumann, 3).unwrap();
        let lams: Vec<f64> = s.entries().iter().map(|e| e.lambda).collect();
        assert!((lams[0] - 0.0).abs() < 1e-15);
        assert!((lams[1] + 1.0).abs() < 1e-12);
        assert!((lams[2] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn interval_neumann_single_mode() {
        let s = interval_spectrum(PI, BoundaryCondition::Neumann, 1).unwrap();
        assert_eq!(s.modes(), 1);
        assert_eq!(s.lambda(0), 0.0);
    }

    #[test]
    fn interval_dirichlet_l_pi() {
        let s = interval_spectrum(PI, BoundaryCondition::Dirichlet, 2).unwrap();
        assert!((s.lambda(0) + 1.0).abs() < 1e-12);
        assert!((s.lambda(1) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_length_rejected() {
        assert!(interval_spectrum(0.0, BoundaryCondition::Neumann, 2).is_err());
        assert!(interval_spectrum(-1.0, BoundaryCondition::Dirichlet, 2).is_err());
    }

    #[test]
    fn fd_neumann_matches_analytic() {
        let s = fd_spectrum(PI, BoundaryCondition::Neumann, 2000, 3).unwrap();
        assert_eq!(s.lambda(0), 0.0);
        assert!((s.lambda(1) + 1.0).abs() < 1e-3);
        assert!((s.lambda(2) + 4.0).abs() < 1e-3);
    }

    #[test]
    fn fd_neumann_constant_mode_exact() {
        let s = fd_spectrum(PI, BoundaryCondition::Neumann, 2000, 1).unwrap();
        assert_eq!(s.lambda(0), 0.0);
    }

    #[test]
    fn fd_neumann_half_pi() {
        let s = fd_spectrum(PI / 2.0, BoundaryCondition::Neumann, 2000, 2).unwrap();
        assert_eq!(s.lambda(0), 0.0);
        assert!((s.lambda(1) + 4.0).abs() < 5e-3);
    }

    #[test]
    fn fd_dirichlet_matches_analytic() {
        let s = fd_spectrum(PI, BoundaryCondition::Dirichlet, 2000, 3).unwrap();
        for j in 0..3 {
            let exact = -((j as f64 + 1.0).powi(2));
            assert!((s.lambda(j) - exact).abs() < 1e-2 * (1.0 + exact.abs()));
        }
    }

    #[test]
    fn fd_convergence_is_second_order() {
        // Error against the analytic eigenvalues under grid doubling.
        let err = |gp: usize| -> f64 {
            let fd = fd_spectrum(PI, BoundaryCondition::Neumann, gp, 5).unwrap();
            let exact = interval_spectrum(PI, BoundaryCondition::Neumann, 5).unwrap();
            (0..5)
                .map(|j| (fd.lambda(j) - exact.lambda(j)).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err(250);
        let e2 = err(500);
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "fitted order {order} below 1.9");
    }

    #[test]
    fn tabulated_rejects_positive_eigenvalue() {
        let err = Spectrum::tabulated(2, BoundaryCondition::Neumann, vec![0.0, 0.5], vec![1, 1]);
        assert!(err.is_err());
    }

    #[test]
    fn tabulated_rejects_wrong_first_eigenvalue() {
        assert!(Spectrum::tabulated(1, BoundaryCondition::Neumann, vec![-1.0], vec![1]).is_err());
        assert!(Spectrum::tabulated(1, BoundaryCondition::Dirichlet, vec![0.0], vec![1]).is_err());
    }

    #[test]
    fn cross_section_invariants() {
        let warp = WarpData::unwarped(1);
        // Interval cross-sections are one-dimensional.
        assert!(CrossSection::new(
            CrossSectionKind::IntervalAnalytic { length: PI },
            2,
            BoundaryCondition::Neumann,
            WarpData::unwarped(2),
        )
        .is_err());
        assert!(CrossSection::new(
            CrossSectionKind::IntervalAnalytic { length: -1.0 },
            1,
            BoundaryCondition::Neumann,
            warp,
        )
        .is_err());
        let cs = CrossSection::new(
            CrossSectionKind::IntervalAnalytic { length: PI },
            1,
            BoundaryCondition::Neumann,
            warp,
        )
        .unwrap();
        let s = cs.spectrum(3).unwrap();
        assert_eq!(s.modes(), 3);
        let fd = CrossSection::new(
            CrossSectionKind::FdOracle { length: PI, gridpoints: 512 },
            1,
            BoundaryCondition::Neumann,
            warp,
        )
        .unwrap();
        assert!((fd.spectrum(2).unwrap().lambda(1) + 1.0).abs() < 1e-2);
    }

    #[test]
    fn warp_family_values() {
        let s = interval_spectrum(PI, BoundaryCondition::Neumann, 3).unwrap();
        let w = warp_family(1.0, &s);
        assert_eq!(w.h_prime0(), 1.0);
        let d = w.delta_y_prime0_diag(&s);
        assert!((d[0] - 0.0).abs() < 1e-14);
        assert!((d[1] - 2.0).abs() < 1e-12);
        assert!((d[2] - 8.0).abs() < 1e-12);

        let unwarped = warp_family(0.0, &s);
        assert_eq!(unwarped.h_prime0(), 0.0);
        assert!(unwarped.delta_y_prime0_diag(&s).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warp_family_n2() {
        let s = Spectrum::tabulated(2, BoundaryCondition::Neumann, vec![0.0, -2.0], vec![1, 1]).unwrap();
        let w = warp_family(-0.5, &s);
        assert!((w.h_prime0() + 1.0).abs() < 1e-14);
    }
}
