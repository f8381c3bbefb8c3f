//! Indicial roots and the weight windows they populate.
//!
//! For cross-section eigenvalue lambda_j the inverse of the principal
//! conormal symbol has poles at
//!
//!   q_j^{+-} = (n-1)/2 +- sqrt( ((n-1)/2)^2 - lambda_j ),
//!
//! so q^- + q^+ = n - 1 exactly, and the radicand is nonnegative because
//! lambda_j <= 0. A double pole occurs iff q^+ = q^-, which for Laplacian
//! data happens only at n = 1, lambda = 0 (the Neumann constant mode).

use crate::cross_section::Spectrum;
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;

/// Which branch of the quadratic a root comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RootSign {
    Plus,
    Minus,
}

/// One indicial root with its mode provenance and pole order.
///
/// The mode index keeps eigenspace dimensions attached to the root, so the
/// asymptotics spaces downstream never re-match roots by value. The value is
/// stored complex to leave room for non-self-adjoint data, but all Laplacian
/// operations produce (and some require) real roots.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IndicialRoot {
    pub mode: usize,
    pub sign: RootSign,
    pub value: Complex64,
    pub pole_order: u8,
}

impl IndicialRoot {
    pub fn re(&self) -> f64 {
        self.value.re
    }

    pub fn is_double(&self) -> bool {
        self.pole_order == 2
    }
}

/// Tolerance for endpoint-coincidence and root-identity checks on floating
/// input.
pub const ROOT_TOL: f64 = 1e-12;

/// Both indicial roots of mode `j`: (q^-, q^+).
pub fn indicial_roots(spectrum: &Spectrum, j: usize) -> Result<(IndicialRoot, IndicialRoot)> {
    if j >= spectrum.modes() {
        return Err(Error::Domain(format!(
            "mode {j} outside spectrum with {} modes",
            spectrum.modes()
        )));
    }
    let half = (spectrum.n() as f64 - 1.0) / 2.0;
    let lambda = spectrum.lambda(j);
    let radicand = half * half - lambda;
    debug_assert!(radicand >= 0.0);
    let root = radicand.sqrt();
    let pole_order = if root <= ROOT_TOL { 2 } else { 1 };
    let minus = IndicialRoot {
        mode: j,
        sign: RootSign::Minus,
        value: Complex64::new(half - root, 0.0),
        pole_order,
    };
    let plus = IndicialRoot {
        mode: j,
        sign: RootSign::Plus,
        value: Complex64::new(half + root, 0.0),
        pole_order,
    };
    Ok((minus, plus))
}

/// An open interval of weights with every indicial root strictly inside.
///
/// Double roots are listed once, with `pole_order = 2`.
#[derive(Clone, Debug, Serialize)]
pub struct PoleWindow {
    pub lower: f64,
    pub upper: f64,
    pub roots: Vec<IndicialRoot>,
}

impl PoleWindow {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn contains_value(&self, q: f64) -> bool {
        q > self.lower + ROOT_TOL && q < self.upper - ROOT_TOL
    }

    /// The root at value `q`, if present.
    pub fn root_at(&self, q: f64) -> Option<&IndicialRoot> {
        self.roots.iter().find(|r| (r.re() - q).abs() <= ROOT_TOL)
    }
}

/// All indicial roots inside ((n+1)/2 - gamma - mu, (n+1)/2 - gamma).
///
/// A root within `ROOT_TOL` of either endpoint is an error: the weight-shift
/// hypotheses behind the maximal-domain description require pole-free
/// endpoints. Enumeration over modes terminates because q_j^+ increases and
/// q_j^- decreases without bound along the spectrum; within the truncated
/// spectrum every mode is inspected.
pub fn pole_window(spectrum: &Spectrum, gamma: f64, mu: f64) -> Result<PoleWindow> {
    let upper = (spectrum.n() as f64 + 1.0) / 2.0 - gamma;
    let lower = upper - mu;
    let mut roots = Vec::new();
    for j in 0..spectrum.modes() {
        let (minus, plus) = indicial_roots(spectrum, j)?;
        let candidates: &[IndicialRoot] =
            if plus.is_double() { std::slice::from_ref(&plus) } else { &[minus, plus] };
        for root in candidates {
            let q = root.re();
            for endpoint in [lower, upper] {
                if (q - endpoint).abs() <= ROOT_TOL {
                    return Err(Error::EndpointCoincidence { root: q, mode: j, endpoint });
                }
            }
            if q > lower && q < upper {
                roots.push(*root);
            }
        }
    }
    roots.sort_by(|a, b| a.re().partial_cmp(&b.re()).unwrap());
    Ok(PoleWindow { lower, upper, roots })
}

/// The window I_gamma of the Laplacian: `pole_window` with mu = 2.
pub fn laplacian_window_igamma(spectrum: &Spectrum, gamma: f64) -> Result<PoleWindow> {
    pole_window(spectrum, gamma, 2.0)
}

/// Admissible delta-range for the distinguished Neumann weight
/// gamma = (n-3)/2 + delta.
#[derive(Clone, Debug, Serialize)]
pub struct GammaWindow {
    pub n: usize,
    /// delta must lie in (0, delta_max), delta_max = min(-q_{1,N}^-, 2).
    pub delta_max: f64,
    /// delta values in (0, delta_max) with 2 - delta = q_{j,N}^+, excluded.
    pub exclusions: Vec<f64>,
}

impl GammaWindow {
    pub fn gamma(&self, delta: f64) -> f64 {
        (self.n as f64 - 3.0) / 2.0 + delta
    }

    pub fn is_admissible(&self, delta: f64) -> bool {
        delta > 0.0
            && delta < self.delta_max
            && self.exclusions.iter().all(|&e| (delta - e).abs() > ROOT_TOL)
    }
}

/// Computes the delta-window for a Neumann spectrum with at least two modes.
pub fn gamma_window(spectrum: &Spectrum) -> Result<GammaWindow> {
    if spectrum.bc() != crate::cross_section::BoundaryCondition::Neumann {
        return Err(Error::Domain("gamma window is defined for Neumann spectra".into()));
    }
    if spectrum.modes() < 2 {
        return Err(Error::Domain(
            "gamma window needs at least two Neumann modes (q_{1,N}^- must exist)".into(),
        ));
    }
    let (q1_minus, _) = indicial_roots(spectrum, 1)?;
    let delta_max = (-q1_minus.re()).min(2.0);
    let mut exclusions = Vec::new();
    for j in 0..spectrum.modes() {
        let (_, plus) = indicial_roots(spectrum, j)?;
        let delta = 2.0 - plus.re();
        if delta > 0.0 && delta < delta_max {
            exclusions.push(delta);
        }
    }
    exclusions.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(GammaWindow { n: spectrum.n(), delta_max, exclusions })
}
