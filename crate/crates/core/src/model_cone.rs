//! Numerical stand-in for the sectoriality condition on the model cone.
//!
//! Each eigenmode of the cross-section reduces the model operator to the
//! one-dimensional degenerate ODE
//!
//!   A_j = e^{-2t} ( d^2/dt^2 + (n-1) d/dt + lambda_j ),   t = log x,
//!
//! on a truncated interval [log x_min, log X_inf]. The tip row selects the
//! branch x^{-q} admitted by the extension choice; the far row matches the
//! decaying radiation branch e^{-sqrt(lambda) x}. Resolvent norms are
//! estimated by power iteration on the weighted-norm conjugated solve, and
//! dilation homogeneity is checked against the exact kappa-conjugation
//! identity. Truncation means the condition is probed, never proved.

use crate::banded::{BandedLu, BandedMatrix};
use crate::domains::{DomainDescriptor, ExtensionChoice};
use crate::error::{Error, Result};
use crate::indicial::indicial_roots;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform grid in t = log x over [log x_min, log x_max].
#[derive(Clone, Debug)]
pub struct LogGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub t: Vec<f64>,
    pub h: f64,
}

impl LogGrid {
    pub fn new(x_min: f64, x_max: f64, nodes: usize) -> Result<Self> {
        if !(x_min > 0.0 && x_min < 1.0 && x_max > 1.0) {
            return Err(Error::Domain(format!(
                "grid needs x_min < 1 < x_max with x_min > 0; got [{x_min}, {x_max}]"
            )));
        }
        if nodes < 256 {
            return Err(Error::Domain(format!("grid needs at least 256 nodes, got {nodes}")));
        }
        let t0 = x_min.ln();
        let t1 = x_max.ln();
        let h = (t1 - t0) / (nodes - 1) as f64;
        let t = (0..nodes).map(|i| t0 + h * i as f64).collect();
        Ok(Self { x_min, x_max, t, h })
    }

    pub fn nodes(&self) -> usize {
        self.t.len()
    }
}

/// Discrete K^{0,gamma} norm: cell masses of the weight x^{2a} dx/x with
/// a = (n+1)/2 - gamma, integrated exactly per cell.
#[derive(Clone, Debug)]
pub struct WeightedNorm {
    pub gamma: f64,
    pub masses: Vec<f64>,
}

impl WeightedNorm {
    pub fn new(grid: &LogGrid, n: usize, gamma: f64) -> Self {
        let a = (n as f64 + 1.0) / 2.0 - gamma;
        let t = &grid.t;
        let h = grid.h;
        let last = t.len() - 1;
        let masses = (0..t.len())
            .map(|i| {
                let tl = if i == 0 { t[0] } else { t[i] - 0.5 * h };
                let tr = if i == last { t[last] } else { t[i] + 0.5 * h };
                if a.abs() < 1e-14 {
                    tr - tl
                } else {
                    ((2.0 * a * tr).exp() - (2.0 * a * tl).exp()) / (2.0 * a)
                }
            })
            .collect();
        Self { gamma, masses }
    }

    pub fn norm(&self, u: &[Complex64]) -> f64 {
        u.iter().zip(&self.masses).map(|(v, m)| v.norm_sqr() * m).sum::<f64>().sqrt()
    }
}

/// A sector avoiding the positive reals, with the sampled arguments and
/// log-spaced magnitudes of the spectral parameter.
#[derive(Clone, Debug, Serialize)]
pub struct SectorSpec {
    pub theta: f64,
    pub args: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl SectorSpec {
    pub fn new(theta: f64, args: Vec<f64>, magnitudes: Vec<f64>) -> Result<Self> {
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(Error::Domain(format!("sector angle must lie in (0, pi), got {theta}")));
        }
        for &a in &args {
            if a < theta - 1e-12 || a > 2.0 * std::f64::consts::PI - theta + 1e-12 {
                return Err(Error::Domain(format!(
                    "sampled argument {a} leaves the sector [{theta}, {}]",
                    2.0 * std::f64::consts::PI - theta
                )));
            }
        }
        if magnitudes.iter().any(|&m| m <= 0.0) {
            return Err(Error::Domain("magnitudes must be positive".into()));
        }
        Ok(Self { theta, args, magnitudes })
    }

    pub fn log_spaced(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
        let decades = (hi / lo).log10();
        let count = ((decades * per_decade as f64).round() as usize).max(1) + 1;
        (0..count)
            .map(|k| lo * 10f64.powf(decades * k as f64 / (count - 1) as f64))
            .collect()
    }
}

/// One eigenmode's resolvent problem on the truncated model cone.
#[derive(Clone, Debug)]
pub struct ModeProblem {
    pub mode: usize,
    pub lambda_mode: f64,
    pub n: usize,
    pub gamma: f64,
    /// Indicial root q of the branch x^{-q} the tip row selects.
    pub tip_exponent: f64,
    pub grid: LogGrid,
}

/// The tip branch selected by the extension choice at one mode, or why none
/// is selectable.
fn tip_exponent_for_mode(desc: &DomainDescriptor, j: usize) -> Result<f64> {
    let spectrum = &desc.spectrum;
    let n = spectrum.n() as f64;
    let upper = (n + 1.0) / 2.0 - desc.gamma;
    let lower = upper - 2.0;
    let (qm, qp) = indicial_roots(spectrum, j)?;

    let choice_at = |q: f64| -> Option<&ExtensionChoice> {
        desc.index_of_root_value(q).map(|idx| &desc.choices[idx])
    };

    if qp.is_double() {
        let q = qp.re();
        if q <= lower || q >= upper {
            return Err(Error::Unsupported(format!(
                "double root q = {q} at mode {j} lies outside the window; the per-mode solve is not well-posed"
            )));
        }
        return match choice_at(q) {
            Some(ExtensionChoice::Constants) => Ok(q),
            Some(ExtensionChoice::Zero) => Err(Error::Unsupported(format!(
                "mode {j}: both tip branches removed; the solve is over-constrained"
            ))),
            Some(ExtensionChoice::Full) => Err(Error::Unsupported(format!(
                "mode {j}: the full log pair leaves two tip branches; the solve is under-determined"
            ))),
            _ => Err(Error::Unsupported(format!("mode {j}: unsupported log-pair choice"))),
        };
    }

    let mut allowed = Vec::new();
    for root in [qm, qp] {
        let q = root.re();
        if q < lower {
            allowed.push(q);
        } else if q > upper {
            // never admissible in this weight
        } else {
            match choice_at(q) {
                Some(ExtensionChoice::Full) => allowed.push(q),
                Some(ExtensionChoice::Zero) | None => {}
                Some(ExtensionChoice::Constants) => unreachable!("constants at a plain root"),
                Some(ExtensionChoice::Span(_)) => {
                    return Err(Error::Unsupported(format!(
                        "mode {j}: the resolvent probe handles Zero/Full/Constants choices only"
                    )))
                }
            }
        }
    }
    match allowed.len() {
        1 => Ok(allowed[0]),
        0 => Err(Error::Unsupported(format!(
            "mode {j}: no admissible tip branch; the extension is over-constrained for the per-mode solve"
        ))),
        _ => Err(Error::Unsupported(format!(
            "mode {j}: two admissible tip branches; the extension is under-determined for the per-mode solve"
        ))),
    }
}

/// Builds the per-mode problems for a descriptor on a common grid.
pub fn mode_problems(desc: &DomainDescriptor, grid: &LogGrid) -> Result<Vec<ModeProblem>> {
    (0..desc.spectrum.modes())
        .map(|j| {
            Ok(ModeProblem {
                mode: j,
                lambda_mode: desc.spectrum.lambda(j),
                n: desc.spectrum.n(),
                gamma: desc.gamma,
                tip_exponent: tip_exponent_for_mode(desc, j)?,
                grid: grid.clone(),
            })
        })
        .collect()
}

/// Assembles lambda - A_j with the tip branch row and the radiation far row.
pub fn assemble_mode_matrix(problem: &ModeProblem, lambda: Complex64) -> BandedMatrix {
    let grid = &problem.grid;
    let nn = grid.nodes();
    let h = grid.h;
    let nm1 = problem.n as f64 - 1.0;
    let mut a = BandedMatrix::new(nn, 2, 2);

    // Tip: one-sided du/dt + q u = 0 selects u ~ e^{-q t} = x^{-q}... with
    // q = -tip_exponent; the selected branch is x^{-q_sel}, i.e. e^{-q_sel t},
    // so the row is du/dt + q_sel u = 0.
    let q = problem.tip_exponent;
    a.set(0, 0, Complex64::new(-1.5 / h + q, 0.0));
    a.set(0, 1, Complex64::new(2.0 / h, 0.0));
    a.set(0, 2, Complex64::new(-0.5 / h, 0.0));

    for i in 1..nn - 1 {
        let c = (-2.0 * grid.t[i]).exp();
        a.set(i, i - 1, Complex64::new(-c * (1.0 / (h * h) - nm1 / (2.0 * h)), 0.0));
        a.set(i, i, lambda + Complex64::new(c * (2.0 / (h * h) - problem.lambda_mode), 0.0));
        a.set(i, i + 1, Complex64::new(-c * (1.0 / (h * h) + nm1 / (2.0 * h)), 0.0));
    }

    // Far field: du/dt + sqrt(lambda) x u = 0 at x = x_max matches the
    // decaying branch (principal root has re >= 0).
    let s = lambda.sqrt() * Complex64::new(problem.grid.x_max, 0.0);
    a.set(nn - 1, nn - 1, Complex64::new(1.5 / h, 0.0) + s);
    a.set(nn - 1, nn - 2, Complex64::new(-2.0 / h, 0.0));
    a.set(nn - 1, nn - 3, Complex64::new(0.5 / h, 0.0));
    a
}

/// Solves (lambda - A_j) u = f on the truncated cone. Entries of `f` at the
/// two boundary rows are ignored.
pub fn mode_resolvent_solve(
    problem: &ModeProblem,
    lambda: Complex64,
    f: &[Complex64],
) -> Result<Vec<Complex64>> {
    let nn = problem.grid.nodes();
    if f.len() != nn {
        return Err(Error::Domain(format!("forcing has {} nodes, grid has {nn}", f.len())));
    }
    let a = assemble_mode_matrix(problem, lambda);
    let lu = a.lu().map_err(|e| {
        Error::Numerical(format!(
            "singular mode system at lambda = {lambda}, mode {}, {} nodes: {e}",
            problem.mode, nn
        ))
    })?;
    let mut rhs: Vec<Complex64> = f.to_vec();
    rhs[0] = C_ZERO;
    rhs[nn - 1] = C_ZERO;
    lu.solve(&mut rhs);
    Ok(rhs)
}

/// Power-iteration estimate of || lambda (lambda - A_j)^{-1} || in the
/// discrete K^{0,gamma} norm. Returns (estimate, converged).
pub fn mode_norm_estimate(
    problem: &ModeProblem,
    lambda: Complex64,
    seed: u64,
) -> Result<(f64, bool)> {
    let nn = problem.grid.nodes();
    let norm = WeightedNorm::new(&problem.grid, problem.n, problem.gamma);
    let w_sqrt: Vec<f64> = norm.masses.iter().map(|m| m.sqrt()).collect();
    let a = assemble_mode_matrix(problem, lambda);
    let lu_a = a.adjoint().lu();
    let lu = a.lu().map_err(|e| {
        Error::Numerical(format!("singular system at lambda = {lambda}: {e}"))
    })?;
    let lu_h: BandedLu = lu_a?;

    // C = W^{1/2} R A^{-1} E W^{-1/2} on interior nodes.
    let apply_c = |x: &[Complex64]| -> Vec<Complex64> {
        let mut rhs = vec![C_ZERO; nn];
        for i in 1..nn - 1 {
            rhs[i] = x[i - 1] / Complex64::new(w_sqrt[i], 0.0);
        }
        lu.solve(&mut rhs);
        (1..nn - 1).map(|i| rhs[i] * Complex64::new(w_sqrt[i], 0.0)).collect()
    };
    let apply_ch = |y: &[Complex64]| -> Vec<Complex64> {
        let mut rhs = vec![C_ZERO; nn];
        for i in 1..nn - 1 {
            rhs[i] = y[i - 1] * Complex64::new(w_sqrt[i], 0.0);
        }
        lu_h.solve(&mut rhs);
        (1..nn - 1).map(|i| rhs[i] / Complex64::new(w_sqrt[i], 0.0)).collect()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..nn - 2)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let nv = (v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    for z in v.iter_mut() {
        *z /= nv;
    }
    let mut rho_prev = f64::NAN;
    let mut converged = false;
    for _ in 0..20 {
        let w = apply_ch(&apply_c(&v));
        let rho = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if rho == 0.0 {
            return Ok((0.0, true));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / Complex64::new(rho, 0.0);
        }
        if rho_prev.is_finite() && (rho - rho_prev).abs() <= 1e-6 * rho {
            rho_prev = rho;
            converged = true;
            break;
        }
        rho_prev = rho;
    }
    Ok((lambda.norm() * rho_prev.sqrt(), converged))
}

/// One probe sample: ray argument, magnitude, norm estimate.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeSample {
    pub arg: f64,
    pub magnitude: f64,
    pub estimate: f64,
    pub converged: bool,
}

/// Probe output: per-sample estimates and the sup over samples.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeTable {
    pub samples: Vec<ProbeSample>,
    pub sup: f64,
    pub flagged: usize,
}

impl ProbeTable {
    /// Samples on one ray, ordered by magnitude.
    pub fn ray(&self, arg: f64) -> Vec<&ProbeSample> {
        let mut v: Vec<&ProbeSample> =
            self.samples.iter().filter(|s| (s.arg - arg).abs() < 1e-12).collect();
        v.sort_by(|a, b| a.magnitude.partial_cmp(&b.magnitude).unwrap());
        v
    }
}

/// Estimates || lambda (lambda - A)^{-1} || over the sampled sector, taking
/// the max across modes per sample.
pub fn sectoriality_probe(
    desc: &DomainDescriptor,
    sector: &SectorSpec,
    grid: &LogGrid,
    seed: u64,
) -> Result<ProbeTable> {
    let problems = mode_problems(desc, grid)?;
    let mut samples = Vec::new();
    let mut sup = 0.0f64;
    let mut flagged = 0;
    for (ai, &arg) in sector.args.iter().enumerate() {
        for (mi, &mag) in sector.magnitudes.iter().enumerate() {
            let lambda = Complex64::from_polar(mag, arg);
            let mut est = 0.0f64;
            let mut ok = true;
            for (pi, p) in problems.iter().enumerate() {
                let s = seed
                    .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                    .wrapping_add((ai * 1000 + mi * 10 + pi) as u64);
                let (e, conv) = mode_norm_estimate(p, lambda, s)?;
                est = est.max(e);
                ok &= conv;
            }
            if !ok {
                flagged += 1;
            }
            sup = sup.max(est);
            samples.push(ProbeSample { arg, magnitude: mag, estimate: est, converged: ok });
        }
    }
    Ok(ProbeTable { samples, sup, flagged })
}

/// Linear interpolation of grid data at point s.
fn linear_interp(grid: &LogGrid, u: &[Complex64], s: f64) -> Option<Complex64> {
    let t0 = grid.t[0];
    let nn = grid.nodes();
    let pos = (s - t0) / grid.h;
    if pos < 0.0 || pos > (nn - 1) as f64 {
        return None;
    }
    let k = (pos.floor() as usize).min(nn - 2);
    let w = pos - k as f64;
    Some(u[k] * Complex64::new(1.0 - w, 0.0) + u[k + 1] * Complex64::new(w, 0.0))
}

/// Applies kappa_rho u (x) = rho^{(n+1)/2} u(rho x) on the grid. Exact index
/// shift when log rho is grid-aligned, linear interpolation otherwise;
/// nodes mapped outside the grid return None entries.
pub fn kappa_apply(
    grid: &LogGrid,
    n: usize,
    u: &[Complex64],
    rho: f64,
) -> Vec<Option<Complex64>> {
    let lr = rho.ln();
    let factor = Complex64::new(rho.powf((n as f64 + 1.0) / 2.0), 0.0);
    let shift = lr / grid.h;
    let aligned = (shift - shift.round()).abs() < 1e-12;
    (0..grid.nodes())
        .map(|i| {
            let s = grid.t[i] + lr;
            if aligned {
                let k = i as i64 + shift.round() as i64;
                if k < 0 || k >= grid.nodes() as i64 {
                    None
                } else {
                    Some(u[k as usize] * factor)
                }
            } else {
                linear_interp(grid, u, s).map(|v| v * factor)
            }
        })
        .collect()
}

/// Checks the dilation-homogeneity identity
/// (eta^2 - A)^{-1} f = rho^{-2} kappa_rho ((eta/rho)^2 - A)^{-1}
/// kappa_rho^{-1} f on one mode; returns the relative error in the
/// discrete gamma = 0 norm.
///
/// The scaled problem is solved on the rho-dilated grid, whose boundary
/// rows are the exact conjugates of the original ones, so the comparison
/// carries no truncation mismatch. The dilated grid is deliberately
/// coarsened by 3/4 so the two discretization errors cannot cancel; the
/// reported error is O(h^2) and vanishes under refinement.
pub fn dilation_check(
    desc: &DomainDescriptor,
    mode: usize,
    eta: Complex64,
    rho: f64,
    grid: &LogGrid,
) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::Domain("dilation factor must be positive".into()));
    }
    let span = grid.t[grid.nodes() - 1] - grid.t[0];
    if rho.ln().abs() > span / 4.0 {
        return Err(Error::Domain(format!(
            "log rho = {} shifts the support off the grid (span {span})",
            rho.ln()
        )));
    }
    let problems = mode_problems(desc, grid)?;
    let problem = problems
        .get(mode)
        .ok_or_else(|| Error::Domain(format!("mode {mode} outside the descriptor spectrum")))?;

    let t_mid = 0.5 * (grid.t[0] + grid.t[grid.nodes() - 1]);
    let width = span / 12.0;
    let bump = |t: f64| Complex64::new((-(t - t_mid).powi(2) / (2.0 * width * width)).exp(), 0.0);

    let f1: Vec<Complex64> = grid.t.iter().map(|&t| bump(t)).collect();
    let u1 = mode_resolvent_solve(problem, eta * eta, &f1)?;

    // The scaled problem lives on the dilated grid [rho x_min, rho x_max];
    // coarsen so the two FD error fields differ. rho = 1 keeps the grid and
    // reproduces u1 exactly.
    let lr = rho.ln();
    let grid2 = if rho == 1.0 {
        grid.clone()
    } else {
        LogGrid::new(rho * grid.x_min, rho * grid.x_max, (grid.nodes() - 1) * 3 / 4 + 1)?
    };
    let problem2 = ModeProblem { grid: grid2.clone(), ..problem.clone() };
    let kappa_pow = rho.powf((problem.n as f64 + 1.0) / 2.0);
    // kappa_rho^{-1} f evaluated on the dilated nodes: rho^{-(n+1)/2} f(t - log rho).
    let f2: Vec<Complex64> =
        grid2.t.iter().map(|&t| bump(t - lr) / Complex64::new(kappa_pow, 0.0)).collect();
    let eta2 = eta / Complex64::new(rho, 0.0);
    let w2 = mode_resolvent_solve(&problem2, eta2 * eta2, &f2)?;

    // u2(t) = rho^{(n+1)/2 - 2} w2(t + log rho), interpolated off the
    // dilated grid.
    let scale = Complex64::new(kappa_pow / (rho * rho), 0.0);
    let norm0 = WeightedNorm::new(grid, problem.n, 0.0);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..grid.nodes() {
        if let Some(v) = linear_interp(&grid2, &w2, grid.t[i] + lr) {
            let u2 = v * scale;
            num += (u1[i] - u2).norm_sqr() * norm0.masses[i];
            den += u1[i].norm_sqr() * norm0.masses[i];
        }
    }
    if den == 0.0 {
        return Err(Error::Numerical("dilation check: zero reference solution".into()));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::{interval_spectrum, BoundaryCondition};
    use crate::domains::neumann_extension;
    use std::f64::consts::PI;

    fn distinguished_descriptor() -> DomainDescriptor {
        let s = interval_spectrum(PI, BoundaryCondition::Neumann, 3).unwrap();
        neumann_extension(&s, 0.5).unwrap()
    }

    fn grid(nodes: usize) -> LogGrid {
        LogGrid::new(1e-5, 10.0, nodes).unwrap()
    }

    #[test]
    fn tip_exponent_selection() {
        let d = distinguished_descriptor();
        let g = grid(257);
        let p = mode_problems(&d, &g).unwrap();
        // Mode 0: constants branch q = 0; mode 1: q = -1 (x^{+1});
        // mode 2: q = -2 (both roots out the window, minus branch free).
        assert_eq!(p[0].tip_exponent, 0.0);
        assert_eq!(p[1].tip_exponent, -1.0);
        assert_eq!(p[2].tip_exponent, -2.0);
    }

    #[test]
    fn manufactured_solution_roundtrip() {
        let d = distinguished_descriptor();
        let g = grid(513);
        let problems = mode_problems(&d, &g).unwrap();
        let lambda = Complex64::new(0.0, 3.0);
        for p in &problems {
            let a = assemble_mode_matrix(p, lambda);
            let t_mid = 0.5 * (g.t[0] + g.t[g.nodes() - 1]);
            let u_true: Vec<Complex64> = g
                .t
                .iter()
                .map(|&t| Complex64::new((-(t - t_mid).powi(2)).exp(), 0.2 * (t - t_mid).cos()))
                .collect();
            let f = a.matvec(&u_true);
            let u = mode_resolvent_solve(p, lambda, &f).unwrap();
            // The boundary rows of f are dropped by the solver; rebuild them
            // by comparing only a pure linear-algebra roundtrip.
            let mut rhs = f.clone();
            rhs[0] = C_ZERO;
            rhs[g.nodes() - 1] = C_ZERO;
            // u solves the system with homogeneous boundary rows; the
            // manufactured u_true has inhomogeneous ones, so check the
            // residual of u instead.
            let residual = a.matvec(&u);
            let norm = WeightedNorm::new(&g, p.n, p.gamma);
            let err: f64 = (1..g.nodes() - 1)
                .map(|i| (residual[i] - rhs[i]).norm_sqr() * norm.masses[i])
                .sum::<f64>()
                .sqrt();
            let scale = norm.norm(&f);
            assert!(err < 1e-10 * scale.max(1.0), "mode {} residual {err}", p.mode);
        }
    }

    #[test]
    fn shooting_oracle_mode0() {
        // Mode 0, lambda = -1, constants branch at the tip: compare the FD
        // solve against an RK4 shooting oracle on the same ODE.
        let d = distinguished_descriptor();
        let g = LogGrid::new(1e-5, 5.0, 65537).unwrap();
        let problems = mode_problems(&d, &g).unwrap();
        let p = &problems[0];
        let lambda = Complex64::new(-1.0, 0.0);
        let t_mid = 0.5 * (g.t[0] + g.t[g.nodes() - 1]);
        let width = (g.t[g.nodes() - 1] - g.t[0]) / 16.0;
        let bump = |t: f64| (-(t - t_mid).powi(2) / (2.0 * width * width)).exp();
        let f: Vec<Complex64> = g.t.iter().map(|&t| Complex64::new(bump(t), 0.0)).collect();
        let u_fd = mode_resolvent_solve(p, lambda, &f).unwrap();

        // RK4 on u'' = e^{2t}(lambda u - f) (n = 1, mode 0), 16 substeps per
        // grid interval; homogeneous branch from (1, 0), particular from
        // (0, 0).
        let sub = 16usize;
        let hh = g.h / sub as f64;
        let rhs = |t: f64, u: Complex64, include_f: bool| -> Complex64 {
            let e2t = (2.0 * t).exp();
            let fv = if include_f { Complex64::new(bump(t), 0.0) } else { C_ZERO };
            Complex64::new(e2t, 0.0) * (lambda * u - fv)
        };
        let mut hom = (Complex64::new(1.0, 0.0), C_ZERO);
        let mut par = (C_ZERO, C_ZERO);
        let mut hom_nodes = vec![hom.0];
        let mut par_nodes = vec![par.0];
        let mut t = g.t[0];
        for _ in 0..g.nodes() - 1 {
            for _ in 0..sub {
                let step = |state: (Complex64, Complex64), with_f: bool| {
                    let (u, v) = state;
                    let k1 = (v, rhs(t, u, with_f));
                    let k2 = (v + k1.1 * 0.5 * hh, rhs(t + 0.5 * hh, u + k1.0 * 0.5 * hh, with_f));
                    let k3 = (v + k2.1 * 0.5 * hh, rhs(t + 0.5 * hh, u + k2.0 * 0.5 * hh, with_f));
                    let k4 = (v + k3.1 * hh, rhs(t + hh, u + k3.0 * hh, with_f));
                    (
                        u + (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) * (hh / 6.0),
                        v + (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) * (hh / 6.0),
                    )
                };
                hom = step(hom, false);
                par = step(par, true);
                t += hh;
            }
            hom_nodes.push(hom.0);
            par_nodes.push(par.0);
        }
        // Far-row coefficient: w'(tN) + sqrt(lambda) x_max w(tN).
        let s = lambda.sqrt() * Complex64::new(g.x_max, 0.0);
        let far_h = hom.1 + s * hom.0;
        let far_p = par.1 + s * par.0;
        let c = -far_p / far_h;
        let norm = WeightedNorm::new(&g, 1, p.gamma);
        let oracle: Vec<Complex64> =
            hom_nodes.iter().zip(&par_nodes).map(|(h, q)| c * h + q).collect();
        let diff: Vec<Complex64> =
            oracle.iter().zip(&u_fd).map(|(a, b)| a - b).collect();
        let rel = norm.norm(&diff) / norm.norm(&oracle);
        assert!(rel < 1e-6, "FD vs shooting oracle relative error {rel}");
    }

    #[test]
    fn self_convergence_second_order() {
        let d = distinguished_descriptor();
        let lambda = Complex64::new(0.0, 1.0);
        let solve = |nodes: usize| -> (LogGrid, Vec<Complex64>) {
            let g = grid(nodes);
            let problems = mode_problems(&d, &g).unwrap();
            let p = &problems[1];
            let t_mid = 0.5 * (g.t[0] + g.t[g.nodes() - 1]);
            let width = (g.t[g.nodes() - 1] - g.t[0]) / 12.0;
            let f: Vec<Complex64> = g
                .t
                .iter()
                .map(|&t| Complex64::new((-(t - t_mid).powi(2) / (2.0 * width * width)).exp(), 0.0))
                .collect();
            (g, mode_resolvent_solve(p, lambda, &f).unwrap())
        };
        let (g1, u1) = solve(1025);
        let (_g2, u2) = solve(2049);
        let (_g4, u4) = solve(4097);
        let norm = WeightedNorm::new(&g1, 1, -0.5);
        let d12: Vec<Complex64> = (0..1025).map(|i| u1[i] - u2[2 * i]).collect();
        let d24: Vec<Complex64> = (0..1025).map(|i| u2[2 * i] - u4[4 * i]).collect();
        let order = (norm.norm(&d12) / norm.norm(&d24)).log2();
        assert!((1.8..=2.2).contains(&order), "observed order {order}");
    }

    #[test]
    fn cell_masses_match_independent_quadrature() {
        // Each cell mass equals the analytic weighted measure of the cell;
        // cross-check against adaptive Simpson on x^{2a} dx/x.
        let g = LogGrid::new(1e-4, 3.0, 257).unwrap();
        for (n, gamma) in [(1usize, -0.5), (2, 0.25), (1, 0.0)] {
            let a = (n as f64 + 1.0) / 2.0 - gamma;
            let norm = WeightedNorm::new(&g, n, gamma);
            let simpson = |tl: f64, tr: f64| -> f64 {
                // 64 panels is plenty at these widths.
                let m = 64;
                let h = (tr - tl) / m as f64;
                let f = |t: f64| (2.0 * a * t).exp();
                let mut acc = f(tl) + f(tr);
                for k in 1..m {
                    acc += f(tl + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
                }
                acc * h / 3.0
            };
            for i in [0usize, 1, 100, 255, 256] {
                let tl = if i == 0 { g.t[0] } else { g.t[i] - 0.5 * g.h };
                let tr = if i == g.nodes() - 1 { g.t[i] } else { g.t[i] + 0.5 * g.h };
                let q = simpson(tl, tr);
                assert!(
                    (norm.masses[i] - q).abs() <= 1e-12 * q.max(1e-300),
                    "cell {i}: mass {} vs quadrature {q}",
                    norm.masses[i]
                );
            }
        }
    }

    #[test]
    fn kappa_unitary_on_gamma_zero() {
        let g = grid(1025);
        // Aligned shift: rho = e^{k h}.
        let rho = (7.0 * g.h).exp();
        let t_mid = 0.5 * (g.t[0] + g.t[g.nodes() - 1]);
        let u: Vec<Complex64> = g
            .t
            .iter()
            .map(|&t| {
                let bump = (-(t - t_mid).powi(2)).exp();
                Complex64::new(bump, 0.3 * bump)
            })
            .collect();
        let shifted = kappa_apply(&g, 1, &u, rho);
        let norm0 = WeightedNorm::new(&g, 1, 0.0);
        let mut a = 0.0;
        let mut b = 0.0;
        for i in 0..g.nodes() {
            if let Some(v) = shifted[i] {
                a += v.norm_sqr() * norm0.masses[i];
                b += u[i].norm_sqr() * norm0.masses[i];
            }
        }
        // Interior cells carry identical masses up to the weight factor the
        // kappa power compensates; the bump keeps boundary cells negligible.
        let ratio = (a / b).sqrt();
        assert!((ratio - 1.0).abs() < 1e-10, "kappa norm ratio {ratio}");
    }

    #[test]
    fn dilation_identity_and_refinement() {
        let d = distinguished_descriptor();
        let eta = Complex64::new(0.0, 1.0);
        let g = grid(4097);
        // rho = 1 is exact.
        let e1 = dilation_check(&d, 1, eta, 1.0, &g).unwrap();
        assert!(e1 < 1e-12, "rho = 1 error {e1}");
        // rho = 2 is exact up to discretization.
        let e2 = dilation_check(&d, 1, eta, 2.0, &g).unwrap();
        assert!(e2 < 1e-3, "rho = 2 error {e2} at 4097 nodes");
        let e2f = dilation_check(&d, 1, eta, 2.0, &grid(8193)).unwrap();
        let order = (e2 / e2f).log2();
        assert!((1.5..=2.5).contains(&order), "dilation error order {order}");
    }

    #[test]
    fn dilation_rejects_large_shift() {
        let d = distinguished_descriptor();
        let g = grid(513);
        let err = dilation_check(&d, 1, Complex64::new(0.0, 1.0), 1e4, &g);
        assert!(err.is_err());
    }

    #[test]
    fn probe_bounded_on_upper_rays() {
        let d = distinguished_descriptor();
        let g = grid(1025);
        let sector = SectorSpec::new(
            0.4,
            vec![PI / 2.0, 3.0 * PI / 4.0],
            SectorSpec::log_spaced(1.0, 1e4, 1),
        )
        .unwrap();
        let table = sectoriality_probe(&d, &sector, &g, 7).unwrap();
        assert!(table.sup.is_finite());
        // Large-|lambda| estimates settle toward 1 (the resolvent scales
        // like 1/|lambda| there), so the profile decreases beyond the
        // largest grid-resolved scale.
        for &arg in &[PI / 2.0, 3.0 * PI / 4.0] {
            let ray = table.ray(arg);
            let last = ray.last().unwrap();
            assert!(last.estimate < 10.0, "large-lambda estimate {}", last.estimate);
            for pair in ray.windows(2) {
                if pair[0].magnitude >= 100.0 {
                    assert!(
                        pair[1].estimate <= pair[0].estimate * 1.02,
                        "profile must decrease past |lambda| = 100: {} -> {}",
                        pair[0].estimate,
                        pair[1].estimate
                    );
                }
            }
        }
    }

    #[test]
    fn blowup_detected_on_spectrum_ray() {
        // On the negative real axis the truncated operator has discrete
        // spectrum; a fine scan must blow up relative to the pi/2 ray.
        let d = distinguished_descriptor();
        let g = grid(1025);
        let safe = SectorSpec::new(0.4, vec![PI / 2.0], SectorSpec::log_spaced(1.0, 100.0, 2))
            .unwrap();
        let safe_sup = sectoriality_probe(&d, &safe, &g, 3).unwrap().sup;
        let scan = SectorSpec::new(0.4, vec![PI], SectorSpec::log_spaced(0.5, 20.0, 60)).unwrap();
        let table = sectoriality_probe(&d, &scan, &g, 3).unwrap();
        assert!(
            table.sup > 50.0 * safe_sup,
            "expected blow-up near discrete spectrum: scan sup {} vs safe sup {safe_sup}",
            table.sup
        );
    }
}
